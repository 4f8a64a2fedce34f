#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "oasis/backends.hpp"
#include "oasis/cli.hpp"
#include "oasis/corpus.hpp"
#include "oasis/dataset.hpp"
#include "oasis/errors.hpp"
#include "oasis/evalharness.hpp"
#include "oasis/metrics.hpp"
#include "oasis/retrieval.hpp"
#include "oasis/synthgen.hpp"
#include "oasis/verification.hpp"

namespace py = pybind11;
using namespace oasis;

namespace {

using json = jsonl::json;

// JSON crosses the boundary as text; the Python package decodes it.
std::string dump_rows(const std::vector<json>& rows) { return json(rows).dump(); }

synthgen::ResourceRecord record_from_text(const std::string& text) {
  return synthgen::record_from_json(json::parse(text));
}

std::vector<std::pair<std::string, std::string>> messages_out(const std::vector<backends::Message>& m) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& msg : m) out.emplace_back(msg.role, msg.content);
  return out;
}

}  // namespace

PYBIND11_MODULE(_oasis, m) {
  m.doc() = "Core LLM-Oasis operations";

  // Later registrations are tried first, so the base class goes first.
  auto& base_error = py::register_exception<Error>(m, "OasisError");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base_error.ptr());
  py::register_exception<MetricUndefined>(m, "MetricUndefined", base_error.ptr());
  py::register_exception<UnparseableVerdict>(m, "UnparseableVerdict", base_error.ptr());
  py::register_exception<GenerationParseError>(m, "GenerationParseError", base_error.ptr());

  // corpus
  m.def("split_sentences", [](const std::string& text) { return corpus::split_sentences(text); });
  m.def(
      "window_passages",
      [](const std::string& page_id, const std::vector<std::string>& sentences, std::size_t size,
         std::size_t stride) {
        std::vector<json> rows;
        for (const auto& p : corpus::window_passages(page_id, sentences, {size, stride})) {
          rows.push_back(corpus::to_json(p));
        }
        return dump_rows(rows);
      },
      py::arg("page_id"), py::arg("sentences"), py::arg("size") = 5, py::arg("stride") = 1);
  m.def("sample_index", &corpus::sample_index, py::arg("key"), py::arg("n"), py::arg("seed"));

  // metrics
  m.def("rouge1_f1", &eval::rouge1_f1);
  m.def("easiness", [](const std::vector<std::string>& generated, const std::vector<std::string>& gold) {
    const auto e = eval::easiness(generated, gold);
    return py::make_tuple(e.precision, e.recall, e.f1);
  });
  m.def("balanced_accuracy", [](const std::vector<bool>& predictions, const std::vector<bool>& golds) {
    return eval::balanced_accuracy(predictions, golds);
  });

  // prompts
  m.def(
      "build_prompt",
      [](const std::string& mode, const std::string& text,
         std::optional<std::vector<std::string>> evidence,
         std::vector<std::tuple<std::string, bool, std::string>> few_shot,
         std::optional<std::size_t> token_budget, bool system_slot) {
        eval::PromptSpec spec;
        spec.mode = eval::parse_prompt_mode(mode);
        spec.evidence = std::move(evidence);
        spec.token_budget = token_budget;
        spec.system_slot = system_slot;
        for (auto& [t, label, explanation] : few_shot) spec.few_shot_examples.push_back({t, label, explanation});
        return messages_out(eval::build_prompt(spec, text));
      },
      py::arg("mode"), py::arg("text"), py::arg("evidence") = py::none(),
      py::arg("few_shot") = std::vector<std::tuple<std::string, bool, std::string>>{},
      py::arg("token_budget") = py::none(), py::arg("system_slot") = true);
  m.def("parse_llm_verdict", &eval::parse_llm_verdict, py::arg("raw"), py::arg("explain_mode") = false);
  m.def("zero_shot_instructions", [] { return std::string(eval::zero_shot_instructions()); });
  m.def("rag_instructions", [] { return std::string(eval::rag_instructions()); });

  // generation
  m.def("build_unified_prompt", [](const std::string& passage) { return synthgen::build_unified_prompt(passage); });
  m.def("parse_generation_output", [](const std::string& raw) {
    return synthgen::serialize(synthgen::parse_generation_output(raw));
  });
  m.def("validate", [](const std::string& passage_text, const std::string& raw) {
    corpus::Passage p;
    p.passage_id = "input:0";
    p.page_id = "input";
    p.sentences = corpus::split_sentences(passage_text);
    const auto report = synthgen::validate_record(p, synthgen::parse_generation_output(raw));
    return py::make_tuple(report.hard_failures, report.warnings);
  });

  // dataset derivation over a serialized record
  m.def("derive_retriever_pairs", [](const std::string& record) {
    std::vector<json> rows;
    for (const auto& p : dataset::derive_retriever_pairs(record_from_text(record))) rows.push_back(dataset::to_json(p));
    return dump_rows(rows);
  });
  m.def(
      "derive_nli_triplets",
      [](const std::string& record, std::optional<std::vector<std::string>> neutral) {
        std::vector<json> rows;
        for (const auto& t : dataset::derive_nli_triplets(record_from_text(record), neutral)) {
          rows.push_back(dataset::to_json(t));
        }
        return dump_rows(rows);
      },
      py::arg("record"), py::arg("neutral_premises") = py::none());

  // retrieval
  py::class_<retrieval::PassageIndex>(m, "PassageIndex")
      .def(py::init<std::size_t>())
      .def("add",
           [](retrieval::PassageIndex& self, std::string id, std::string text, const std::vector<float>& v) {
             self.add(std::move(id), std::move(text), v);
           })
      .def("__len__", &retrieval::PassageIndex::size)
      .def_property_readonly("dimension", &retrieval::PassageIndex::dimension)
      .def(
          "top_k",
          [](const retrieval::PassageIndex& self, const std::vector<float>& query, std::size_t k) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& r : retrieval::top_k(self, query, k)) out.emplace_back(r.passage_id, r.score);
            return out;
          },
          py::arg("query"), py::arg("k"))
      .def("save", [](const retrieval::PassageIndex& self, const std::string& path) { retrieval::save_index(path, self); })
      .def_static("load", [](const std::string& path) { return retrieval::load_index(path); });
  m.def("in_batch_loss", &retrieval::in_batch_loss);

  py::class_<backends::HashedBagOfWordsEmbedder>(m, "HashedEmbedder")
      .def(py::init<std::size_t>(), py::arg("dimension") = 256)
      .def("embed", [](backends::HashedBagOfWordsEmbedder& self, const std::vector<std::string>& texts) {
        return self.embed(texts);
      });

  // verification with the rule-based NLI mock
  py::class_<backends::RuleNliBackend>(m, "RuleNli")
      .def(py::init<std::vector<backends::RuleNliBackend::TermPair>>(),
           py::arg("contradictions") = std::vector<backends::RuleNliBackend::TermPair>{})
      .def("nli", [](backends::RuleNliBackend& self, const std::string& premise, const std::string& hypothesis) {
        const auto d = self.nli(premise, hypothesis);
        return py::make_tuple(d.entailment, d.neutral, d.contradiction);
      });
  m.def("verify_claim",
        [](const std::string& claim, const std::vector<std::pair<std::string, std::string>>& ranked,
           backends::RuleNliBackend& nli) {
          std::vector<verification::EvidencePassage> evidence;
          for (const auto& [id, text] : ranked) evidence.push_back({id, text});
          return verification::to_json(verification::verify_claim(claim, evidence, nli)).dump();
        });

  m.def("run_cli", [](const std::vector<std::string>& args, const std::string& stdin_text) {
    std::istringstream in(stdin_text);
    std::ostringstream out;
    std::ostringstream err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(args, in, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), py::arg("stdin") = std::string());
}
