#include "oasis/verification.hpp"

#include <atomic>
#include <exception>
#include <thread>

#include "oasis/errors.hpp"
#include "oasis/synthgen.hpp"
#include "oasis/text.hpp"

namespace oasis::verification {

NliLabel classify(backends::NliBackend& nli, std::string_view premise, std::string_view hypothesis) {
  if (text::normalize_whitespace(premise).empty()) throw InvalidArgument("premise is empty");
  if (text::normalize_whitespace(hypothesis).empty()) throw InvalidArgument("hypothesis is empty");
  return nli.nli(premise, hypothesis).argmax();
}

std::vector<EvidencePassage> evidence_for(const retrieval::PassageIndex& index,
                                          const retrieval::RankedResult& ranked) {
  std::vector<EvidencePassage> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back({r.passage_id, index.passage_text(r.row)});
  return out;
}

ClaimTrace verify_claim(const std::string& claim, std::span<const EvidencePassage> ranked,
                        backends::NliBackend& nli) {
  ClaimTrace trace;
  trace.claim = claim;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    NliLabel label;
    try {
      label = classify(nli, ranked[i].text, claim);
    } catch (const BackendError& e) {
      throw BackendError(e.kind(), e.fingerprint(),
                         "at evidence rank " + std::to_string(i + 1) + ": " + e.what());
    }
    trace.rank_examined = i + 1;
    if (label == NliLabel::kNeutral) continue;
    trace.decision = label == NliLabel::kEntailment;
    trace.deciding_passage_id = ranked[i].passage_id;
    trace.deciding_label = label;
    return trace;
  }
  trace.decision = true;
  return trace;
}

std::vector<std::string> ChatClaimExtractor::extract(std::string_view text) {
  const std::vector<backends::Message> messages = {
      {"user", synthgen::build_claim_extraction_prompt(text)}};
  std::string last_failure;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    const auto obj = synthgen::extract_first_json_object(chat_.chat(messages));
    if (!obj) {
      last_failure = "no JSON object in reply";
      continue;
    }
    auto it = obj->find("step_1");
    if (it == obj->end() || !it->is_array()) {
      last_failure = "reply lacks a step_1 list";
      continue;
    }
    std::vector<std::string> claims;
    for (const auto& c : *it) {
      if (c.is_string() && !text::normalize_whitespace(c.get<std::string>()).empty()) {
        claims.push_back(c.get<std::string>());
      }
    }
    return claims;
  }
  throw ExhaustedRetries(max_retries_ + 1, last_failure);
}

std::vector<std::string> ScriptedClaimExtractor::extract(std::string_view text) {
  auto it = script_.find(std::string(text));
  if (it == script_.end()) return {};
  return it->second;
}

std::vector<std::string> SentenceClaimExtractor::extract(std::string_view text) {
  return splitter_.split(text);
}

Verdict verify_text(std::string_view text, ClaimExtractor& extractor,
                    const retrieval::PassageIndex& index, backends::EmbeddingBackend& embedder,
                    backends::NliBackend& nli, const VerifyOptions& options) {
  if (index.empty()) throw InvalidArgument("verification needs a non-empty index");
  if (options.k == 0) throw InvalidArgument("k must be >= 1");
  const auto claims = extractor.extract(text);
  if (claims.empty()) throw UnverifiableInput("no claims could be extracted from the text");

  Verdict verdict;
  verdict.claim_traces.resize(claims.size());
  std::vector<std::exception_ptr> errors(claims.size());
  auto run = [&](std::size_t i) {
    try {
      const auto query = embedder.embed_one(claims[i]);
      const auto ranked = retrieval::top_k(index, query, options.k);
      const auto evidence = evidence_for(index, ranked);
      verdict.claim_traces[i] = verify_claim(claims[i], evidence, nli);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(1, options.workers), claims.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < claims.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < claims.size(); i = next++) run(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& t : verdict.claim_traces) verdict.factual = verdict.factual && t.decision;
  return verdict;
}

jsonl::json to_json(const ClaimTrace& t) {
  return {{"claim", t.claim},
          {"decision", t.decision},
          {"deciding_passage_id",
           t.deciding_passage_id ? jsonl::json(*t.deciding_passage_id) : jsonl::json(nullptr)},
          {"deciding_label",
           t.deciding_label ? jsonl::json(to_string(*t.deciding_label)) : jsonl::json(nullptr)},
          {"rank_examined", t.rank_examined}};
}

}  // namespace oasis::verification
