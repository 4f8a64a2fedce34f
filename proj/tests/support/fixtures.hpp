#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oasis/backends.hpp"
#include "oasis/corpus.hpp"
#include "oasis/dataset.hpp"
#include "oasis/jsonl.hpp"
#include "oasis/retrieval.hpp"
#include "oasis/synthgen.hpp"
#include "oasis/verification.hpp"

namespace oasis::fx {

inline std::filesystem::path data_dir() { return OASIS_TEST_DATA_DIR; }

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string trim_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("oasis-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline corpus::Passage passage_from_text(const std::string& page_id, const std::string& text) {
  corpus::Passage p;
  p.page_id = page_id;
  p.start = 0;
  p.passage_id = corpus::make_passage_id(page_id, 0);
  p.sentences = corpus::split_sentences(text);
  return p;
}

inline corpus::Passage amazon_passage() {
  return passage_from_text("amazon", trim_newline(slurp(data_dir() / "fixtures/amazon/passage.txt")));
}

inline std::string amazon_reply() { return slurp(data_dir() / "fixtures/amazon/reply.txt"); }

/// One topic of the end-to-end fixture: a source page plus the claims,
/// falsification and factual/unfactual texts derived from it.
struct PipelineCase {
  std::string page_id;
  std::string title;
  std::string text;
  std::vector<std::string> claims;
  std::string altered;
  std::string original;
  std::pair<std::string, std::string> contradiction;
  std::string factual_text;
  std::string unfactual_text;

  /// Claims as they appear in the unfactual text.
  std::vector<std::string> unfactual_claims() const {
    auto out = claims;
    for (auto& c : out) {
      if (c == original) c = altered;
    }
    return out;
  }
};

inline std::vector<PipelineCase> load_pipeline_cases() {
  std::vector<PipelineCase> out;
  for (const auto& row : jsonl::read(data_dir() / "fixtures/pipeline/cases.jsonl")) {
    PipelineCase c;
    c.page_id = row.at("page_id");
    c.title = row.at("title");
    c.text = row.at("text");
    c.claims = row.at("claims").get<std::vector<std::string>>();
    c.altered = row.at("falsified").at(0);
    c.original = row.at("falsified").at(1);
    c.contradiction = {row.at("contradiction").at(0), row.at("contradiction").at(1)};
    c.factual_text = row.at("factual_text");
    c.unfactual_text = row.at("unfactual_text");
    out.push_back(std::move(c));
  }
  return out;
}

/// Everything the offline pipeline needs for the fixture: the indexed
/// corpus, one record per case, the scripted extractor and the contradiction
/// lexicon the rule NLI is calibrated with.
struct PipelineFixture {
  std::vector<PipelineCase> cases;
  std::vector<corpus::Passage> passages;
  std::vector<synthgen::ResourceRecord> records;
  std::map<std::string, std::vector<std::string>> extraction_script;
  std::vector<backends::RuleNliBackend::TermPair> contradictions;
};

inline PipelineFixture load_pipeline_fixture() {
  PipelineFixture f;
  f.cases = load_pipeline_cases();
  for (const auto& page : corpus::load_pages(data_dir() / "fixtures/pipeline/pages.jsonl")) {
    for (auto& p : corpus::page_passages(page, {})) f.passages.push_back(std::move(p));
  }
  for (const auto& c : f.cases) {
    synthgen::ResourceRecord r;
    r.passage = passage_from_text(c.page_id, c.text);
    r.record_id = r.passage.passage_id;
    r.outputs.claims = c.claims;
    r.outputs.falsified = {c.altered, c.original};
    r.outputs.factual_text = c.factual_text;
    r.outputs.unfactual_text = c.unfactual_text;
    r.validation = synthgen::validate_record(r.passage, r.outputs);
    f.records.push_back(std::move(r));
    f.extraction_script[c.factual_text] = c.claims;
    f.extraction_script[c.unfactual_text] = c.unfactual_claims();
    f.contradictions.push_back(c.contradiction);
  }
  return f;
}

}  // namespace oasis::fx
