#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oasis/backends.hpp"
#include "oasis/corpus.hpp"
#include "oasis/jsonl.hpp"
#include "oasis/nli.hpp"
#include "oasis/retrieval.hpp"

namespace oasis::verification {

/// argmax of the backend's distribution for (premise, hypothesis), ties
/// resolved ENT > CONTR > NEUT. Both texts must be non-empty.
NliLabel classify(backends::NliBackend& nli, std::string_view premise, std::string_view hypothesis);

struct EvidencePassage {
  std::string passage_id;
  std::string text;
};

/// Resolves ranked ids to their texts.
std::vector<EvidencePassage> evidence_for(const retrieval::PassageIndex& index,
                                          const retrieval::RankedResult& ranked);

struct ClaimTrace {
  std::string claim;
  bool decision = true;
  /// Passage whose label decided the claim; empty when every label was NEUT.
  std::optional<std::string> deciding_passage_id;
  std::optional<NliLabel> deciding_label;
  /// Number of passages classified before stopping (1-based rank of the
  /// deciding passage, or the full list length when none decided).
  std::size_t rank_examined = 0;
};

struct Verdict {
  bool factual = true;
  std::vector<ClaimTrace> claim_traces;
};

/// Scans the ranked passages in order: the first ENT verifies the claim, the
/// first CONTR refutes it, and an all-NEUT (or empty) list verifies it.
ClaimTrace verify_claim(const std::string& claim, std::span<const EvidencePassage> ranked,
                        backends::NliBackend& nli);

class ClaimExtractor {
 public:
  virtual ~ClaimExtractor() = default;
  virtual std::vector<std::string> extract(std::string_view text) = 0;
};

/// Prompts a chat backend with the claim-extraction step and reads the
/// "step_1" list from its reply.
class ChatClaimExtractor final : public ClaimExtractor {
 public:
  explicit ChatClaimExtractor(backends::ChatBackend& chat, int max_retries = 1)
      : chat_(chat), max_retries_(max_retries) {}
  std::vector<std::string> extract(std::string_view text) override;

 private:
  backends::ChatBackend& chat_;
  int max_retries_;
};

/// Replays fixed claim lists keyed by exact input text.
class ScriptedClaimExtractor final : public ClaimExtractor {
 public:
  explicit ScriptedClaimExtractor(std::map<std::string, std::vector<std::string>> script)
      : script_(std::move(script)) {}
  std::vector<std::string> extract(std::string_view text) override;

 private:
  std::map<std::string, std::vector<std::string>> script_;
};

/// Offline extractor that treats each sentence as one claim.
class SentenceClaimExtractor final : public ClaimExtractor {
 public:
  SentenceClaimExtractor() = default;
  explicit SentenceClaimExtractor(corpus::SentenceSplitter splitter) : splitter_(std::move(splitter)) {}
  std::vector<std::string> extract(std::string_view text) override;

 private:
  corpus::SentenceSplitter splitter_;
};

struct VerifyOptions {
  std::size_t k = 30;
  /// Claims of one text verified in parallel.
  std::size_t workers = 1;
};

/// Extract claims, retrieve top-k evidence per claim, verify each claim; the
/// text is factual iff every claim is. Throws UnverifiableInput when the
/// extractor finds no claims.
Verdict verify_text(std::string_view text, ClaimExtractor& extractor,
                    const retrieval::PassageIndex& index, backends::EmbeddingBackend& embedder,
                    backends::NliBackend& nli, const VerifyOptions& options = {});

jsonl::json to_json(const ClaimTrace& trace);

}  // namespace oasis::verification
