#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oasis/backends.hpp"
#include "oasis/corpus.hpp"
#include "oasis/jsonl.hpp"

namespace oasis::synthgen {

/// Step 2 output: the falsified claim together with the claim it alters.
struct FalsifiedPair {
  std::string altered;
  std::string original;

  bool operator==(const FalsifiedPair&) const = default;
};

/// Parsed reply to the unified generation prompt.
struct StepOutputs {
  std::vector<std::string> claims;  // step_1
  FalsifiedPair falsified;          // step_2
  std::string factual_text;         // step_3
  std::string unfactual_text;       // step_4

  bool operator==(const StepOutputs&) const = default;
};

namespace codes {
// Hard failures: the record is unusable.
inline constexpr const char* kEmptyClaims = "empty_claims";
inline constexpr const char* kOriginalNotInClaims = "original_not_in_claims";
inline constexpr const char* kAlteredEqualsOriginal = "altered_equals_original";
inline constexpr const char* kEmptyFactualText = "empty_factual_text";
inline constexpr const char* kEmptyUnfactualText = "empty_unfactual_text";
// Warnings: kept, but flagged.
inline constexpr const char* kClaimTooLong = "claim_too_long";
inline constexpr const char* kBlankClaim = "blank_claim";
inline constexpr const char* kDuplicateClaims = "duplicate_claims";
inline constexpr const char* kOriginalFuzzyMatch = "original_fuzzy_match";
inline constexpr const char* kParaphraseTooLiteral = "paraphrase_too_literal";
inline constexpr const char* kUnfactualDiverges = "unfactual_diverges";
}  // namespace codes

struct ValidationThresholds {
  std::size_t max_claim_words = 15;
  double fuzzy_membership = 0.9;    // ROUGE-1 F1 accepted as "same claim"
  double max_paraphrase_overlap = 0.9;
  double min_unfactual_overlap = 0.5;
};

struct ValidationReport {
  std::vector<std::string> hard_failures;
  std::vector<std::string> warnings;

  bool usable() const noexcept { return hard_failures.empty(); }
  bool operator==(const ValidationReport&) const = default;
};

struct ResourceRecord {
  std::string record_id;
  corpus::Passage passage;
  StepOutputs outputs;
  ValidationReport validation;
  int retries = 0;

  /// Position of the falsified claim within outputs.claims (first match).
  std::optional<std::size_t> falsified_index() const;
};

/// The unified four-step generation prompt with `passage` as its input.
std::string build_unified_prompt(const corpus::Passage& passage);
std::string build_unified_prompt(std::string_view passage_text);

/// Step-1-only variant used for claim extraction at verification time.
std::string build_claim_extraction_prompt(std::string_view text);

/// Finds the first balanced {...} in `raw` that parses as a JSON object,
/// skipping any preamble or markdown fencing.
std::optional<jsonl::json> extract_first_json_object(std::string_view raw);

/// Throws MalformedOutput, MissingKey or TypeMismatch.
StepOutputs parse_generation_output(std::string_view raw);

/// Canonical JSON form accepted by parse_generation_output.
std::string serialize(const StepOutputs& outputs);

/// Index of `outputs.falsified.original` within the claims: normalized exact
/// match first, then the best fuzzy match at or above `fuzzy_threshold`.
std::optional<std::size_t> find_original_claim(const StepOutputs& outputs,
                                               double fuzzy_threshold = 0.9);

ValidationReport validate_record(const corpus::Passage& passage, const StepOutputs& outputs,
                                 const ValidationThresholds& thresholds = {});

/// Prompts `chat` (which must run at temperature 0) and retries on parse or
/// hard-validation failures up to `max_retries` times. Backend errors
/// propagate; running out of attempts throws ExhaustedRetries.
ResourceRecord generate_record(const corpus::Passage& passage, backends::ChatBackend& chat,
                               int max_retries);

inline constexpr const char* kRecordSchema = "oasis.resource_record";
inline constexpr int kRecordSchemaVersion = 1;

jsonl::json to_json(const ResourceRecord& record);
ResourceRecord record_from_json(const jsonl::json& obj);

/// Files start with a {"schema", "version"} header line.
std::vector<ResourceRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<ResourceRecord>& records);

}  // namespace oasis::synthgen
