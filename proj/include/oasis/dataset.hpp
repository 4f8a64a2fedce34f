#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oasis/backends.hpp"
#include "oasis/corpus.hpp"
#include "oasis/jsonl.hpp"
#include "oasis/nli.hpp"
#include "oasis/synthgen.hpp"

namespace oasis::dataset {

using synthgen::ResourceRecord;

/// Which claim is paired with which text: an extracted claim or the
/// falsified claim, against the source passage t, factual text F or
/// unfactual text U.
enum class PairingKind {
  kClaimPassage,
  kClaimFactual,
  kClaimUnfactual,
  kFalsifiedPassage,
  kFalsifiedFactual,
  kFalsifiedUnfactual,
};

const char* to_string(PairingKind kind) noexcept;

struct RetrieverPair {
  std::string claim;
  std::string passage_text;
  std::string record_id;
  PairingKind kind = PairingKind::kClaimPassage;
};

struct NliTriplet {
  std::string premise;
  std::string hypothesis;
  NliLabel label = NliLabel::kNeutral;
  std::string record_id;
};

enum class TextOrigin { kFactual, kUnfactual };

struct Task1Instance {
  std::string text;
  bool label = true;  // true = factual
  TextOrigin origin = TextOrigin::kFactual;
  std::string record_id;
};

struct Task2Instance {
  std::string claim;
  std::string evidence;
  bool label = true;
  std::string record_id;
};

struct Split {
  std::vector<ResourceRecord> train;
  std::vector<ResourceRecord> validation;
};

/// Seeded partition at record granularity; round(ratio * n) records go to
/// train (clamped so both sides are non-empty). Each side keeps input order.
Split split_train_val(const std::vector<ResourceRecord>& records, double ratio, std::uint64_t seed);

/// 3 pairs per extracted claim plus 3 for the falsified claim: 3(n + 1).
std::vector<RetrieverPair> derive_retriever_pairs(const ResourceRecord& record);

/// 2n ENT pairs from the extracted claims, the four falsification triplets,
/// and, when `neutral_premises` holds one premise per claim, n NEUT
/// triplets: 3n + 4 with neutrals, 2n + 4 without.
std::vector<NliTriplet> derive_nli_triplets(
    const ResourceRecord& record,
    const std::optional<std::vector<std::string>>& neutral_premises = std::nullopt);

/// Candidate maximizing P(NEUT | passage, claim); ties go to the smallest
/// passage_id. Throws InvalidArgument on an empty candidate list.
const corpus::Passage& mine_neutral_passage(const std::string& claim,
                                            std::span<const corpus::Passage> candidates,
                                            backends::NliBackend& nli);

/// One mined premise per claim, using the other passages of the record's
/// page (the record's own passage excluded). nullopt when the page offers
/// no other passage.
std::optional<std::vector<std::string>> mine_neutral_premises(
    const ResourceRecord& record, std::span<const corpus::Passage> page_passages,
    backends::NliBackend& nli);

/// (F, true) and (U, false) for every usable record; the source passage is
/// never emitted.
std::vector<Task1Instance> build_task1(const std::vector<ResourceRecord>& records);

/// (c_i, F, true) and (falsified c_i, F, false) for every usable record.
std::vector<Task2Instance> build_task2(const std::vector<ResourceRecord>& records);

jsonl::json to_json(const RetrieverPair& p);
jsonl::json to_json(const NliTriplet& t);
jsonl::json to_json(const Task1Instance& i);
jsonl::json to_json(const Task2Instance& i);
Task1Instance task1_from_json(const jsonl::json& obj);
Task2Instance task2_from_json(const jsonl::json& obj);

}  // namespace oasis::dataset
