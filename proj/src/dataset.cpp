#include "oasis/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oasis/errors.hpp"

namespace oasis::dataset {

using json = jsonl::json;

const char* to_string(PairingKind kind) noexcept {
  switch (kind) {
    case PairingKind::kClaimPassage:
      return "claim_x_t";
    case PairingKind::kClaimFactual:
      return "claim_x_F";
    case PairingKind::kClaimUnfactual:
      return "claim_x_U";
    case PairingKind::kFalsifiedPassage:
      return "falsified_x_t";
    case PairingKind::kFalsifiedFactual:
      return "falsified_x_F";
    case PairingKind::kFalsifiedUnfactual:
      return "falsified_x_U";
  }
  return "?";
}

namespace {

// The original claim c_i as it appears in the claim list.
const std::string& original_claim(const ResourceRecord& r) {
  if (!r.validation.usable()) {
    throw InvalidArgument("record '" + r.record_id + "' failed validation");
  }
  const auto idx = r.falsified_index();
  if (!idx) throw InvalidArgument("record '" + r.record_id + "' has no falsified claim index");
  return r.outputs.claims[*idx];
}

}  // namespace

Split split_train_val(const std::vector<ResourceRecord>& records, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split ratio must lie in (0, 1)");
  const std::size_t n = records.size();
  if (n < 2) throw InvalidArgument("splitting needs at least 2 records");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
  }
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());

  Split split;
  for (auto i : train) split.train.push_back(records[i]);
  for (auto i : val) split.validation.push_back(records[i]);
  return split;
}

std::vector<RetrieverPair> derive_retriever_pairs(const ResourceRecord& r) {
  original_claim(r);
  const std::string t = r.passage.text();
  const auto& F = r.outputs.factual_text;
  const auto& U = r.outputs.unfactual_text;
  std::vector<RetrieverPair> out;
  out.reserve(3 * (r.outputs.claims.size() + 1));
  for (const auto& c : r.outputs.claims) {
    out.push_back({c, t, r.record_id, PairingKind::kClaimPassage});
    out.push_back({c, F, r.record_id, PairingKind::kClaimFactual});
    out.push_back({c, U, r.record_id, PairingKind::kClaimUnfactual});
  }
  const auto& altered = r.outputs.falsified.altered;
  out.push_back({altered, t, r.record_id, PairingKind::kFalsifiedPassage});
  out.push_back({altered, F, r.record_id, PairingKind::kFalsifiedFactual});
  out.push_back({altered, U, r.record_id, PairingKind::kFalsifiedUnfactual});
  return out;
}

std::vector<NliTriplet> derive_nli_triplets(const ResourceRecord& r,
                                            const std::optional<std::vector<std::string>>& neutral) {
  const std::string& original = original_claim(r);
  const auto& claims = r.outputs.claims;
  if (neutral && neutral->size() != claims.size()) {
    throw InvalidArgument("need exactly one neutral premise per claim");
  }
  const std::string t = r.passage.text();
  const auto& F = r.outputs.factual_text;
  const auto& U = r.outputs.unfactual_text;
  const auto& altered = r.outputs.falsified.altered;
  constexpr auto kEnt = NliLabel::kEntailment;
  constexpr auto kContr = NliLabel::kContradiction;

  std::vector<NliTriplet> out;
  out.reserve(3 * claims.size() + 4);
  for (const auto& c : claims) {
    out.push_back({t, c, kEnt, r.record_id});
    out.push_back({F, c, kEnt, r.record_id});
  }
  out.push_back({t, altered, kContr, r.record_id});
  out.push_back({F, altered, kContr, r.record_id});
  out.push_back({U, altered, kEnt, r.record_id});
  out.push_back({U, original, kContr, r.record_id});
  if (neutral) {
    for (std::size_t j = 0; j < claims.size(); ++j) {
      out.push_back({(*neutral)[j], claims[j], NliLabel::kNeutral, r.record_id});
    }
  }
  return out;
}

const corpus::Passage& mine_neutral_passage(const std::string& claim,
                                            std::span<const corpus::Passage> candidates,
                                            backends::NliBackend& nli) {
  if (candidates.empty()) throw InvalidArgument("neutral mining needs at least one candidate");
  const corpus::Passage* best = nullptr;
  double best_p = -1.0;
  for (const auto& c : candidates) {
    const double p = nli.nli(c.text(), claim).neutral;
    if (p > best_p || (p == best_p && c.passage_id < best->passage_id)) {
      best = &c;
      best_p = p;
    }
  }
  return *best;
}

std::optional<std::vector<std::string>> mine_neutral_premises(
    const ResourceRecord& r, std::span<const corpus::Passage> page_passages,
    backends::NliBackend& nli) {
  std::vector<corpus::Passage> candidates;
  for (const auto& p : page_passages) {
    if (p.page_id == r.passage.page_id && p.passage_id != r.passage.passage_id) {
      candidates.push_back(p);
    }
  }
  if (candidates.empty()) return std::nullopt;
  std::vector<std::string> premises;
  premises.reserve(r.outputs.claims.size());
  for (const auto& claim : r.outputs.claims) {
    premises.push_back(mine_neutral_passage(claim, candidates, nli).text());
  }
  return premises;
}

std::vector<Task1Instance> build_task1(const std::vector<ResourceRecord>& records) {
  std::vector<Task1Instance> out;
  for (const auto& r : records) {
    if (!r.validation.usable() || !r.falsified_index()) continue;
    out.push_back({r.outputs.factual_text, true, TextOrigin::kFactual, r.record_id});
    out.push_back({r.outputs.unfactual_text, false, TextOrigin::kUnfactual, r.record_id});
  }
  return out;
}

std::vector<Task2Instance> build_task2(const std::vector<ResourceRecord>& records) {
  std::vector<Task2Instance> out;
  for (const auto& r : records) {
    if (!r.validation.usable() || !r.falsified_index()) continue;
    const auto& F = r.outputs.factual_text;
    out.push_back({original_claim(r), F, true, r.record_id});
    out.push_back({r.outputs.falsified.altered, F, false, r.record_id});
  }
  return out;
}

json to_json(const RetrieverPair& p) {
  return {{"claim", p.claim},
          {"passage_text", p.passage_text},
          {"record_id", p.record_id},
          {"pairing_kind", to_string(p.kind)}};
}

json to_json(const NliTriplet& t) {
  return {{"premise", t.premise},
          {"hypothesis", t.hypothesis},
          {"label", to_string(t.label)},
          {"record_id", t.record_id}};
}

json to_json(const Task1Instance& i) {
  return {{"text", i.text},
          {"label", i.label},
          {"origin", i.origin == TextOrigin::kFactual ? "F" : "U"},
          {"record_id", i.record_id}};
}

json to_json(const Task2Instance& i) {
  return {{"claim", i.claim}, {"evidence", i.evidence}, {"label", i.label}, {"record_id", i.record_id}};
}

namespace {

bool bool_field(const json& obj, const char* name) {
  const json& v = jsonl::field(obj, name);
  if (!v.is_boolean()) throw FormatError(std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

}  // namespace

Task1Instance task1_from_json(const json& obj) {
  Task1Instance i;
  i.text = jsonl::string_field(obj, "text");
  i.label = bool_field(obj, "label");
  const std::string origin = obj.contains("origin") ? jsonl::string_field(obj, "origin")
                                                    : (i.label ? "F" : "U");
  if (origin != "F" && origin != "U") throw FormatError("origin must be \"F\" or \"U\"");
  i.origin = origin == "F" ? TextOrigin::kFactual : TextOrigin::kUnfactual;
  if ((i.origin == TextOrigin::kFactual) != i.label) {
    throw FormatError("task 1 instance: origin and label disagree");
  }
  i.record_id = obj.value("record_id", "");
  return i;
}

Task2Instance task2_from_json(const json& obj) {
  Task2Instance i;
  i.claim = jsonl::string_field(obj, "claim");
  i.evidence = jsonl::string_field(obj, "evidence");
  i.label = bool_field(obj, "label");
  i.record_id = obj.value("record_id", "");
  return i;
}

}  // namespace oasis::dataset
