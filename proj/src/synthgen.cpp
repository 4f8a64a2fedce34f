#include "oasis/synthgen.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "oasis/errors.hpp"
#include "oasis/metrics.hpp"
#include "oasis/text.hpp"

namespace oasis::synthgen {

using json = jsonl::json;

namespace {

constexpr std::string_view kStep1 =
    "Step 1 - Claim extraction: From the input passage, extract a comprehensive set of claims. "
    "These claims must be atomic, i.e. semantically-coherent pieces of text that do not require "
    "further subdivision, and self-contained, i.e. not requiring additional context to be "
    "verified. Note that each claim must be short, using 15 words at most. Do not use \"...\" to "
    "truncate them. The ordering of the extracted claims must follow the logical flow expressed "
    "in the original text. Use a noun as the subject in the claim (avoid pronouns). All the "
    "claims that are featured in the input text must be reported in the list.";

constexpr std::string_view kStep2 =
    "Step 2 - Claim falsification: From the output of Step 1, subtly alter one claim, in order "
    "to introduce a critical factual inaccuracy. Such claim must be the most relevant for the "
    "input text. It is forbidden to change dates, years, numbers and "
    "person/location/organization/etc. names. It is also forbidden to provide naive negative "
    "transformations of verbs, e.g., was -> was not, did -> did not. This step, i.e., Step 2, "
    "returns a pair containing the altered claim along with the original one.";

constexpr std::string_view kStep3 =
    "Step 3 - Factual text generation: From the output of Step 1, generate a text. Note that "
    "this text must be a paraphrase of the original provided text, i.e. a new text that should "
    "overlap as little as possible with the original, while preserving the meaning. The "
    "generated text must follow the same logical flow as the ordering of the extracted claims.";

constexpr std::string_view kStep4 =
    "Step 4 - Unfactual text generation: Generate a text from the final set of claims (original "
    "unaltered + altered) i.e. the output of Step 3. Note that the output of this step is not "
    "the original text, but the one generated from the final set of claims. Therefore this text "
    "contains unfactual information. The generated text must follow the same logical flow as "
    "the ordering of the claims. The output text must be as similar as possible to the output "
    "of Step 2, unless the unfactual part.";

constexpr std::string_view kOutputFormat =
    "Output format: Return the output in a JSON with the following format: { 'step_1': "
    "List[str], 'step_2': Tuple[str, str], 'step_3': str, 'step_4': str}. The output must be a "
    "valid JSON, thus try to avoid special characters like ' and \" inside the JSON values, "
    "unless you escape them with a \\. Do not include any marker for the altered claim inside "
    "the JSON values, e.g., # this is the altered claim. Please do not provide any preamble to "
    "your response, just give me the JSON.";

constexpr std::string_view kStep1OutputFormat =
    "Output format: Return the output in a JSON with the following format: { 'step_1': "
    "List[str]}. The output must be a valid JSON, thus try to avoid special characters like ' "
    "and \" inside the JSON values, unless you escape them with a \\. Please do not provide any "
    "preamble to your response, just give me the JSON.";

// End of the balanced object starting at raw[open], honouring JSON string
// escapes, or npos.
std::size_t matching_brace(std::string_view raw, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

const json& require_key(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MissingKey(key);
  return *it;
}

std::string require_string(const json& v, const char* key) {
  if (!v.is_string()) throw TypeMismatch(key, std::string("expected a string, got ") + v.type_name());
  return v.get<std::string>();
}

}  // namespace

std::optional<std::size_t> ResourceRecord::falsified_index() const {
  return find_original_claim(outputs);
}

std::string build_unified_prompt(std::string_view passage_text) {
  std::string p;
  p.reserve(passage_text.size() + 3000);
  p += "Input: ";
  p += passage_text;
  p += "\n\nInstructions: Execute the following steps:\n\n";
  p += kStep1;
  p += "\n\n";
  p += kStep2;
  p += "\n\n";
  p += kStep3;
  p += "\n\n";
  p += kStep4;
  p += "\n\n";
  p += kOutputFormat;
  return p;
}

std::string build_unified_prompt(const corpus::Passage& passage) {
  if (passage.sentences.empty()) throw InvalidArgument("cannot build a prompt for an empty passage");
  return build_unified_prompt(passage.text());
}

std::string build_claim_extraction_prompt(std::string_view text) {
  std::string p = "Input: ";
  p += text;
  p += "\n\nInstructions: Execute the following step:\n\n";
  p += kStep1;
  p += "\n\n";
  p += kStep1OutputFormat;
  return p;
}

std::optional<json> extract_first_json_object(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos;
       open = raw.find('{', open + 1)) {
    const std::size_t close = matching_brace(raw, open);
    if (close == std::string_view::npos) continue;
    json parsed = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

StepOutputs parse_generation_output(std::string_view raw) {
  auto obj = extract_first_json_object(raw);
  if (!obj) throw MalformedOutput("no JSON object found in reply");

  StepOutputs out;
  const json& step1 = require_key(*obj, "step_1");
  if (!step1.is_array()) throw TypeMismatch("step_1", "expected a list of strings");
  for (const auto& claim : step1) out.claims.push_back(require_string(claim, "step_1"));

  const json& step2 = require_key(*obj, "step_2");
  if (!step2.is_array() || step2.size() != 2) {
    throw TypeMismatch("step_2", "expected a pair [altered, original]");
  }
  out.falsified.altered = require_string(step2[0], "step_2");
  out.falsified.original = require_string(step2[1], "step_2");

  out.factual_text = require_string(require_key(*obj, "step_3"), "step_3");
  out.unfactual_text = require_string(require_key(*obj, "step_4"), "step_4");
  return out;
}

std::string serialize(const StepOutputs& o) {
  json obj = {{"step_1", o.claims},
              {"step_2", {o.falsified.altered, o.falsified.original}},
              {"step_3", o.factual_text},
              {"step_4", o.unfactual_text}};
  return obj.dump();
}

std::optional<std::size_t> find_original_claim(const StepOutputs& o, double fuzzy_threshold) {
  const std::string target = text::normalize_claim(o.falsified.original);
  if (target.empty()) return std::nullopt;
  for (std::size_t i = 0; i < o.claims.size(); ++i) {
    if (text::normalize_claim(o.claims[i]) == target) return i;
  }
  std::optional<std::size_t> best;
  double best_score = fuzzy_threshold;
  for (std::size_t i = 0; i < o.claims.size(); ++i) {
    const double score = eval::rouge1_f1(o.claims[i], o.falsified.original);
    if (score >= best_score && (!best || score > best_score)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

ValidationReport validate_record(const corpus::Passage& passage, const StepOutputs& o,
                                 const ValidationThresholds& th) {
  ValidationReport r;
  auto fail = [&](const char* code) { r.hard_failures.emplace_back(code); };
  auto warn = [&](const char* code) {
    if (std::find(r.warnings.begin(), r.warnings.end(), code) == r.warnings.end()) {
      r.warnings.emplace_back(code);
    }
  };

  if (o.claims.empty()) fail(codes::kEmptyClaims);

  const std::string original = text::normalize_claim(o.falsified.original);
  bool exact = false;
  for (const auto& c : o.claims) exact = exact || text::normalize_claim(c) == original;
  if (!o.claims.empty()) {
    if (!exact) {
      if (!original.empty() && find_original_claim(o, th.fuzzy_membership)) {
        warn(codes::kOriginalFuzzyMatch);
      } else {
        fail(codes::kOriginalNotInClaims);
      }
    }
  }
  if (text::normalize_claim(o.falsified.altered) == original) fail(codes::kAlteredEqualsOriginal);
  if (text::normalize_whitespace(o.factual_text).empty()) fail(codes::kEmptyFactualText);
  if (text::normalize_whitespace(o.unfactual_text).empty()) fail(codes::kEmptyUnfactualText);

  std::set<std::string> seen;
  for (const auto& c : o.claims) {
    const std::string norm = text::normalize_claim(c);
    if (norm.empty()) warn(codes::kBlankClaim);
    if (text::word_count(c) > th.max_claim_words) warn(codes::kClaimTooLong);
    if (!norm.empty() && !seen.insert(norm).second) warn(codes::kDuplicateClaims);
  }
  if (text::word_count(o.falsified.altered) > th.max_claim_words) warn(codes::kClaimTooLong);

  if (!o.factual_text.empty() &&
      eval::rouge1_f1(o.factual_text, passage.text()) > th.max_paraphrase_overlap) {
    warn(codes::kParaphraseTooLiteral);
  }
  if (!o.factual_text.empty() && !o.unfactual_text.empty() &&
      eval::rouge1_f1(o.unfactual_text, o.factual_text) < th.min_unfactual_overlap) {
    warn(codes::kUnfactualDiverges);
  }
  return r;
}

ResourceRecord generate_record(const corpus::Passage& passage, backends::ChatBackend& chat,
                               int max_retries) {
  if (max_retries < 0) throw InvalidArgument("max_retries must be >= 0");
  if (chat.temperature() != 0.0) {
    throw InvalidArgument("generation runs at temperature 0.0; the chat profile sets " +
                          std::to_string(chat.temperature()));
  }
  const std::vector<backends::Message> messages = {{"user", build_unified_prompt(passage)}};
  std::string last_failure;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const std::string raw = chat.chat(messages);
    try {
      StepOutputs outputs = parse_generation_output(raw);
      ValidationReport report = validate_record(passage, outputs);
      if (report.usable()) {
        return {passage.passage_id, passage, std::move(outputs), std::move(report), attempt};
      }
      last_failure = "hard validation failure: " + text::join(report.hard_failures, ",");
    } catch (const GenerationParseError& e) {
      last_failure = e.what();
    }
    spdlog::debug("passage {}: attempt {} rejected ({})", passage.passage_id, attempt + 1,
                  last_failure);
  }
  throw ExhaustedRetries(max_retries + 1, last_failure);
}

json to_json(const ResourceRecord& r) {
  json outputs = json::parse(serialize(r.outputs));
  const auto idx = r.falsified_index();
  return {{"record_id", r.record_id},
          {"passage", corpus::to_json(r.passage)},
          {"outputs", std::move(outputs)},
          {"falsified_index", idx ? json(*idx) : json(nullptr)},
          {"validation",
           {{"hard_failures", r.validation.hard_failures}, {"warnings", r.validation.warnings}}},
          {"retries", r.retries}};
}

ResourceRecord record_from_json(const json& obj) {
  ResourceRecord r;
  r.record_id = jsonl::string_field(obj, "record_id");
  r.passage = corpus::passage_from_json(jsonl::field(obj, "passage"));
  try {
    r.outputs = parse_generation_output(jsonl::field(obj, "outputs").dump());
  } catch (const GenerationParseError& e) {
    throw FormatError("record '" + r.record_id + "': " + e.what());
  }
  const json& v = jsonl::field(obj, "validation");
  r.validation.hard_failures = jsonl::field(v, "hard_failures").get<std::vector<std::string>>();
  r.validation.warnings = jsonl::field(v, "warnings").get<std::vector<std::string>>();
  r.retries = obj.value("retries", 0);
  return r;
}

std::vector<ResourceRecord> read_records(const std::filesystem::path& path) {
  const auto rows = jsonl::read(path);
  if (rows.empty()) throw FormatError(path.string() + ": missing schema header");
  const json& header = rows.front();
  if (!header.is_object() || header.value("schema", "") != kRecordSchema) {
    throw FormatError(path.string() + ": not a resource record file");
  }
  if (header.value("version", 0) > kRecordSchemaVersion) {
    throw FormatError(path.string() + ": unsupported schema version");
  }
  std::vector<ResourceRecord> out;
  out.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(record_from_json(rows[i]));
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<ResourceRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size() + 1);
  rows.push_back({{"schema", kRecordSchema}, {"version", kRecordSchemaVersion}});
  for (const auto& r : records) rows.push_back(to_json(r));
  jsonl::write(path, rows);
}

}  // namespace oasis::synthgen
