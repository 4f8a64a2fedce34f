#include "oasis/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "oasis/errors.hpp"
#include "oasis/text.hpp"

namespace oasis::eval {

namespace {

constexpr std::string_view kZeroShot =
    "Determine whether the given text is factual or not.\n"
    "\n"
    "1. Read the input text.\n"
    "2. Evaluate the factual accuracy of the input text based on your training data and "
    "knowledge.\n"
    "3. If the input text is factually-accurate, i.e. supported by known information, respond "
    "with \"Factual\"\n"
    "4. Respond with \"Not Factual\" if the input text contains even a single inaccuracy.\n"
    "5. Just reply with \"Factual\" or \"Not Factual\", do not generate any additional text to "
    "the answer.";

constexpr std::string_view kRag =
    "Determine whether the given text is factual or not using the provided evidence. If the "
    "information is not present in the evidence, rely on prior knowledge.\n"
    "1. Read the input text.\n"
    "2. Read the evidence if provided.\n"
    "3. Assess whether the input text is factual based on the evidence if present.\n"
    "4. If the evidence are not provided or is insufficient, use your prior knowledge to "
    "determine the factuality.\n"
    "5. Respond with \"Not Factual\" if the input text contains even a single inaccuracy.\n"
    "6. If the evidence is not related to the text to verify, rely on your prior knowledge to "
    "provide the answer.\n"
    "7. Just reply with \"Factual\" or \"Not Factual\", do not generate any additional text to "
    "the answer.";

constexpr std::string_view kExplain =
    "Motivate your response with an explanation and then reply with \"Factual\" or \"Not "
    "Factual\"\n"
    "Output format:\n"
    "## EXPLANATION: explanation\n"
    "## LABEL: label, i.e., \"Factual\" or \"Not Factual\"";

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Position of `word` in `s` not glued to letters on either side.
bool contains_word(const std::string& s, std::string_view word) {
  for (auto pos = s.find(word); pos != std::string::npos; pos = s.find(word, pos + 1)) {
    const bool left_ok = pos == 0 || !is_alpha(s[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right_ok = end >= s.size() || !is_alpha(s[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::string render_answer(const FewShotExample& ex, bool explain) {
  if (!explain) return std::string(canonical_label(ex.label));
  return "## EXPLANATION: " + ex.explanation + "\n## LABEL: " + std::string(canonical_label(ex.label));
}

std::string with_evidence(std::string_view text, const std::string& separator,
                          const std::vector<std::string>& evidence, std::size_t count) {
  std::string out(text);
  out += separator;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += "\n";
    out += "[" + std::to_string(i + 1) + "] " + evidence[i];
  }
  return out;
}

std::size_t total_tokens(const std::vector<backends::Message>& messages) {
  std::size_t n = 0;
  for (const auto& m : messages) n += approximate_tokens(m.content);
  return n;
}

}  // namespace

const char* to_string(PromptMode mode) noexcept {
  switch (mode) {
    case PromptMode::kZeroShot:
      return "zs";
    case PromptMode::kFewShot:
      return "fs";
    case PromptMode::kZeroShotExplain:
      return "zs_ex";
    case PromptMode::kFewShotExplain:
      return "fs_ex";
    case PromptMode::kRag:
      return "rag";
  }
  return "?";
}

PromptMode parse_prompt_mode(std::string_view s) {
  const std::string l = lower(s);
  if (l == "zs") return PromptMode::kZeroShot;
  if (l == "fs") return PromptMode::kFewShot;
  if (l == "zs_ex") return PromptMode::kZeroShotExplain;
  if (l == "fs_ex") return PromptMode::kFewShotExplain;
  if (l == "rag") return PromptMode::kRag;
  throw InvalidArgument("unknown prompt mode '" + std::string(s) + "'");
}

bool is_explain(PromptMode m) noexcept {
  return m == PromptMode::kZeroShotExplain || m == PromptMode::kFewShotExplain;
}

bool is_few_shot(PromptMode m) noexcept {
  return m == PromptMode::kFewShot || m == PromptMode::kFewShotExplain;
}

std::string_view zero_shot_instructions() noexcept { return kZeroShot; }
std::string_view rag_instructions() noexcept { return kRag; }
std::string_view explain_instructions() noexcept { return kExplain; }

std::size_t approximate_tokens(std::string_view s) noexcept { return (s.size() + 3) / 4; }

std::vector<backends::Message> build_prompt(const PromptSpec& spec, std::string_view text) {
  const bool has_evidence = spec.evidence && !spec.evidence->empty();
  if (spec.mode == PromptMode::kRag && !has_evidence) {
    throw InvalidArgument("RAG prompts need evidence passages");
  }
  if (is_few_shot(spec.mode) && spec.few_shot_examples.empty()) {
    throw InvalidArgument("few-shot prompts need examples");
  }

  std::string instructions(has_evidence ? kRag : kZeroShot);
  if (is_explain(spec.mode)) {
    instructions += "\n\n";
    instructions += kExplain;
  }

  // Turns before the instructions are placed.
  std::vector<backends::Message> turns;
  if (is_few_shot(spec.mode)) {
    for (const auto& ex : spec.few_shot_examples) {
      turns.push_back({"user", ex.text});
      turns.push_back({"assistant", render_answer(ex, is_explain(spec.mode))});
    }
  }

  auto assemble = [&](std::string user_content) {
    std::vector<backends::Message> messages;
    if (spec.system_slot) messages.push_back({"system", instructions});
    messages.insert(messages.end(), turns.begin(), turns.end());
    messages.push_back({"user", std::move(user_content)});
    if (!spec.system_slot) {
      auto first_user = std::find_if(messages.begin(), messages.end(),
                                     [](const backends::Message& m) { return m.role == "user"; });
      first_user->content = instructions + "\n\n" + first_user->content;
    }
    return messages;
  };

  if (!has_evidence) return assemble(std::string(text));

  const auto& evidence = *spec.evidence;
  std::size_t count = evidence.size();
  auto messages = assemble(with_evidence(text, spec.evidence_separator, evidence, count));
  if (spec.token_budget) {
    while (count > 0 && total_tokens(messages) > *spec.token_budget) {
      --count;
      messages = assemble(with_evidence(text, spec.evidence_separator, evidence, count));
    }
  }
  return messages;
}

std::string_view canonical_label(bool factual) noexcept {
  return factual ? "Factual" : "Not Factual";
}

bool parse_llm_verdict(std::string_view raw, bool explain_mode) {
  std::string s = lower(text::normalize_whitespace(raw));
  if (explain_mode) {
    const auto pos = s.rfind("## label:");
    if (pos == std::string::npos) throw UnparseableVerdict("no '## LABEL:' line in reply");
    s = s.substr(pos + 9);
  }
  if (contains_word(s, "not factual")) return false;
  if (contains_word(s, "factual")) return true;
  throw UnparseableVerdict("reply names neither \"Factual\" nor \"Not Factual\"");
}

const char* to_string(Task task) noexcept { return task == Task::kTask1 ? "task1" : "task2"; }

std::vector<BenchmarkItem> items_from(const std::vector<dataset::Task1Instance>& instances) {
  std::vector<BenchmarkItem> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& in = instances[i];
    std::string id = in.record_id.empty() ? std::to_string(i)
                                          : in.record_id + (in.label ? "#F" : "#U");
    out.push_back({std::move(id), in.text, std::nullopt, in.label});
  }
  return out;
}

std::vector<BenchmarkItem> items_from(const std::vector<dataset::Task2Instance>& instances) {
  std::vector<BenchmarkItem> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& in = instances[i];
    std::string id = in.record_id.empty() ? std::to_string(i)
                                          : in.record_id + (in.label ? "#true" : "#false");
    out.push_back({std::move(id), in.claim, in.evidence, in.label});
  }
  return out;
}

EvalReport run_benchmark(Task task, const VerdictFn& system, const std::vector<BenchmarkItem>& items,
                         std::span<const std::uint64_t> seeds, std::size_t workers) {
  if (items.empty()) throw InvalidArgument("benchmark needs at least one instance");
  if (seeds.empty()) throw InvalidArgument("benchmark needs at least one seed");
  const bool has_true = std::any_of(items.begin(), items.end(), [](auto& i) { return i.label; });
  const bool has_false = std::any_of(items.begin(), items.end(), [](auto& i) { return !i.label; });
  if (!has_true || !has_false) {
    throw MetricUndefined("balanced accuracy is undefined: instances contain a single label");
  }

  const auto started = std::chrono::steady_clock::now();
  EvalReport report;
  report.task = task;
  report.n_instances = items.size();

  const std::size_t n = items.size();
  enum class Outcome : char { kOk, kUnparseable, kFailed };
  for (const std::uint64_t seed : seeds) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
    }

    auto predictions = std::make_unique<bool[]>(n);
    auto golds = std::make_unique<bool[]>(n);
    std::vector<Outcome> outcomes(n, Outcome::kOk);
    auto evaluate = [&](std::size_t idx) {
      const auto& item = items[idx];
      golds[idx] = item.label;
      try {
        predictions[idx] = system(item, seed);
      } catch (const UnparseableVerdict&) {
        predictions[idx] = !item.label;
        outcomes[idx] = Outcome::kUnparseable;
      } catch (const std::exception&) {
        predictions[idx] = !item.label;
        outcomes[idx] = Outcome::kFailed;
      }
    };
    const std::size_t w = std::clamp<std::size_t>(workers, 1, n);
    if (w == 1) {
      for (auto idx : order) evaluate(idx);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < n; i = next++) evaluate(order[i]);
        });
      }
    }

    SeedResult r;
    r.seed = seed;
    r.confusion = confusion(std::span<const bool>(predictions.get(), n),
                            std::span<const bool>(golds.get(), n));
    r.recall_true = r.confusion.recall_true();
    r.recall_false = r.confusion.recall_false();
    r.balanced_accuracy = balanced_accuracy(r.confusion);
    r.unparseable = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), Outcome::kUnparseable));
    r.failed = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), Outcome::kFailed));
    report.per_seed.push_back(r);
  }

  const double k = static_cast<double>(report.per_seed.size());
  for (const auto& r : report.per_seed) {
    report.balanced_accuracy += r.balanced_accuracy / k;
    report.recall_true += r.recall_true / k;
    report.recall_false += r.recall_false / k;
  }
  if (report.per_seed.size() > 1) {
    double ss = 0.0;
    for (const auto& r : report.per_seed) {
      ss += (r.balanced_accuracy - report.balanced_accuracy) * (r.balanced_accuracy - report.balanced_accuracy);
    }
    report.stddev = std::sqrt(ss / (k - 1.0));
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

jsonl::json to_json(const EvalReport& report, bool include_runtime) {
  jsonl::json seeds = jsonl::json::array();
  for (const auto& r : report.per_seed) {
    seeds.push_back({{"seed", r.seed},
                     {"balanced_accuracy", r.balanced_accuracy},
                     {"recall_true", r.recall_true},
                     {"recall_false", r.recall_false},
                     {"confusion",
                      {{"tp", r.confusion.true_positive},
                       {"fn", r.confusion.false_negative},
                       {"tn", r.confusion.true_negative},
                       {"fp", r.confusion.false_positive}}},
                     {"unparseable", r.unparseable},
                     {"failed", r.failed}});
  }
  jsonl::json out = {{"task", to_string(report.task)},
                     {"n_instances", report.n_instances},
                     {"balanced_accuracy", report.balanced_accuracy},
                     {"stddev", report.stddev},
                     {"recall_true", report.recall_true},
                     {"recall_false", report.recall_false},
                     {"per_seed", std::move(seeds)}};
  if (include_runtime) out["runtime_seconds"] = report.runtime_seconds;
  return out;
}

}  // namespace oasis::eval
