#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oasis/backends.hpp"
#include "oasis/dataset.hpp"
#include "oasis/jsonl.hpp"
#include "oasis/metrics.hpp"

namespace oasis::eval {

enum class PromptMode { kZeroShot, kFewShot, kZeroShotExplain, kFewShotExplain, kRag };

const char* to_string(PromptMode mode) noexcept;
/// Accepts zs, fs, zs_ex, fs_ex, rag.
PromptMode parse_prompt_mode(std::string_view s);

bool is_explain(PromptMode mode) noexcept;
bool is_few_shot(PromptMode mode) noexcept;

struct FewShotExample {
  std::string text;
  bool label = true;
  /// Used as the reasoning part of the answer in explain modes.
  std::string explanation;
};

struct PromptSpec {
  PromptMode mode = PromptMode::kZeroShot;
  std::vector<FewShotExample> few_shot_examples;
  /// Ranked evidence passages, best first.
  std::optional<std::vector<std::string>> evidence;
  /// Approximate budget for the whole message sequence (characters / 4).
  std::optional<std::size_t> token_budget;
  /// Inserted between the text and its evidence.
  std::string evidence_separator = "\n\nEvidence:\n";
  /// Put instructions in a system message; otherwise they prefix the first
  /// user message.
  bool system_slot = true;
};

/// Instruction blocks, verbatim.
std::string_view zero_shot_instructions() noexcept;
std::string_view rag_instructions() noexcept;
std::string_view explain_instructions() noexcept;

std::size_t approximate_tokens(std::string_view s) noexcept;

/// Message sequence for one text. Evidence (when present) selects the
/// evidence-aware instructions and is appended after the text and the
/// separator, dropping lowest-ranked passages first to honour the budget.
/// Throws InvalidArgument for RAG without evidence or few-shot without
/// examples.
std::vector<backends::Message> build_prompt(const PromptSpec& spec, std::string_view text);

/// "Factual" / "Not Factual".
std::string_view canonical_label(bool factual) noexcept;

/// "not factual" takes precedence over "factual" (case-insensitive). In
/// explain mode only the text after the last "## LABEL:" is inspected.
/// Throws UnparseableVerdict when no label is found.
bool parse_llm_verdict(std::string_view raw, bool explain_mode);

enum class Task { kTask1, kTask2 };

const char* to_string(Task task) noexcept;

/// A benchmark item: the text to judge (task 1) or the claim plus its
/// evidence (task 2).
struct BenchmarkItem {
  std::string id;
  std::string text;
  std::optional<std::string> evidence;
  bool label = true;
};

std::vector<BenchmarkItem> items_from(const std::vector<dataset::Task1Instance>& instances);
std::vector<BenchmarkItem> items_from(const std::vector<dataset::Task2Instance>& instances);

/// Returns true for "factual". May throw; UnparseableVerdict is tallied
/// separately from other failures, and both count as wrong answers.
using VerdictFn = std::function<bool(const BenchmarkItem& item, std::uint64_t seed)>;

struct SeedResult {
  std::uint64_t seed = 0;
  double balanced_accuracy = 0.0;
  double recall_true = 0.0;
  double recall_false = 0.0;
  Confusion confusion;
  std::size_t unparseable = 0;
  std::size_t failed = 0;
};

struct EvalReport {
  Task task = Task::kTask1;
  std::size_t n_instances = 0;
  double balanced_accuracy = 0.0;  // mean over seeds
  double stddev = 0.0;             // sample standard deviation over seeds
  double recall_true = 0.0;
  double recall_false = 0.0;
  std::vector<SeedResult> per_seed;
  double runtime_seconds = 0.0;
};

/// Runs `system` over every item once per seed (items visited in a seeded
/// order) and aggregates mean and standard deviation of balanced accuracy.
/// Throws MetricUndefined unless both labels are present.
EvalReport run_benchmark(Task task, const VerdictFn& system, const std::vector<BenchmarkItem>& items,
                         std::span<const std::uint64_t> seeds, std::size_t workers = 1);

/// Structured report. Runtime is wall-clock and therefore only included on
/// request, so default reports are reproducible byte for byte.
jsonl::json to_json(const EvalReport& report, bool include_runtime = false);

}  // namespace oasis::eval
