#include "oasis/cli.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "oasis/backends.hpp"
#include "oasis/corpus.hpp"
#include "oasis/dataset.hpp"
#include "oasis/errors.hpp"
#include "oasis/evalharness.hpp"
#include "oasis/jsonl.hpp"
#include "oasis/retrieval.hpp"
#include "oasis/synthgen.hpp"
#include "oasis/verification.hpp"

namespace oasis::cli {

namespace {

namespace fs = std::filesystem;
using json = jsonl::json;
using backends::BackendKind;

// Settings shared by every subcommand.
struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool dry_run = false;
  std::string log_level = "info";
};

struct IngestArgs {
  std::string pages;
  std::string out;
  std::size_t window = 5;
  std::size_t stride = 1;
  bool sample = false;
};

struct GenerateArgs {
  std::string passages;
  std::string backend;
  int max_retries = 3;
  std::string out;
  std::size_t workers = 1;
};

struct DeriveArgs {
  std::string records;
  std::string what;
  std::string out;
  std::string split = "all";
  double ratio = 0.9;
  std::string passages;
  std::string backend = "mock";
};

struct IndexArgs {
  std::string passages;
  std::string backend = "mock";
  std::string out;
  std::size_t batch_size = 32;
  std::size_t workers = 1;
  bool no_dedup = false;
};

struct VerifyArgs {
  std::string text;
  std::string index;
  std::vector<std::string> backends{"mock"};
  std::size_t k = 30;
  std::string trace;
  std::string out;
  std::size_t workers = 1;
};

struct EvalArgs {
  int task = 1;
  std::string mode = "zs";
  std::string instances;
  std::string backend;
  std::size_t seeds = 5;
  std::string report;
  std::string system = "llm";
  std::string index;
  std::vector<std::string> backends{"mock"};
  std::string few_shot;
  std::size_t token_budget = 0;
  std::size_t k = 30;
  std::string separator = "\n\nEvidence:\n";
  bool record_runtime = false;
  std::size_t workers = 1;
};

// --config is needed before the parser is built, since config values become
// option defaults (flags then override them).
std::optional<std::string> scan_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

std::string config_value_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Keys in `section` whose name matches an option's long name (dashes as
// underscores or not) become that option's default.
void apply_config(CLI::App& app, const json& section) {
  if (!section.is_object()) return;
  for (CLI::Option* opt : app.get_options()) {
    for (const auto& lname : opt->get_lnames()) {
      std::string key = lname;
      std::replace(key.begin(), key.end(), '-', '_');
      const json* v = nullptr;
      if (auto it = section.find(key); it != section.end()) v = &*it;
      else if (auto it2 = section.find(lname); it2 != section.end()) v = &*it2;
      if (!v) continue;
      if (v->is_array()) {
        std::string joined;
        for (const auto& e : *v) joined += (joined.empty() ? "" : ",") + config_value_string(e);
        opt->default_str(joined);
        opt->required(false);
        opt->add_result(joined);
        opt->run_callback();
        opt->clear();
      } else {
        opt->default_val(config_value_string(*v));
        opt->required(false);
      }
    }
  }
}

std::vector<json> data_rows(const fs::path& path) {
  std::vector<json> rows;
  for (auto& row : jsonl::read(path)) {
    if (row.is_object() && row.contains("schema")) continue;
    rows.push_back(std::move(row));
  }
  return rows;
}

json header(const std::string& schema) { return {{"schema", schema}, {"version", 1}}; }

std::string read_text_arg(const std::string& arg, std::istream& in) {
  if (arg == "-") return std::string(std::istreambuf_iterator<char>(in), {});
  return jsonl::read_file(arg);
}

void require_file(const std::string& path, const char* flag) {
  if (!path.empty() && !fs::exists(path)) {
    throw CLI::ValidationError(flag, "file does not exist: " + path);
  }
}

// Runs fn(i) for i in [0, n) on up to `workers` threads, rethrowing the first
// failure in index order.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t w = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < w; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) guarded(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct PipelineBackends {
  std::unique_ptr<backends::EmbeddingBackend> embedder;
  std::unique_ptr<backends::NliBackend> nli;
  std::unique_ptr<backends::ChatBackend> chat;
};

// Sorts the named profiles into roles by kind. "mock" fills the embedding
// and NLI roles when they are still empty.
std::map<std::string, std::string> assign_roles(const backends::ProfileRegistry& registry,
                                                const std::vector<std::string>& names) {
  std::map<std::string, std::string> roles;
  auto claim = [&](const std::string& role, const std::string& name) {
    if (roles.count(role)) {
      throw InvalidArgument("two " + role + " backends given: '" + roles[role] + "' and '" + name + "'");
    }
    roles[role] = name;
  };
  for (const auto& name : names) {
    if (const auto* p = registry.find(name)) {
      claim(backends::to_string(p->kind), name);
    } else if (name == "mock") {
      if (!roles.count("embedding")) roles["embedding"] = name;
      if (!roles.count("nli")) roles["nli"] = name;
    } else {
      throw InvalidArgument("unknown backend profile '" + name + "'");
    }
  }
  return roles;
}

PipelineBackends make_pipeline(const backends::ProfileRegistry& registry,
                               const std::map<std::string, std::string>& roles, bool need_nli) {
  PipelineBackends b;
  auto it = roles.find("embedding");
  if (it == roles.end()) throw InvalidArgument("no embedding backend among --backends");
  b.embedder = backends::make_embedding_backend(registry.resolve(it->second, BackendKind::kEmbedding));
  if (need_nli) {
    it = roles.find("nli");
    if (it == roles.end()) throw InvalidArgument("no NLI backend among --backends");
    b.nli = backends::make_nli_backend(registry.resolve(it->second, BackendKind::kNli));
  }
  if (it = roles.find("chat"); it != roles.end()) {
    b.chat = backends::make_chat_backend(registry.resolve(it->second, BackendKind::kChat));
  }
  return b;
}

json roles_json(const std::map<std::string, std::string>& roles) {
  json out = json::object();
  for (const auto& [role, name] : roles) out[role] = name;
  return out;
}

void print_plan(std::ostream& out, json plan) { out << plan.dump(2) << "\n"; }

// --- subcommands -------------------------------------------------------------

int do_ingest(const Globals& g, const IngestArgs& a, std::ostream& out) {
  if (g.dry_run) {
    print_plan(out, {{"command", "ingest"},
                     {"pages", a.pages},
                     {"out", a.out},
                     {"window", a.window},
                     {"stride", a.stride},
                     {"sample", a.sample},
                     {"seed", g.seed}});
    return kExitOk;
  }
  const auto pages = corpus::load_pages(a.pages);
  const corpus::WindowSpec spec{a.window, a.stride};
  const corpus::SentenceSplitter splitter;
  std::vector<std::vector<corpus::Passage>> per_page(pages.size());
  std::size_t unusable = 0;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (a.sample) {
      try {
        per_page[i].push_back(corpus::sample_passage(pages[i], g.seed, spec, splitter));
      } catch (const UnusablePage& e) {
        spdlog::warn("skipping page '{}': {}", pages[i].page_id, e.what());
        ++unusable;
      }
    } else {
      per_page[i] = corpus::page_passages(pages[i], spec, splitter);
    }
  }
  std::vector<corpus::Passage> passages;
  for (auto& v : per_page) std::move(v.begin(), v.end(), std::back_inserter(passages));
  corpus::write_passages(a.out, passages);
  spdlog::info("ingest: {} pages -> {} passages ({} unusable)", pages.size(), passages.size(), unusable);
  return kExitOk;
}

int do_generate(const Globals& g, const GenerateArgs& a, const backends::ProfileRegistry& registry,
                std::ostream& out) {
  const auto profile = registry.resolve(a.backend, BackendKind::kChat);
  if (g.dry_run) {
    print_plan(out, {{"command", "generate"},
                     {"passages", a.passages},
                     {"backend", a.backend},
                     {"max_retries", a.max_retries},
                     {"out", a.out},
                     {"workers", a.workers}});
    return kExitOk;
  }
  if (a.max_retries < 0) throw InvalidArgument("--max-retries must be >= 0");
  const auto passages = corpus::read_passages(a.passages);
  auto chat = backends::make_chat_backend(profile);
  std::vector<std::optional<synthgen::ResourceRecord>> results(passages.size());
  parallel_for(passages.size(), a.workers, [&](std::size_t i) {
    try {
      results[i] = synthgen::generate_record(passages[i], *chat, a.max_retries);
    } catch (const ExhaustedRetries& e) {
      spdlog::warn("dropping passage '{}': {}", passages[i].passage_id, e.what());
    }
  });
  std::vector<synthgen::ResourceRecord> records;
  for (auto& r : results) {
    if (r) records.push_back(std::move(*r));
  }
  synthgen::write_records(a.out, records);
  spdlog::info("generate: {} passages -> {} records", passages.size(), records.size());
  return kExitOk;
}

int do_derive(const Globals& g, const DeriveArgs& a, const backends::ProfileRegistry& registry,
              std::ostream& out) {
  const bool mine = a.what == "nli" && !a.passages.empty();
  if (mine) registry.resolve(a.backend, BackendKind::kNli);
  if (g.dry_run) {
    print_plan(out, {{"command", "derive"},
                     {"records", a.records},
                     {"what", a.what},
                     {"out", a.out},
                     {"split", a.split},
                     {"ratio", a.ratio},
                     {"seed", g.seed},
                     {"neutral_passages", a.passages},
                     {"backend", mine ? json(a.backend) : json(nullptr)}});
    return kExitOk;
  }
  const auto all = synthgen::read_records(a.records);
  std::vector<synthgen::ResourceRecord> usable;
  for (const auto& r : all) {
    if (r.validation.usable() && r.falsified_index()) {
      usable.push_back(r);
    } else {
      spdlog::warn("skipping unusable record '{}'", r.record_id);
    }
  }
  std::vector<synthgen::ResourceRecord> selected;
  if (a.split == "all") {
    selected = std::move(usable);
  } else {
    auto split = dataset::split_train_val(usable, a.ratio, g.seed);
    selected = a.split == "train" ? std::move(split.train) : std::move(split.validation);
  }

  json head = header("oasis." + a.what);
  head["split"] = a.split;
  if (a.split != "all") {
    head["ratio"] = a.ratio;
    head["seed"] = g.seed;
  }
  std::vector<json> rows;
  if (a.what == "retriever") {
    for (const auto& r : selected) {
      for (const auto& p : dataset::derive_retriever_pairs(r)) rows.push_back(dataset::to_json(p));
    }
  } else if (a.what == "nli") {
    std::map<std::string, std::vector<corpus::Passage>> by_page;
    std::unique_ptr<backends::NliBackend> nli;
    if (mine) {
      for (auto& p : corpus::read_passages(a.passages)) by_page[p.page_id].push_back(std::move(p));
      nli = backends::make_nli_backend(registry.resolve(a.backend, BackendKind::kNli));
    }
    json without = json::array();
    for (const auto& r : selected) {
      std::optional<std::vector<std::string>> neutral;
      if (mine) {
        const auto& page = by_page[r.passage.page_id];
        neutral = dataset::mine_neutral_premises(r, page, *nli);
      }
      if (!neutral) without.push_back(r.record_id);
      for (const auto& t : dataset::derive_nli_triplets(r, neutral)) rows.push_back(dataset::to_json(t));
    }
    head["neutral_premises"] = mine;
    head["records_without_neutrals"] = std::move(without);
  } else if (a.what == "task1") {
    for (const auto& i : dataset::build_task1(selected)) rows.push_back(dataset::to_json(i));
  } else {
    for (const auto& i : dataset::build_task2(selected)) rows.push_back(dataset::to_json(i));
  }
  rows.insert(rows.begin(), std::move(head));
  jsonl::write(a.out, rows);
  spdlog::info("derive {}: {} records -> {} rows", a.what, selected.size(), rows.size() - 1);
  return kExitOk;
}

int do_index(const Globals& g, const IndexArgs& a, const backends::ProfileRegistry& registry,
             std::ostream& out) {
  const auto profile = registry.resolve(a.backend, BackendKind::kEmbedding);
  if (g.dry_run) {
    print_plan(out, {{"command", "index"},
                     {"passages", a.passages},
                     {"backend", a.backend},
                     {"out", a.out},
                     {"batch_size", a.batch_size},
                     {"workers", a.workers},
                     {"dedup_texts", !a.no_dedup}});
    return kExitOk;
  }
  const auto passages = corpus::read_passages(a.passages);
  auto embedder = backends::make_embedding_backend(profile);
  const auto index = retrieval::index_build(passages, *embedder, {a.batch_size, a.workers, !a.no_dedup});
  retrieval::save_index(a.out, index);
  spdlog::info("index: {} passages, dimension {}", index.size(), index.dimension());
  return kExitOk;
}

int do_verify(const Globals& g, const VerifyArgs& a, const backends::ProfileRegistry& registry,
              std::istream& in, std::ostream& out) {
  const auto roles = assign_roles(registry, a.backends);
  if (g.dry_run) {
    print_plan(out, {{"command", "verify"},
                     {"text", a.text},
                     {"index", a.index},
                     {"backends", roles_json(roles)},
                     {"extractor", roles.count("chat") ? "chat" : "sentences"},
                     {"k", a.k},
                     {"trace", a.trace},
                     {"out", a.out}});
    return kExitOk;
  }
  const std::string text = read_text_arg(a.text, in);
  const auto index = retrieval::load_index(a.index);
  auto b = make_pipeline(registry, roles, true);
  std::unique_ptr<verification::ClaimExtractor> extractor;
  if (b.chat) {
    extractor = std::make_unique<verification::ChatClaimExtractor>(*b.chat);
  } else {
    extractor = std::make_unique<verification::SentenceClaimExtractor>();
  }
  const auto verdict =
      verification::verify_text(text, *extractor, index, *b.embedder, *b.nli, {a.k, a.workers});
  if (!a.trace.empty()) {
    std::vector<json> rows;
    for (const auto& t : verdict.claim_traces) rows.push_back(verification::to_json(t));
    jsonl::write(a.trace, rows);
  }
  if (!a.out.empty()) {
    jsonl::write_file(a.out, json{{"factual", verdict.factual},
                                  {"claims", verdict.claim_traces.size()}}.dump(2) + "\n");
  }
  out << (verdict.factual ? "factual" : "unfactual") << "\n";
  return kExitOk;
}

std::vector<eval::FewShotExample> load_few_shot(const std::string& path) {
  std::vector<eval::FewShotExample> out;
  for (const auto& row : data_rows(path)) {
    eval::FewShotExample ex;
    ex.text = jsonl::string_field(row, "text");
    const auto& label = jsonl::field(row, "label");
    if (!label.is_boolean()) throw FormatError("few-shot field 'label' must be a boolean");
    ex.label = label.get<bool>();
    ex.explanation = row.value("explanation", "");
    out.push_back(std::move(ex));
  }
  return out;
}

int do_eval(const Globals& g, const EvalArgs& a, const backends::ProfileRegistry& registry,
            std::ostream& out) {
  const auto mode = eval::parse_prompt_mode(a.mode);
  const auto task = a.task == 1 ? eval::Task::kTask1 : eval::Task::kTask2;
  const bool pipeline = a.system == "pipeline";
  const bool retrieve = !pipeline && task == eval::Task::kTask1 && mode == eval::PromptMode::kRag;
  std::map<std::string, std::string> roles;
  if (pipeline || retrieve) roles = assign_roles(registry, a.backends);
  if (!pipeline) {
    if (a.backend.empty()) throw CLI::ValidationError("--backend", "required for --system llm");
    registry.resolve(a.backend, BackendKind::kChat);
  }
  if ((retrieve || (pipeline && task == eval::Task::kTask1)) && a.index.empty()) {
    throw CLI::ValidationError("--index", "required for retrieval");
  }
  std::vector<std::uint64_t> seeds(a.seeds);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = g.seed + i;

  if (g.dry_run) {
    json plan = {{"command", "eval"},
                 {"task", a.task},
                 {"mode", a.mode},
                 {"system", a.system},
                 {"instances", a.instances},
                 {"seeds", seeds},
                 {"report", a.report},
                 {"workers", a.workers}};
    if (!pipeline) plan["backend"] = a.backend;
    if (!roles.empty()) plan["backends"] = roles_json(roles);
    if (!a.index.empty()) plan["index"] = a.index;
    if (retrieve || pipeline) plan["k"] = a.k;
    if (a.token_budget) plan["token_budget"] = a.token_budget;
    print_plan(out, std::move(plan));
    return kExitOk;
  }

  std::vector<eval::BenchmarkItem> items;
  if (task == eval::Task::kTask1) {
    std::vector<dataset::Task1Instance> instances;
    for (const auto& row : data_rows(a.instances)) instances.push_back(dataset::task1_from_json(row));
    items = eval::items_from(instances);
  } else {
    std::vector<dataset::Task2Instance> instances;
    for (const auto& row : data_rows(a.instances)) instances.push_back(dataset::task2_from_json(row));
    items = eval::items_from(instances);
  }

  PipelineBackends b;
  if (pipeline || retrieve) b = make_pipeline(registry, roles, pipeline);
  std::optional<retrieval::PassageIndex> index;
  if (!a.index.empty()) index = retrieval::load_index(a.index);

  eval::VerdictFn system;
  std::unique_ptr<backends::ChatBackend> chat;
  std::unique_ptr<verification::ClaimExtractor> extractor;
  std::vector<std::vector<std::string>> retrieved;
  eval::PromptSpec base;

  if (pipeline) {
    if (b.chat) {
      extractor = std::make_unique<verification::ChatClaimExtractor>(*b.chat);
    } else {
      extractor = std::make_unique<verification::SentenceClaimExtractor>();
    }
    system = [&](const eval::BenchmarkItem& item, std::uint64_t) {
      if (item.evidence) {
        const verification::EvidencePassage ev{"evidence", *item.evidence};
        return verification::verify_claim(item.text, std::span(&ev, 1), *b.nli).decision;
      }
      return verification::verify_text(item.text, *extractor, *index, *b.embedder, *b.nli, {a.k, 1})
          .factual;
    };
  } else {
    chat = backends::make_chat_backend(registry.resolve(a.backend, BackendKind::kChat));
    base.mode = mode;
    base.evidence_separator = a.separator;
    base.system_slot = chat->supports_system_prompt();
    if (a.token_budget) base.token_budget = a.token_budget;
    if (!a.few_shot.empty()) base.few_shot_examples = load_few_shot(a.few_shot);
    if (retrieve) {
      retrieved.resize(items.size());
      parallel_for(items.size(), a.workers, [&](std::size_t i) {
        const auto ranked = retrieval::top_k(*index, b.embedder->embed_one(items[i].text), a.k);
        for (const auto& ev : verification::evidence_for(*index, ranked)) retrieved[i].push_back(ev.text);
      });
    }
    system = [&](const eval::BenchmarkItem& item, std::uint64_t) {
      eval::PromptSpec spec = base;
      if (item.evidence) {
        spec.evidence = std::vector<std::string>{*item.evidence};
      } else if (retrieve) {
        spec.evidence = retrieved[static_cast<std::size_t>(&item - items.data())];
      }
      const auto messages = eval::build_prompt(spec, item.text);
      return eval::parse_llm_verdict(chat->chat(messages), eval::is_explain(mode));
    };
  }

  const auto report = eval::run_benchmark(task, system, items, seeds, a.workers);
  json doc = eval::to_json(report, a.record_runtime);
  doc["mode"] = a.mode;
  doc["system"] = a.system;
  doc["seeds"] = seeds;
  jsonl::write_file(a.report, doc.dump(2) + "\n");
  std::size_t unparseable = 0;
  std::size_t failed = 0;
  for (const auto& s : report.per_seed) {
    unparseable += s.unparseable;
    failed += s.failed;
  }
  spdlog::info("eval: balanced accuracy {:.4f} +/- {:.4f} over {} seeds ({} unparseable, {} failed)",
               report.balanced_accuracy, report.stddev, seeds.size(), unparseable, failed);
  return kExitOk;
}

// Routes spdlog to `err` for the duration of one run.
class LogScope {
 public:
  explicit LogScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("oasis", std::move(sink));
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(std::move(logger));
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  LogScope log_scope(err);

  json config = json::object();
  backends::ProfileRegistry registry;
  if (auto path = scan_config_path(args)) {
    try {
      if (!fs::exists(*path)) {
        err << "error: config file does not exist: " << *path << "\n";
        return kExitUsage;
      }
      config = json::parse(jsonl::read_file(*path));
      registry = backends::ProfileRegistry::from_json(config, fs::path(*path).parent_path());
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitDomainError;
    }
  }

  Globals g;
  CLI::App app{"LLM-Oasis resource construction and fact-checking toolkit", "oasis"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", g.config_path, "JSON file with backend profiles and run settings");
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_flag("--dry-run", g.dry_run, "Print the resolved plan and exit without side effects");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Split pages into sentence-window passages");
  ingest_cmd->add_option("--pages", ingest.pages, "Page directory or line-delimited page file")
      ->required()
      ->check(CLI::ExistingPath);
  ingest_cmd->add_option("--out", ingest.out, "Passage file to write")->required();
  ingest_cmd->add_option("--window,-K", ingest.window, "Sentences per passage")->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--stride,-s", ingest.stride, "Window stride")->check(CLI::PositiveNumber);
  ingest_cmd->add_flag("--sample", ingest.sample, "Keep one seeded random passage per page");

  GenerateArgs generate;
  auto* generate_cmd = app.add_subcommand("generate", "Run the four-step generation over passages");
  generate_cmd->add_option("--passages", generate.passages, "Passage file")
      ->required()
      ->check(CLI::ExistingFile);
  generate_cmd->add_option("--backend", generate.backend, "Chat profile")->required();
  generate_cmd->add_option("--max-retries", generate.max_retries, "Retries per passage")
      ->check(CLI::NonNegativeNumber);
  generate_cmd->add_option("--out", generate.out, "Record file to write")->required();
  generate_cmd->add_option("--workers", generate.workers, "Passages processed concurrently")
      ->check(CLI::PositiveNumber);

  DeriveArgs derive;
  auto* derive_cmd = app.add_subcommand("derive", "Derive training and benchmark sets from records");
  derive_cmd->add_option("--records", derive.records, "Record file")->required()->check(CLI::ExistingFile);
  derive_cmd->add_option("--what", derive.what, "retriever, nli, task1 or task2")
      ->required()
      ->check(CLI::IsMember({"retriever", "nli", "task1", "task2"}));
  derive_cmd->add_option("--out", derive.out, "Output file")->required();
  derive_cmd->add_option("--split", derive.split, "all, train or val")
      ->check(CLI::IsMember({"all", "train", "val"}));
  derive_cmd->add_option("--ratio", derive.ratio, "Train fraction for --split")
      ->check(CLI::Range(0.0, 1.0));
  derive_cmd->add_option("--passages", derive.passages, "Passages to mine neutral premises from (nli)")
      ->check(CLI::ExistingFile);
  derive_cmd->add_option("--backend", derive.backend, "NLI profile used for neutral mining");

  IndexArgs index;
  auto* index_cmd = app.add_subcommand("index", "Embed passages into a dense index");
  index_cmd->add_option("--passages", index.passages, "Passage file")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--backend", index.backend, "Embedding profile");
  index_cmd->add_option("--out", index.out, "Index file to write")->required();
  index_cmd->add_option("--batch-size", index.batch_size, "Texts per embedding request")
      ->check(CLI::PositiveNumber);
  index_cmd->add_option("--workers", index.workers, "Concurrent embedding requests")
      ->check(CLI::PositiveNumber);
  index_cmd->add_flag("--no-dedup", index.no_dedup, "Keep passages with repeated text");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Fact-check a text against an index");
  verify_cmd->add_option("--text", verify.text, "Text file, or - for standard input")->required();
  verify_cmd->add_option("--index", verify.index, "Index file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--backends", verify.backends, "Embedding, NLI and optional chat profiles")
      ->delimiter(',');
  verify_cmd->add_option("--k", verify.k, "Evidence passages per claim")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--trace", verify.trace, "Per-claim decision records");
  verify_cmd->add_option("--out", verify.out, "Verdict file");
  verify_cmd->add_option("--workers", verify.workers, "Claims verified concurrently")
      ->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a system on a benchmark task");
  eval_cmd->add_option("--task", ev.task, "1 (end-to-end) or 2 (claim with evidence)")
      ->required()
      ->check(CLI::IsMember({1, 2}));
  eval_cmd->add_option("--mode", ev.mode, "zs, fs, zs_ex, fs_ex or rag")
      ->check(CLI::IsMember({"zs", "fs", "zs_ex", "fs_ex", "rag"}));
  eval_cmd->add_option("--instances", ev.instances, "Instance file from derive")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--backend", ev.backend, "Chat profile (llm system)");
  eval_cmd->add_option("--seeds", ev.seeds, "Number of seeded runs")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--report", ev.report, "Report file to write")->required();
  eval_cmd->add_option("--system", ev.system, "llm or pipeline")->check(CLI::IsMember({"llm", "pipeline"}));
  eval_cmd->add_option("--index", ev.index, "Index for retrieval")->check(CLI::ExistingFile);
  eval_cmd->add_option("--backends", ev.backends, "Pipeline or retrieval profiles")->delimiter(',');
  eval_cmd->add_option("--few-shot", ev.few_shot, "Few-shot example file")->check(CLI::ExistingFile);
  eval_cmd->add_option("--token-budget", ev.token_budget, "Approximate prompt token budget");
  eval_cmd->add_option("--k", ev.k, "Passages retrieved per text")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--separator", ev.separator, "Inserted between a text and its evidence");
  eval_cmd->add_flag("--record-runtime", ev.record_runtime, "Include wall-clock runtime in the report");
  eval_cmd->add_option("--workers", ev.workers, "Instances evaluated concurrently")
      ->check(CLI::PositiveNumber);

  CLI::App* active = nullptr;
  try {
    apply_config(app, config.value("run", json::object()));
    for (CLI::App* sub : app.get_subcommands({})) {
      apply_config(*sub, config.value("run", json::object()));
      apply_config(*sub, config.value(sub->get_name(), json::object()));
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    active = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
    if (active == verify_cmd && verify.text != "-") require_file(verify.text, "--text");
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitUsage;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  try {
    if (active == ingest_cmd) return do_ingest(g, ingest, out);
    if (active == generate_cmd) return do_generate(g, generate, registry, out);
    if (active == derive_cmd) return do_derive(g, derive, registry, out);
    if (active == index_cmd) return do_index(g, index, registry, out);
    if (active == verify_cmd) return do_verify(g, verify, registry, in, out);
    if (active == eval_cmd) return do_eval(g, ev, registry, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << active->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitDomainError;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace oasis::cli
