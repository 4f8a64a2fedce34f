#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "oasis/cli.hpp"

using namespace oasis;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string pages() { return (fx::data_dir() / "fixtures/pipeline/pages.jsonl").string(); }

void write(const fs::path& path, const std::string& content) { jsonl::write_file(path, content); }

}  // namespace

TEST(Cli, IngestWritesPassages) {
  fx::TempDir dir("cli-ingest");
  const auto r = run({"ingest", "--pages", pages(), "--out", (dir / "p.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_FALSE(corpus::read_passages(dir / "p.jsonl").empty());
  EXPECT_NE(r.err.find("[info] ingest:"), std::string::npos);

  const auto quiet = run({"--log-level", "off", "ingest", "--pages", pages(), "--out", (dir / "q.jsonl").string()});
  EXPECT_EQ(quiet.code, cli::kExitOk);
  EXPECT_TRUE(quiet.err.empty());
  EXPECT_EQ(fx::slurp(dir / "p.jsonl"), fx::slurp(dir / "q.jsonl"));
}

TEST(Cli, UsageErrorsExitTwo) {
  auto r = run({"ingest", "--pages", pages(), "--out", "x.jsonl", "--bogus"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u);
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"ingest", "--out", "x.jsonl"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"ingest", "--pages", "/no/such/dir", "--out", "x.jsonl"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--config", "/no/such/config.json", "ingest"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--task", "3", "--instances", pages(), "--report", "r.json"}).code, cli::kExitUsage);
}

TEST(Cli, SingleClassEvalIsADomainError) {
  fx::TempDir dir("cli-eval");
  write(dir / "t1.jsonl",
        "{\"schema\":\"oasis.task1\",\"version\":1,\"split\":\"all\"}\n"
        "{\"text\":\"A.\",\"label\":true,\"origin\":\"F\"}\n"
        "{\"text\":\"B.\",\"label\":true,\"origin\":\"F\"}\n");
  write(dir / "config.json",
        R"({"profiles": {"yes": {"kind": "chat", "mock": "constant", "options": {"response": "Factual"}}}})");
  const auto r = run({"--config", (dir / "config.json").string(), "eval", "--task", "1", "--instances",
                      (dir / "t1.jsonl").string(), "--backend", "yes", "--report", (dir / "r.json").string()});
  EXPECT_EQ(r.code, cli::kExitDomainError);
  EXPECT_NE(r.err.find("undefined"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "r.json"));
}

TEST(Cli, ConstantSystemOnBalancedTaskScoresHalf) {
  fx::TempDir dir("cli-eval2");
  write(dir / "t1.jsonl",
        "{\"text\":\"A.\",\"label\":true,\"origin\":\"F\"}\n"
        "{\"text\":\"B.\",\"label\":false,\"origin\":\"U\"}\n");
  write(dir / "config.json",
        R"({"profiles": {"yes": {"kind": "chat", "mock": "constant", "options": {"response": "Factual"}}}})");
  const auto r = run({"--config", (dir / "config.json").string(), "eval", "--task", "1", "--instances",
                      (dir / "t1.jsonl").string(), "--backend", "yes", "--seeds", "2", "--report",
                      (dir / "r.json").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto report = jsonl::json::parse(fx::slurp(dir / "r.json"));
  EXPECT_EQ(report.at("balanced_accuracy"), 0.5);
  EXPECT_EQ(report.at("per_seed").size(), 2u);
  EXPECT_EQ(report.at("mode"), "zs");
}

TEST(Cli, DryRunHasNoSideEffects) {
  fx::TempDir dir("cli-dry");
  const auto r = run({"--dry-run", "--seed", "9", "ingest", "--pages", pages(), "--out", (dir / "p.jsonl").string(),
                      "--sample"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_FALSE(fs::exists(dir / "p.jsonl"));
  const auto plan = jsonl::json::parse(r.out);
  EXPECT_EQ(plan.at("command"), "ingest");
  EXPECT_EQ(plan.at("seed"), 9);
  EXPECT_EQ(plan.at("sample"), true);
}

TEST(Cli, FlagsOverrideConfig) {
  fx::TempDir dir("cli-config");
  write(dir / "config.json", R"({"run": {"seed": 4}, "ingest": {"window": 3, "stride": 2, "out": "from-config.jsonl"}})");
  const std::string config = (dir / "config.json").string();
  auto r = run({"--config", config, "--dry-run", "ingest", "--pages", pages()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto plan = jsonl::json::parse(r.out);
  EXPECT_EQ(plan.at("window"), 3);
  EXPECT_EQ(plan.at("stride"), 2);
  EXPECT_EQ(plan.at("seed"), 4);
  EXPECT_EQ(plan.at("out"), "from-config.jsonl");

  r = run({"--config", config, "--dry-run", "--seed", "7", "ingest", "--pages", pages(), "--window", "2"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  plan = jsonl::json::parse(r.out);
  EXPECT_EQ(plan.at("window"), 2);
  EXPECT_EQ(plan.at("stride"), 2);
  EXPECT_EQ(plan.at("seed"), 7);
}

TEST(Cli, ConfigRejectsInlineApiKeys) {
  fx::TempDir dir("cli-key");
  write(dir / "config.json", R"({"profiles": {"x": {"kind": "chat", "endpoint": "http://h", "api_key": "sk-1"}}})");
  const auto r = run({"--config", (dir / "config.json").string(), "--dry-run", "ingest", "--pages", pages(), "--out", "o"});
  EXPECT_EQ(r.code, cli::kExitDomainError);
  EXPECT_NE(r.err.find("auth_env"), std::string::npos);
}

TEST(Cli, VerifyReadsStdin) {
  fx::TempDir dir("cli-verify");
  const std::string passages = (dir / "p.jsonl").string();
  const std::string index = (dir / "i.bin").string();
  ASSERT_EQ(run({"ingest", "--pages", pages(), "--out", passages}).code, 0);
  ASSERT_EQ(run({"index", "--passages", passages, "--out", index}).code, 0);
  const auto r = run({"verify", "--text", "-", "--index", index, "--trace", (dir / "t.jsonl").string()},
                     "The Danube is the second-longest river in Europe.");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.out, "factual\n");
  EXPECT_EQ(jsonl::read(dir / "t.jsonl").size(), 1u);
}
