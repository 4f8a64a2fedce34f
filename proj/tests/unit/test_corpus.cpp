#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oasis/corpus.hpp"
#include "oasis/errors.hpp"
#include "oasis/text.hpp"

using namespace oasis;
using namespace oasis::corpus;

namespace {

std::vector<std::string> numbered(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("Sentence " + std::to_string(i) + ".");
  return out;
}

std::vector<std::size_t> starts(const std::vector<Passage>& ps) {
  std::vector<std::size_t> out;
  for (const auto& p : ps) out.push_back(p.start);
  return out;
}

}  // namespace

TEST(SplitSentences, TerminatorDelimited) {
  EXPECT_EQ(split_sentences("A. B. C."), (std::vector<std::string>{"A.", "B.", "C."}));
}

TEST(SplitSentences, AbbreviationGuard) {
  EXPECT_EQ(split_sentences("Dr. Smith arrived. He left."),
            (std::vector<std::string>{"Dr. Smith arrived.", "He left."}));
  EXPECT_EQ(split_sentences("It was e.g. Large. Then it ended."),
            (std::vector<std::string>{"It was e.g. Large.", "Then it ended."}));
}

TEST(SplitSentences, EmptyAndWhitespaceInput) {
  EXPECT_TRUE(split_sentences("").empty());
  EXPECT_TRUE(split_sentences("   \n ").empty());
}

TEST(SplitSentences, QuestionExclamationAndClosers) {
  EXPECT_EQ(split_sentences("Is it? Yes! \"Done.\" Next (here.) End"),
            (std::vector<std::string>{"Is it?", "Yes!", "\"Done.\"", "Next (here.)", "End"}));
}

TEST(SplitSentences, NoSplitInsideNumbersOrBeforeLowercase) {
  EXPECT_EQ(split_sentences("Brazil has 60.5 percent. It is big."),
            (std::vector<std::string>{"Brazil has 60.5 percent.", "It is big."}));
  EXPECT_EQ(split_sentences("See the U.S. army. ok then."),
            (std::vector<std::string>{"See the U.S. army. ok then."}));
}

TEST(SplitSentences, CustomAbbreviationList) {
  SentenceSplitter none(std::vector<std::string>{});
  EXPECT_EQ(none.split("Dr. Smith arrived."), (std::vector<std::string>{"Dr.", "Smith arrived."}));
}

TEST(SplitSentences, ReconstructsContentAndIsDeterministic) {
  std::mt19937_64 rng(7);
  const std::array<std::string, 8> words = {"alpha", "Beta", "gamma", "Dr.", "60%", "(x)", "e.g.", "Zeta"};
  const std::array<std::string, 3> ends = {".", "!", "?"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string input;
    const int sentences = 1 + static_cast<int>(rng() % 6);
    for (int s = 0; s < sentences; ++s) {
      const int n = 1 + static_cast<int>(rng() % 7);
      input += "Start";
      for (int w = 0; w < n; ++w) input += (rng() % 4 == 0 ? "  " : " ") + words[rng() % words.size()];
      input += ends[rng() % ends.size()] + std::string(rng() % 2 ? " " : "\n ");
    }
    const auto out = split_sentences(input);
    EXPECT_EQ(text::normalize_whitespace(text::join(out, " ")), text::normalize_whitespace(input));
    EXPECT_EQ(out, split_sentences(input));
    for (const auto& s : out) EXPECT_EQ(s, text::normalize_whitespace(s));
  }
}

TEST(WindowPassages, SpecExamples) {
  EXPECT_EQ(starts(window_passages("p", numbered(7), {5, 1})), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(window_passages("p", numbered(5), {5, 1}).size(), 1u);
  const auto short_page = window_passages("p", numbered(3), {5, 1});
  ASSERT_EQ(short_page.size(), 1u);
  EXPECT_EQ(short_page[0].sentences.size(), 3u);
  EXPECT_TRUE(window_passages("p", {}, {5, 1}).empty());
}

TEST(WindowPassages, CountFormulaHoldsForAllSmallGeometries) {
  for (std::size_t n = 1; n <= 30; ++n) {
    for (std::size_t k = 1; k <= 8; ++k) {
      for (std::size_t s = 1; s <= 8; ++s) {
        const auto ps = window_passages("p", numbered(n), {k, s});
        const std::size_t expected = n >= k ? (n - k) / s + 1 : 1;
        ASSERT_EQ(ps.size(), expected) << n << " " << k << " " << s;
        for (const auto& p : ps) {
          ASSERT_GE(p.sentences.size(), 1u);
          ASSERT_LE(p.sentences.size(), k);
          ASSERT_EQ(p.passage_id, make_passage_id("p", p.start));
        }
      }
    }
  }
}

TEST(WindowPassages, CoverageWhenStrideDividesRemainder) {
  for (std::size_t n = 1; n <= 25; ++n) {
    for (std::size_t k = 1; k <= 6; ++k) {
      for (std::size_t s = 1; s <= k; ++s) {
        if (n >= k && (n - k) % s != 0) continue;
        std::vector<bool> covered(n, false);
        for (const auto& p : window_passages("p", numbered(n), {k, s})) {
          for (std::size_t i = 0; i < p.sentences.size(); ++i) covered[p.start + i] = true;
        }
        for (std::size_t i = 0; i < n; ++i) ASSERT_TRUE(covered[i]) << n << " " << k << " " << s;
      }
    }
  }
}

TEST(WindowPassages, RejectsZeroGeometry) {
  EXPECT_THROW(window_passages("p", numbered(3), {0, 1}), InvalidArgument);
  EXPECT_THROW(window_passages("p", numbered(3), {1, 0}), InvalidArgument);
}

TEST(Passage, TextIsSpaceJoin) {
  const auto ps = window_passages("p", {"A b.", "C d."}, {5, 1});
  EXPECT_EQ(ps.at(0).text(), "A b. C d.");
}

TEST(SamplePassage, SingleWindowAnySeed) {
  const Page page{"x", "X", "One. Two. Three.", std::nullopt};
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) EXPECT_EQ(sample_passage(page, seed).start, 0u);
}

TEST(SamplePassage, DeterministicForSeed) {
  const Page page{"x", "X", "A one. B two. C three. D four. E five. F six. G seven.", std::nullopt};
  EXPECT_EQ(sample_passage(page, 42), sample_passage(page, 42));
}

TEST(SamplePassage, UniformOverThreeWindows) {
  const Page page{"x", "X", "A one. B two. C three. D four. E five. F six. G seven.", std::nullopt};
  std::array<int, 3> counts{};
  constexpr int kDraws = 10000;
  for (int seed = 0; seed < kDraws; ++seed) ++counts.at(sample_passage(page, seed).start);
  double chi2 = 0.0;
  for (int c : counts) {
    EXPECT_NEAR(c / static_cast<double>(kDraws), 1.0 / 3.0, 0.02);
    const double expected = kDraws / 3.0;
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // 99.9th percentile of chi-square with 2 degrees of freedom.
  EXPECT_LT(chi2, 13.816);
}

TEST(SamplePassage, EmptyPageIsUnusable) {
  const Page page{"x", "X", "   ", std::nullopt};
  EXPECT_THROW(sample_passage(page, 1), UnusablePage);
}

TEST(LoadPages, RecordFileAndDirectory) {
  fx::TempDir dir("pages");
  jsonl::write_file(dir / "pages.jsonl",
                    "{\"page_id\":\"a\",\"title\":\"A\",\"text\":\"One. Two.\"}\n"
                    "{\"page_id\":\"b\",\"title\":\"B\",\"text\":\"Three.\",\"popularity_rank\":4}\n");
  const auto pages = load_pages(dir / "pages.jsonl");
  ASSERT_EQ(pages.size(), 2u);
  EXPECT_EQ(pages[1].popularity_rank, 4);

  std::filesystem::create_directories(dir / "corpus");
  jsonl::write_file(dir / "corpus/zeta.txt", "Raw text here.");
  jsonl::write_file(dir / "corpus/alpha.json", "{\"page_id\":\"al\",\"title\":\"Al\",\"text\":\"Hi.\"}");
  const auto from_dir = load_pages(dir / "corpus");
  ASSERT_EQ(from_dir.size(), 2u);
  EXPECT_EQ(from_dir[0].page_id, "al");
  EXPECT_EQ(from_dir[1].page_id, "zeta");
}

TEST(LoadPages, RejectsDuplicateIdsAndEmptyText) {
  fx::TempDir dir("pages-bad");
  jsonl::write_file(dir / "dup.jsonl",
                    "{\"page_id\":\"a\",\"title\":\"A\",\"text\":\"x.\"}\n"
                    "{\"page_id\":\"a\",\"title\":\"A\",\"text\":\"y.\"}\n");
  EXPECT_THROW(load_pages(dir / "dup.jsonl"), Error);
  jsonl::write_file(dir / "empty.jsonl", "{\"page_id\":\"a\",\"title\":\"A\",\"text\":\"\"}\n");
  EXPECT_THROW(load_pages(dir / "empty.jsonl"), Error);
}

TEST(Passages, FileRoundTripIsByteIdentical) {
  fx::TempDir dir("passages");
  const Page page{"p", "P", "A one. B two. C three. D four. E five. F six.", std::nullopt};
  const auto ps = page_passages(page, {});
  write_passages(dir / "a.jsonl", ps);
  EXPECT_EQ(read_passages(dir / "a.jsonl"), ps);
  write_passages(dir / "b.jsonl", page_passages(page, {}));
  EXPECT_EQ(fx::slurp(dir / "a.jsonl"), fx::slurp(dir / "b.jsonl"));
}
