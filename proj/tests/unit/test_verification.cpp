#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"
#include "oasis/errors.hpp"
#include "oasis/verification.hpp"

using namespace oasis;
using namespace oasis::verification;

namespace {

// Returns a fixed label per premise; premises starting with "boom" fail.
class LabelNli final : public backends::NliBackend {
 public:
  LabelNli() : NliBackend(4) {}
  std::map<std::string, NliLabel> labels;
  int calls = 0;

 protected:
  NliDistribution do_nli(std::string_view premise, std::string_view, const std::string& fp) override {
    ++calls;
    if (premise.starts_with("boom")) throw BackendError(BackendErrorKind::kTimeout, fp, "simulated");
    switch (labels.at(std::string(premise))) {
      case NliLabel::kEntailment:
        return backends::RuleNliBackend::kEntails;
      case NliLabel::kContradiction:
        return backends::RuleNliBackend::kContradicts;
      default:
        return backends::RuleNliBackend::kNeutral;
    }
  }
};

std::vector<EvidencePassage> evidence_with(LabelNli& nli, const std::vector<NliLabel>& seq) {
  std::vector<EvidencePassage> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const std::string text = "passage " + std::to_string(i);
    nli.labels[text] = seq[i];
    out.push_back({"p" + std::to_string(i), text});
  }
  return out;
}

constexpr NliLabel E = NliLabel::kEntailment;
constexpr NliLabel N = NliLabel::kNeutral;
constexpr NliLabel C = NliLabel::kContradiction;

}  // namespace

TEST(VerifyClaim, FirstDecisiveLabelWins) {
  struct Case {
    std::vector<NliLabel> seq;
    bool decision;
    std::size_t rank;
  };
  const std::vector<Case> cases = {
      {{N, N, E, C}, true, 3}, {{N, C, E}, false, 2}, {{N, N, N}, true, 3},
      {{C}, false, 1},         {{E, C, C}, true, 1},
  };
  for (const auto& c : cases) {
    LabelNli nli;
    const auto ev = evidence_with(nli, c.seq);
    const auto t = verify_claim("claim", ev, nli);
    EXPECT_EQ(t.decision, c.decision);
    EXPECT_EQ(t.rank_examined, c.rank);
    EXPECT_EQ(nli.calls, static_cast<int>(c.rank));  // stops early
  }
}

TEST(VerifyClaim, EmptyEvidenceVerifies) {
  LabelNli nli;
  const auto t = verify_claim("claim", {}, nli);
  EXPECT_TRUE(t.decision);
  EXPECT_FALSE(t.deciding_passage_id);
  EXPECT_EQ(t.rank_examined, 0u);
}

TEST(VerifyClaim, AllLabelSequencesAgainstOracle) {
  for (std::size_t k = 0; k <= 6; ++k) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < k; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<NliLabel> seq;
      for (std::size_t i = 0, c = code; i < k; ++i, c /= 3) seq.push_back(std::array{E, N, C}[c % 3]);
      // Oracle: the claim is false iff a CONTR occurs before any ENT.
      bool expected = true;
      std::optional<std::string> decider;
      for (std::size_t i = 0; i < k; ++i) {
        if (seq[i] == N) continue;
        expected = seq[i] == E;
        decider = "p" + std::to_string(i);
        break;
      }
      LabelNli nli;
      const auto ev = evidence_with(nli, seq);
      const auto t = verify_claim("claim", ev, nli);
      ASSERT_EQ(t.decision, expected);
      ASSERT_EQ(t.deciding_passage_id, decider);
    }
  }
}

TEST(VerifyClaim, BackendErrorNamesTheRank) {
  LabelNli nli;
  auto ev = evidence_with(nli, {N, N});
  ev.push_back({"p2", "boom here"});
  try {
    verify_claim("claim", ev, nli);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kTimeout);
    EXPECT_NE(std::string(e.what()).find("rank 3"), std::string::npos) << e.what();
  }
}

TEST(Classify, RejectsEmptyTexts) {
  backends::RuleNliBackend nli;
  EXPECT_THROW(classify(nli, " ", "x"), InvalidArgument);
  EXPECT_THROW(classify(nli, "x", ""), InvalidArgument);
  EXPECT_EQ(classify(nli, "a b c", "b c"), NliLabel::kEntailment);
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    fixture_ = fx::load_pipeline_fixture();
    index_ = std::make_unique<retrieval::PassageIndex>(retrieval::index_build(fixture_.passages, embedder_));
  }

  fx::PipelineFixture fixture_;
  backends::HashedBagOfWordsEmbedder embedder_{256};
  std::unique_ptr<retrieval::PassageIndex> index_;
};

TEST_F(PipelineTest, AmazonUnfactualTextIsRefutedByItsSource) {
  const auto& amazon = fixture_.cases.front();
  ASSERT_EQ(amazon.page_id, "amazon");
  ScriptedClaimExtractor extractor(fixture_.extraction_script);
  backends::RuleNliBackend nli(fixture_.contradictions);

  const auto u = verify_text(amazon.unfactual_text, extractor, *index_, embedder_, nli);
  EXPECT_FALSE(u.factual);
  bool found = false;
  for (const auto& t : u.claim_traces) {
    if (t.claim != amazon.altered) continue;
    found = true;
    EXPECT_FALSE(t.decision);
    ASSERT_TRUE(t.deciding_passage_id);
    EXPECT_EQ(t.deciding_passage_id->rfind("amazon:", 0), 0u) << *t.deciding_passage_id;
    EXPECT_EQ(t.deciding_label, NliLabel::kContradiction);
  }
  EXPECT_TRUE(found);

  EXPECT_TRUE(verify_text(amazon.factual_text, extractor, *index_, embedder_, nli).factual);
}

TEST_F(PipelineTest, EveryCaseSeparatesFactualFromUnfactual) {
  ScriptedClaimExtractor extractor(fixture_.extraction_script);
  backends::RuleNliBackend nli(fixture_.contradictions);
  for (const auto& c : fixture_.cases) {
    EXPECT_TRUE(verify_text(c.factual_text, extractor, *index_, embedder_, nli, {.k = 30, .workers = 2}).factual)
        << c.page_id;
    EXPECT_FALSE(verify_text(c.unfactual_text, extractor, *index_, embedder_, nli).factual) << c.page_id;
  }
}

TEST_F(PipelineTest, NoClaimsIsUnverifiable) {
  ScriptedClaimExtractor extractor({});
  backends::RuleNliBackend nli;
  EXPECT_THROW(verify_text("Anything.", extractor, *index_, embedder_, nli), UnverifiableInput);
  SentenceClaimExtractor sentences;
  EXPECT_THROW(verify_text("   ", sentences, *index_, embedder_, nli), UnverifiableInput);
}

TEST(Extractor, ChatExtractorReadsStepOne) {
  const std::string text = "Paris is in France.";
  const std::vector<backends::Message> messages = {{"user", synthgen::build_claim_extraction_prompt(text)}};
  backends::MockScript script;
  script.add(backends::chat_fingerprint(messages, 0.0), "Sure:\n{\"step_1\": [\"Paris is in France.\", \"\"]}");
  backends::ScriptedChatBackend chat(std::move(script));
  ChatClaimExtractor extractor(chat);
  EXPECT_EQ(extractor.extract(text), std::vector<std::string>{"Paris is in France."});
}
