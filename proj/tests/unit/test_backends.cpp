#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "fixtures.hpp"
#include "oasis/backends.hpp"
#include "oasis/errors.hpp"

using namespace oasis;
using namespace oasis::backends;
using json = jsonl::json;

namespace {

// Local inference server on an ephemeral port.
class TestServer {
 public:
  TestServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendProfile http_profile(BackendKind kind, const std::string& endpoint) {
  BackendProfile p;
  p.name = "test";
  p.kind = kind;
  p.endpoint = endpoint;
  p.model = "m";
  p.backoff_ms = 1;
  p.timeout_seconds = 2;
  return p;
}

std::vector<Message> hello() { return {{"user", "hello"}}; }

}  // namespace

TEST(Profiles, DefaultsAndParsing) {
  const auto p = profile_from_json("c", {{"kind", "chat"}, {"endpoint", "http://h/v1"}, {"model", "x"}});
  EXPECT_EQ(p.temperature, 0.0);
  EXPECT_EQ(p.max_in_flight, 4);
  EXPECT_EQ(p.max_retries, 3);
  EXPECT_TRUE(p.supports_system_prompt);
}

TEST(Profiles, RejectsApiKeysAndBadSettings) {
  EXPECT_THROW(profile_from_json("c", {{"kind", "chat"}, {"endpoint", "http://h"}, {"api_key", "sk"}}),
               FormatError);
  EXPECT_THROW(profile_from_json("c", {{"kind", "chat"}}), FormatError);
  EXPECT_THROW(profile_from_json("c", {{"kind", "chat"}, {"endpoint", "http://h"}, {"max_in_flight", 0}}),
               FormatError);
  EXPECT_THROW(profile_from_json("c", {{"kind", "vision"}, {"endpoint", "http://h"}}), FormatError);
}

TEST(Profiles, ScriptPathResolvedAgainstConfigDir) {
  const auto p = profile_from_json(
      "c", {{"kind", "chat"}, {"mock", "script"}, {"options", {{"script", "s.jsonl"}}}}, "/cfg");
  EXPECT_EQ(p.mock_options.at("script"), "/cfg/s.jsonl");
}

TEST(Registry, ResolveChecksKindAndKnowsMock) {
  const json config = {{"profiles", {{"emb", {{"kind", "embedding"}, {"mock", "hash"}}}}}};
  const auto reg = ProfileRegistry::from_json(config, {});
  EXPECT_EQ(reg.resolve("emb", BackendKind::kEmbedding).mock, "hash");
  EXPECT_THROW(reg.resolve("emb", BackendKind::kNli), InvalidArgument);
  EXPECT_THROW(reg.resolve("nope", BackendKind::kNli), InvalidArgument);
  EXPECT_EQ(reg.resolve("mock", BackendKind::kNli).mock, "rules");
  EXPECT_THROW(reg.resolve("mock", BackendKind::kChat), InvalidArgument);
}

TEST(MockChat, ScriptedReplyByFingerprint) {
  MockScript script;
  script.add(chat_fingerprint(hello(), 0.0), "Factual");
  ScriptedChatBackend chat(std::move(script));
  EXPECT_EQ(chat.chat(hello()), "Factual");
}

TEST(MockChat, ScriptIsExhaustible) {
  MockScript script;
  script.add(chat_fingerprint(hello(), 0.0), "once");
  ScriptedChatBackend chat(std::move(script));
  EXPECT_EQ(chat.chat(hello()), "once");
  try {
    chat.chat(hello());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kScriptExhausted);
    EXPECT_EQ(e.fingerprint(), chat_fingerprint(hello(), 0.0));
  }
}

TEST(MockChat, ScriptFileAcceptsMessagesOrFingerprint) {
  const std::string content =
      "{\"messages\":[{\"role\":\"user\",\"content\":\"hello\"}],\"temperature\":0.0,\"response\":\"a\"}\n"
      "{\"fingerprint\":\"" + chat_fingerprint(hello(), 0.0) + "\",\"response\":\"b\"}\n";
  auto script = MockScript::parse(content);
  EXPECT_EQ(script.remaining(), 2u);
  ScriptedChatBackend chat(std::move(script));
  EXPECT_EQ(chat.chat(hello()), "a");
  EXPECT_EQ(chat.chat(hello()), "b");
}

TEST(Fingerprint, DependsOnContentNotModel) {
  EXPECT_EQ(chat_fingerprint(hello(), 0.0), chat_fingerprint(hello(), 0.0));
  EXPECT_NE(chat_fingerprint(hello(), 0.0), chat_fingerprint(hello(), 0.5));
  const std::vector<Message> other = {{"user", "hello!"}};
  EXPECT_NE(chat_fingerprint(hello(), 0.0), chat_fingerprint(other, 0.0));
  EXPECT_NE(nli_fingerprint("a", "b"), nli_fingerprint("b", "a"));
}

TEST(MockEmbedder, IdenticalTextsIdenticalVectors) {
  HashedBagOfWordsEmbedder e(64);
  const std::vector<std::string> texts = {"a b", "a b", "b", "a"};
  const auto v = e.embed(texts);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0], v[1]);
  EXPECT_NE(v[2], v[3]);
  EXPECT_EQ(v[3], e.embed_one("a"));
  EXPECT_EQ(v[0].size(), 64u);
}

TEST(MockEmbedder, ExactMatchScoresOneOnlyForEqualText) {
  ExactMatchEmbedder e(64, {{"alias", "target"}});
  const auto a = e.vector_for("target");
  const auto b = e.vector_for("alias");
  const auto c = e.vector_for("other");
  double aa = 0, ab = 0, ac = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa += a[i] * a[i];
    ab += a[i] * b[i];
    ac += a[i] * c[i];
  }
  EXPECT_NEAR(aa, 1.0, 1e-6);
  EXPECT_NEAR(ab, 1.0, 1e-6);
  EXPECT_LT(ac, 0.9);
}

TEST(MockEmbedder, RejectsEmptyBatch) {
  HashedBagOfWordsEmbedder e(8);
  EXPECT_THROW(e.embed(std::vector<std::string>{}), InvalidArgument);
}

TEST(MockNli, DeclaredRules) {
  RuleNliBackend nli(std::vector<RuleNliBackend::TermPair>{{"brazil", "peru"}});
  const std::string premise = "The majority of the forest is contained within Brazil, with 60% of it.";
  const auto ent = nli.nli(premise, "the forest is contained within Brazil");
  EXPECT_EQ(ent.entailment, 0.9);
  EXPECT_EQ(ent.neutral, 0.05);
  EXPECT_EQ(ent.contradiction, 0.05);
  EXPECT_EQ(nli.nli(premise, "The majority of the forest is contained within Peru.").argmax(),
            NliLabel::kContradiction);
  EXPECT_EQ(nli.nli(premise, "Colombia has ten percent.").argmax(), NliLabel::kNeutral);
  // Pairs apply in both directions.
  EXPECT_EQ(nli.nli("It lies in Peru.", "It lies in Brazil.").argmax(), NliLabel::kContradiction);
}

TEST(MockNli, IsPure) {
  RuleNliBackend nli(std::vector<RuleNliBackend::TermPair>{{"a", "b"}});
  const auto x = nli.nli("p q r", "q r");
  for (int i = 0; i < 10; ++i) {
    const auto y = nli.nli("p q r", "q r");
    EXPECT_EQ(x.entailment, y.entailment);
    EXPECT_EQ(x.contradiction, y.contradiction);
  }
}

TEST(NliDistribution, ValidationAndTieBreak) {
  EXPECT_TRUE((NliDistribution{0.7, 0.2, 0.1}.is_valid()));
  EXPECT_FALSE((NliDistribution{0.7, 0.2, 0.2}.is_valid()));
  EXPECT_FALSE((NliDistribution{1.2, -0.1, -0.1}.is_valid()));
  EXPECT_EQ((NliDistribution{1.0 / 3, 1.0 / 3, 1.0 / 3}.argmax()), NliLabel::kEntailment);
  EXPECT_EQ((NliDistribution{0.1, 0.45, 0.45}.argmax()), NliLabel::kContradiction);
}

namespace {

class BadNli final : public NliBackend {
 public:
  BadNli() : NliBackend(1) {}

 protected:
  NliDistribution do_nli(std::string_view, std::string_view, const std::string&) override {
    return {0.5, 0.5, 0.5};
  }
};

// Records the peak number of concurrent calls.
class InstrumentedChat final : public ChatBackend {
 public:
  explicit InstrumentedChat(int limit) : ChatBackend(limit, 0.0, true) {}
  int peak() const { return peak_.load(); }

 protected:
  std::string do_chat(std::span<const Message>, const std::string&) override {
    const int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active_;
    return "ok";
  }

 private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

}  // namespace

TEST(NliBackendBase, InvalidDistributionCarriesFingerprint) {
  BadNli nli;
  try {
    nli.nli("p", "h");
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kInvalidDistribution);
    EXPECT_EQ(e.fingerprint(), nli_fingerprint("p", "h"));
  }
}

TEST(InFlight, NeverExceedsBound) {
  for (int limit : {1, 3}) {
    InstrumentedChat chat(limit);
    std::vector<std::jthread> threads;
    for (int t = 0; t < 12; ++t) {
      threads.emplace_back([&] {
        for (int i = 0; i < 4; ++i) chat.chat(hello());
      });
    }
    threads.clear();
    EXPECT_LE(chat.peak(), limit);
    EXPECT_GE(chat.peak(), 1);
  }
}

TEST(HttpChat, ChatCompletionsShape) {
  TestServer srv;
  json seen;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Not Factual"}}]})",
                    "application/json");
  });
  HttpChatBackend chat(http_profile(BackendKind::kChat, srv.endpoint()));
  EXPECT_EQ(chat.chat(hello()), "Not Factual");
  EXPECT_EQ(seen.at("model"), "m");
  EXPECT_EQ(seen.at("temperature"), 0.0);
  EXPECT_EQ(seen.at("messages").at(0).at("content"), "hello");
}

TEST(HttpChat, RateLimitThenSuccessRetriesOnce) {
  TestServer srv;
  std::atomic<int> calls{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 429;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"Factual"}}]})", "application/json");
  });
  HttpChatBackend chat(http_profile(BackendKind::kChat, srv.endpoint()));
  EXPECT_EQ(chat.chat(hello()), "Factual");
  EXPECT_EQ(chat.retries(), 1u);
  EXPECT_EQ(calls.load(), 2);
}

TEST(HttpChat, PersistentRateLimitSurfacesAfterRetries) {
  TestServer srv;
  std::atomic<int> calls{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
  });
  auto profile = http_profile(BackendKind::kChat, srv.endpoint());
  HttpChatBackend chat(profile);
  try {
    chat.chat(hello());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kRateLimited);
    EXPECT_EQ(e.fingerprint(), chat_fingerprint(hello(), 0.0));
  }
  EXPECT_EQ(calls.load(), profile.max_retries + 1);
}

TEST(HttpChat, UnreachableEndpointIsTimeout) {
  int port;
  {
    // Grab a free port, then release it so nothing listens there.
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto profile = http_profile(BackendKind::kChat, "http://127.0.0.1:" + std::to_string(port) + "/v1");
  profile.max_retries = 1;
  HttpChatBackend chat(profile);
  try {
    chat.chat(hello());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kTimeout);
    EXPECT_FALSE(e.fingerprint().empty());
  }
}

TEST(HttpChat, AuthFailureAndMissingKey) {
  TestServer srv;
  std::string auth;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    res.status = 401;
  });
  auto profile = http_profile(BackendKind::kChat, srv.endpoint());
  profile.auth_env = "OASIS_TEST_KEY_UNSET_123";
  ::unsetenv("OASIS_TEST_KEY_UNSET_123");
  try {
    HttpChatBackend(profile).chat(hello());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kAuthFailure);
  }
  ::setenv("OASIS_TEST_KEY_UNSET_123", "secret", 1);
  try {
    HttpChatBackend(profile).chat(hello());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kAuthFailure);
    EXPECT_EQ(std::string(e.what()).find("secret"), std::string::npos);
  }
  EXPECT_EQ(auth, "Bearer secret");
  ::unsetenv("OASIS_TEST_KEY_UNSET_123");
}

TEST(HttpChat, MalformedResponse) {
  TestServer srv;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  try {
    HttpChatBackend(http_profile(BackendKind::kChat, srv.endpoint())).chat(hello());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kMalformedResponse);
  }
}

TEST(HttpEmbedding, OrderAndDimensionChecks) {
  TestServer srv;
  srv.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json data = json::array();
    const auto n = body.at("input").size();
    // Reply out of order; the client must restore input order by index.
    for (std::size_t i = n; i-- > 0;) {
      const float dim_tail = body.at("input").at(i) == "ragged" ? 1 : 0;
      std::vector<float> v = {static_cast<float>(i), 1.0f};
      if (dim_tail) v.push_back(0.0f);
      data.push_back({{"index", i}, {"embedding", v}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  HttpEmbeddingBackend emb(http_profile(BackendKind::kEmbedding, srv.endpoint()));
  const std::vector<std::string> texts = {"a", "b", "c"};
  const auto v = emb.embed(texts);
  ASSERT_EQ(v.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(v[i][0], static_cast<float>(i));
  try {
    emb.embed(std::vector<std::string>{"a", "ragged"});
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kDimensionMismatch);
  }
}

TEST(HttpNli, AcceptsObjectAndLabelList) {
  TestServer srv;
  std::atomic<int> calls{0};
  srv.server().Post("/v1/nli", [&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.set_content(R"({"entailment":0.1,"neutral":0.2,"contradiction":0.7})", "application/json");
    } else {
      res.set_content(R"([{"label":"ENTAILMENT","score":0.8},{"label":"neutral","score":0.1},)"
                      R"({"label":"contradiction","score":0.1}])",
                      "application/json");
    }
  });
  HttpNliBackend nli(http_profile(BackendKind::kNli, srv.endpoint()));
  EXPECT_EQ(nli.nli("p", "h").argmax(), NliLabel::kContradiction);
  EXPECT_EQ(nli.nli("p", "h").argmax(), NliLabel::kEntailment);
}

TEST(HttpNli, InvalidDistributionRejected) {
  TestServer srv;
  srv.server().Post("/v1/nli", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"entailment":0.5,"neutral":0.5,"contradiction":0.5})", "application/json");
  });
  try {
    HttpNliBackend(http_profile(BackendKind::kNli, srv.endpoint())).nli("p", "h");
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::kInvalidDistribution);
  }
}
