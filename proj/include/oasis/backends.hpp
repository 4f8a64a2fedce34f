#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oasis/jsonl.hpp"
#include "oasis/nli.hpp"

namespace oasis::backends {

enum class BackendKind { kChat, kEmbedding, kNli };

const char* to_string(BackendKind kind) noexcept;
BackendKind parse_backend_kind(std::string_view s);

/// Connection and behaviour settings for one inference backend. API keys
/// never live here: `auth_env` names the environment variable holding one.
///
/// When `mock` is non-empty the profile selects an offline implementation
/// instead of HTTP ("script" or "constant" for chat, "hash" or "exact" for embeddings,
/// "rules" for NLI); `mock_options` carries its settings.
struct BackendProfile {
  std::string name;
  BackendKind kind = BackendKind::kChat;
  std::string endpoint;
  std::string model;
  std::string auth_env;
  double timeout_seconds = 60.0;
  int max_in_flight = 4;
  double temperature = 0.0;
  bool supports_system_prompt = true;
  int max_retries = 3;
  int backoff_ms = 500;
  std::string mock;
  jsonl::json mock_options = jsonl::json::object();
};

/// Parses one profile object. Relative paths inside mock options are
/// resolved against `base_dir`.
BackendProfile profile_from_json(const std::string& name, const jsonl::json& obj,
                                 const std::filesystem::path& base_dir = {});

struct Message {
  std::string role;
  std::string content;

  bool operator==(const Message&) const = default;
};

using EmbeddingVector = std::vector<float>;

// Request fingerprints: FNV-1a over the canonical JSON of the request. The
// model name is excluded so scripts replay across profiles.
std::string chat_fingerprint(std::span<const Message> messages, double temperature);
std::string embed_fingerprint(std::span<const std::string> texts);
std::string nli_fingerprint(std::string_view premise, std::string_view hypothesis);

/// Bounds the number of concurrent calls through one backend.
class InFlightGate {
 public:
  explicit InFlightGate(int max_in_flight);

  class Permit {
   public:
    explicit Permit(InFlightGate& gate) : gate_(&gate) {}
    Permit(Permit&& other) noexcept : gate_(std::exchange(other.gate_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (gate_) gate_->release();
    }

   private:
    InFlightGate* gate_;
  };

  Permit acquire();
  int limit() const noexcept { return limit_; }

 private:
  void release();

  int limit_;
  int in_use_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

class ChatBackend {
 public:
  ChatBackend(int max_in_flight, double temperature, bool supports_system)
      : gate_(max_in_flight), temperature_(temperature), supports_system_(supports_system) {}
  virtual ~ChatBackend() = default;

  /// One completion at the configured temperature.
  std::string chat(std::span<const Message> messages);

  double temperature() const noexcept { return temperature_; }
  bool supports_system_prompt() const noexcept { return supports_system_; }
  int max_in_flight() const noexcept { return gate_.limit(); }

 protected:
  virtual std::string do_chat(std::span<const Message> messages, const std::string& fingerprint) = 0;

 private:
  InFlightGate gate_;
  double temperature_;
  bool supports_system_;
};

class EmbeddingBackend {
 public:
  explicit EmbeddingBackend(int max_in_flight) : gate_(max_in_flight) {}
  virtual ~EmbeddingBackend() = default;

  /// One vector per text in input order, all of one dimension.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);
  EmbeddingVector embed_one(const std::string& text);

  int max_in_flight() const noexcept { return gate_.limit(); }

 protected:
  virtual std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts,
                                                const std::string& fingerprint) = 0;

 private:
  InFlightGate gate_;
};

class NliBackend {
 public:
  explicit NliBackend(int max_in_flight) : gate_(max_in_flight) {}
  virtual ~NliBackend() = default;

  /// Label distribution for (premise, hypothesis); validated to sum to 1.
  NliDistribution nli(std::string_view premise, std::string_view hypothesis);

  int max_in_flight() const noexcept { return gate_.limit(); }

 protected:
  virtual NliDistribution do_nli(std::string_view premise, std::string_view hypothesis,
                                 const std::string& fingerprint) = 0;

 private:
  InFlightGate gate_;
};

// ---------------------------------------------------------------------------
// HTTP implementations. Chat and embeddings use the chat-completions and
// embeddings request/response shapes; NLI posts {model, premise, hypothesis}
// to <endpoint>/nli and accepts either {entailment, neutral, contradiction}
// or a list of {label, score}. Transient failures (connection errors, 429,
// 5xx) are retried with exponential backoff up to `max_retries` times.

class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendProfile profile);
  std::uint64_t retries() const noexcept { return retries_.load(); }

 protected:
  std::string do_chat(std::span<const Message> messages, const std::string& fingerprint) override;

 private:
  BackendProfile profile_;
  std::atomic<std::uint64_t> retries_{0};
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(BackendProfile profile);
  std::uint64_t retries() const noexcept { return retries_.load(); }

 protected:
  std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts,
                                        const std::string& fingerprint) override;

 private:
  BackendProfile profile_;
  std::atomic<std::uint64_t> retries_{0};
};

class HttpNliBackend final : public NliBackend {
 public:
  explicit HttpNliBackend(BackendProfile profile);
  std::uint64_t retries() const noexcept { return retries_.load(); }

 protected:
  NliDistribution do_nli(std::string_view premise, std::string_view hypothesis,
                         const std::string& fingerprint) override;

 private:
  BackendProfile profile_;
  std::atomic<std::uint64_t> retries_{0};
};

// ---------------------------------------------------------------------------
// Mocks. All are pure functions of their inputs except the chat script,
// which replays a fixed queue per fingerprint.

/// Responses queued per request fingerprint. File form is one record per
/// line: {"fingerprint": "...", "response": "..."} or, instead of the
/// fingerprint, {"messages": [...], "temperature": 0.0}.
class MockScript {
 public:
  static MockScript load(const std::filesystem::path& path);
  static MockScript parse(std::string_view content, std::string_view origin = "<script>");

  void add(const std::string& fingerprint, std::string response);
  /// Pops the next response for `fingerprint`, or returns false when none remain.
  bool next(const std::string& fingerprint, std::string& out);
  std::size_t remaining() const;

 private:
  std::map<std::string, std::deque<std::string>> responses_;
};

class ScriptedChatBackend final : public ChatBackend {
 public:
  explicit ScriptedChatBackend(MockScript script, int max_in_flight = 4,
                               bool supports_system = true);

 protected:
  std::string do_chat(std::span<const Message> messages, const std::string& fingerprint) override;

 private:
  std::mutex mu_;
  MockScript script_;
};

/// Replies with the same text to every request.
class ConstantChatBackend final : public ChatBackend {
 public:
  explicit ConstantChatBackend(std::string response, int max_in_flight = 4, bool supports_system = true)
      : ChatBackend(max_in_flight, 0.0, supports_system), response_(std::move(response)) {}

 protected:
  std::string do_chat(std::span<const Message> messages, const std::string& fingerprint) override;

 private:
  std::string response_;
};

/// Signed feature hashing of ROUGE-style unigrams, L2-normalized.
class HashedBagOfWordsEmbedder final : public EmbeddingBackend {
 public:
  explicit HashedBagOfWordsEmbedder(std::size_t dimension = 256, int max_in_flight = 4);
  EmbeddingVector vector_for(std::string_view text) const;

 protected:
  std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts,
                                        const std::string& fingerprint) override;

 private:
  std::size_t dimension_;
};

/// Maps each text (after alias substitution) to a pseudo-random unit vector
/// seeded by the text's hash: equal canonical texts score exactly 1, others
/// strictly less with overwhelming probability.
class ExactMatchEmbedder final : public EmbeddingBackend {
 public:
  explicit ExactMatchEmbedder(std::size_t dimension = 64,
                              std::map<std::string, std::string> aliases = {},
                              int max_in_flight = 4);
  EmbeddingVector vector_for(const std::string& text) const;

 protected:
  std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts,
                                        const std::string& fingerprint) override;

 private:
  std::size_t dimension_;
  std::map<std::string, std::string> aliases_;
};

/// Rule-based NLI over normalized unigram sequences:
///   hypothesis contained in premise                      -> ENT   (0.9, 0.05, 0.05)
///   hypothesis contained after swapping a configured pair -> CONTR (0.05, 0.05, 0.9)
///   otherwise                                            -> NEUT  (0.05, 0.9, 0.05)
class RuleNliBackend final : public NliBackend {
 public:
  using TermPair = std::pair<std::string, std::string>;

  explicit RuleNliBackend(std::vector<TermPair> contradiction_pairs = {}, int max_in_flight = 4);

  static constexpr NliDistribution kEntails{0.9, 0.05, 0.05};
  static constexpr NliDistribution kContradicts{0.05, 0.05, 0.9};
  static constexpr NliDistribution kNeutral{0.05, 0.9, 0.05};

 protected:
  NliDistribution do_nli(std::string_view premise, std::string_view hypothesis,
                         const std::string& fingerprint) override;

 private:
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs_;
};

std::unique_ptr<ChatBackend> make_chat_backend(const BackendProfile& profile);
std::unique_ptr<EmbeddingBackend> make_embedding_backend(const BackendProfile& profile);
std::unique_ptr<NliBackend> make_nli_backend(const BackendProfile& profile);

/// Named profiles from the "profiles" object of a config file.
class ProfileRegistry {
 public:
  ProfileRegistry() = default;
  static ProfileRegistry from_json(const jsonl::json& config, const std::filesystem::path& base_dir);

  void add(BackendProfile profile);
  bool contains(const std::string& name) const;
  /// nullptr when no profile of that name was configured.
  const BackendProfile* find(const std::string& name) const;

  /// Looks up `name` and checks its kind. The reserved name "mock" yields
  /// the default offline backend for embeddings and NLI.
  BackendProfile resolve(const std::string& name, BackendKind kind) const;

  std::vector<std::string> names() const;

 private:
  std::map<std::string, BackendProfile> profiles_;
};

}  // namespace oasis::backends
