#include "oasis/backends.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "oasis/errors.hpp"
#include "oasis/text.hpp"

namespace oasis::backends {

using json = jsonl::json;

const char* to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::kChat:
      return "chat";
    case BackendKind::kEmbedding:
      return "embedding";
    case BackendKind::kNli:
      return "nli";
  }
  return "?";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "chat") return BackendKind::kChat;
  if (s == "embedding") return BackendKind::kEmbedding;
  if (s == "nli") return BackendKind::kNli;
  throw FormatError("unknown backend kind '" + std::string(s) + "'");
}

BackendProfile profile_from_json(const std::string& name, const json& obj,
                                 const std::filesystem::path& base_dir) {
  if (!obj.is_object()) throw FormatError("profile '" + name + "' must be an object");
  BackendProfile p;
  p.name = name;
  p.kind = parse_backend_kind(jsonl::string_field(obj, "kind"));
  auto get_str = [&](const char* key, std::string& out) {
    if (obj.contains(key)) out = jsonl::string_field(obj, key);
  };
  auto get_num = [&](const char* key, auto& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw FormatError("profile '" + name + "': '" + key + "' must be a number");
    out = v.get<std::remove_reference_t<decltype(out)>>();
  };
  get_str("endpoint", p.endpoint);
  get_str("model", p.model);
  get_str("auth_env", p.auth_env);
  get_str("mock", p.mock);
  get_num("timeout_seconds", p.timeout_seconds);
  get_num("max_in_flight", p.max_in_flight);
  get_num("temperature", p.temperature);
  get_num("max_retries", p.max_retries);
  get_num("backoff_ms", p.backoff_ms);
  if (obj.contains("supports_system_prompt")) {
    p.supports_system_prompt = obj.at("supports_system_prompt").get<bool>();
  }
  if (obj.contains("api_key")) {
    throw FormatError("profile '" + name + "': API keys belong in environment variables (auth_env)");
  }
  if (p.max_in_flight < 1) throw FormatError("profile '" + name + "': max_in_flight must be >= 1");
  if (p.max_retries < 0) throw FormatError("profile '" + name + "': max_retries must be >= 0");
  if (obj.contains("options")) p.mock_options = obj.at("options");
  if (auto it = p.mock_options.find("script"); it != p.mock_options.end() && it->is_string()) {
    std::filesystem::path script = it->get<std::string>();
    if (script.is_relative() && !base_dir.empty()) *it = (base_dir / script).string();
  }
  if (p.mock.empty() && p.endpoint.empty()) {
    throw FormatError("profile '" + name + "' needs either an endpoint or a mock");
  }
  return p;
}

// --- fingerprints ----------------------------------------------------------

std::string chat_fingerprint(std::span<const Message> messages, double temperature) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json req = {{"kind", "chat"}, {"messages", std::move(msgs)}, {"temperature", temperature}};
  return text::hex64(text::fnv1a64(req.dump()));
}

std::string embed_fingerprint(std::span<const std::string> texts) {
  json req = {{"kind", "embedding"}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  return text::hex64(text::fnv1a64(req.dump()));
}

std::string nli_fingerprint(std::string_view premise, std::string_view hypothesis) {
  json req = {{"kind", "nli"}, {"premise", premise}, {"hypothesis", hypothesis}};
  return text::hex64(text::fnv1a64(req.dump()));
}

// --- gate ------------------------------------------------------------------

InFlightGate::InFlightGate(int max_in_flight) : limit_(max_in_flight) {
  if (max_in_flight < 1) throw InvalidArgument("max_in_flight must be >= 1");
}

InFlightGate::Permit InFlightGate::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_use_ < limit_; });
  ++in_use_;
  return Permit(*this);
}

void InFlightGate::release() {
  {
    std::lock_guard lock(mu_);
    --in_use_;
  }
  cv_.notify_one();
}

// --- interface wrappers ------------------------------------------------------

std::string ChatBackend::chat(std::span<const Message> messages) {
  const auto fp = chat_fingerprint(messages, temperature_);
  auto permit = gate_.acquire();
  return do_chat(messages, fp);
}

std::vector<EmbeddingVector> EmbeddingBackend::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidArgument("embed needs at least one text");
  const auto fp = embed_fingerprint(texts);
  std::vector<EmbeddingVector> out;
  {
    auto permit = gate_.acquire();
    out = do_embed(texts, fp);
  }
  if (out.size() != texts.size()) {
    throw BackendError(BackendErrorKind::kMalformedResponse, fp,
                       "expected " + std::to_string(texts.size()) + " vectors, got " +
                           std::to_string(out.size()));
  }
  for (const auto& v : out) {
    if (v.size() != out.front().size() || v.empty()) {
      throw BackendError(BackendErrorKind::kDimensionMismatch, fp, "non-uniform vector dimensions");
    }
    for (float x : v) {
      if (!std::isfinite(x)) {
        throw BackendError(BackendErrorKind::kMalformedResponse, fp, "non-finite embedding value");
      }
    }
  }
  return out;
}

EmbeddingVector EmbeddingBackend::embed_one(const std::string& text) {
  return std::move(embed(std::span<const std::string>(&text, 1)).front());
}

NliDistribution NliBackend::nli(std::string_view premise, std::string_view hypothesis) {
  const auto fp = nli_fingerprint(premise, hypothesis);
  NliDistribution d;
  {
    auto permit = gate_.acquire();
    d = do_nli(premise, hypothesis, fp);
  }
  if (!d.is_valid()) {
    throw BackendError(BackendErrorKind::kInvalidDistribution, fp,
                       "probabilities must lie in [0,1] and sum to 1");
  }
  return d;
}

// --- mock script -------------------------------------------------------------

MockScript MockScript::parse(std::string_view content, std::string_view origin) {
  MockScript script;
  for (const auto& row : jsonl::parse(content, origin)) {
    std::string fp;
    if (row.contains("fingerprint")) {
      fp = jsonl::string_field(row, "fingerprint");
    } else {
      std::vector<Message> messages;
      for (const auto& m : jsonl::field(row, "messages")) {
        messages.push_back({jsonl::string_field(m, "role"), jsonl::string_field(m, "content")});
      }
      const double temperature = row.value("temperature", 0.0);
      fp = chat_fingerprint(messages, temperature);
    }
    script.add(fp, jsonl::string_field(row, "response"));
  }
  return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  return parse(jsonl::read_file(path), path.string());
}

void MockScript::add(const std::string& fingerprint, std::string response) {
  responses_[fingerprint].push_back(std::move(response));
}

bool MockScript::next(const std::string& fingerprint, std::string& out) {
  auto it = responses_.find(fingerprint);
  if (it == responses_.end() || it->second.empty()) return false;
  out = std::move(it->second.front());
  it->second.pop_front();
  return true;
}

std::size_t MockScript::remaining() const {
  std::size_t n = 0;
  for (const auto& [fp, queue] : responses_) n += queue.size();
  return n;
}

ScriptedChatBackend::ScriptedChatBackend(MockScript script, int max_in_flight,
                                         bool supports_system)
    : ChatBackend(max_in_flight, 0.0, supports_system), script_(std::move(script)) {}

std::string ScriptedChatBackend::do_chat(std::span<const Message>, const std::string& fingerprint) {
  std::lock_guard lock(mu_);
  std::string out;
  if (!script_.next(fingerprint, out)) {
    throw BackendError(BackendErrorKind::kScriptExhausted, fingerprint,
                       "no scripted response left for this request");
  }
  return out;
}

// --- embedders ---------------------------------------------------------------

namespace {

void normalize(EmbeddingVector& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm == 0.0) return;
  const double inv = 1.0 / std::sqrt(norm);
  for (float& x : v) x = static_cast<float>(x * inv);
}

}  // namespace

HashedBagOfWordsEmbedder::HashedBagOfWordsEmbedder(std::size_t dimension, int max_in_flight)
    : EmbeddingBackend(max_in_flight), dimension_(dimension) {
  if (dimension == 0) throw InvalidArgument("embedding dimension must be positive");
}

EmbeddingVector HashedBagOfWordsEmbedder::vector_for(std::string_view t) const {
  EmbeddingVector v(dimension_, 0.0f);
  for (const auto& tok : text::unigrams(t)) {
    const std::uint64_t h = text::fnv1a64(tok);
    v[h % dimension_] += (h >> 63) ? -1.0f : 1.0f;
  }
  normalize(v);
  return v;
}

std::vector<EmbeddingVector> HashedBagOfWordsEmbedder::do_embed(std::span<const std::string> texts,
                                                                const std::string&) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(vector_for(t));
  return out;
}

ExactMatchEmbedder::ExactMatchEmbedder(std::size_t dimension,
                                       std::map<std::string, std::string> aliases,
                                       int max_in_flight)
    : EmbeddingBackend(max_in_flight), dimension_(dimension), aliases_(std::move(aliases)) {
  if (dimension == 0) throw InvalidArgument("embedding dimension must be positive");
}

EmbeddingVector ExactMatchEmbedder::vector_for(const std::string& t) const {
  auto it = aliases_.find(t);
  const std::string& canonical = it == aliases_.end() ? t : it->second;
  std::mt19937_64 rng(text::fnv1a64(canonical));
  EmbeddingVector v(dimension_);
  for (float& x : v) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    x = static_cast<float>(2.0 * u - 1.0);
  }
  normalize(v);
  return v;
}

std::vector<EmbeddingVector> ExactMatchEmbedder::do_embed(std::span<const std::string> texts,
                                                          const std::string&) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(vector_for(t));
  return out;
}

std::string ConstantChatBackend::do_chat(std::span<const Message>, const std::string&) {
  return response_;
}

// --- rule NLI ------------------------------------------------------------------

namespace {

bool contains_sequence(const std::vector<std::string>& haystack,
                       const std::vector<std::string>& needle) {
  if (needle.empty()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

std::vector<std::string> replace_sequence(const std::vector<std::string>& tokens,
                                          const std::vector<std::string>& from,
                                          const std::vector<std::string>& to) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (i + from.size() <= tokens.size() &&
        std::equal(from.begin(), from.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      out.insert(out.end(), to.begin(), to.end());
      i += from.size();
    } else {
      out.push_back(tokens[i++]);
    }
  }
  return out;
}

}  // namespace

RuleNliBackend::RuleNliBackend(std::vector<TermPair> contradiction_pairs, int max_in_flight)
    : NliBackend(max_in_flight) {
  for (const auto& [a, b] : contradiction_pairs) {
    auto ta = text::unigrams(a);
    auto tb = text::unigrams(b);
    if (ta.empty() || tb.empty()) throw InvalidArgument("contradiction terms must be non-empty");
    pairs_.emplace_back(ta, tb);
    pairs_.emplace_back(std::move(tb), std::move(ta));
  }
}

NliDistribution RuleNliBackend::do_nli(std::string_view premise, std::string_view hypothesis,
                                       const std::string&) {
  const auto prem = text::unigrams(premise);
  const auto hyp = text::unigrams(hypothesis);
  if (contains_sequence(prem, hyp)) return kEntails;
  for (const auto& [from, to] : pairs_) {
    if (!contains_sequence(hyp, from)) continue;
    if (contains_sequence(prem, replace_sequence(hyp, from, to))) return kContradicts;
  }
  return kNeutral;
}

// --- factories -------------------------------------------------------------------

namespace {

void expect_kind(const BackendProfile& p, BackendKind kind) {
  if (p.kind != kind) {
    throw InvalidArgument("profile '" + p.name + "' is a " + to_string(p.kind) +
                          " backend, expected " + to_string(kind));
  }
}

}  // namespace

std::unique_ptr<ChatBackend> make_chat_backend(const BackendProfile& p) {
  expect_kind(p, BackendKind::kChat);
  if (p.mock.empty()) return std::make_unique<HttpChatBackend>(p);
  if (p.mock == "script") {
    auto it = p.mock_options.find("script");
    if (it == p.mock_options.end() || !it->is_string()) {
      throw FormatError("profile '" + p.name + "': script mock needs options.script");
    }
    return std::make_unique<ScriptedChatBackend>(MockScript::load(it->get<std::string>()),
                                                 p.max_in_flight, p.supports_system_prompt);
  }
  if (p.mock == "constant") {
    return std::make_unique<ConstantChatBackend>(p.mock_options.value("response", std::string()),
                                                 p.max_in_flight, p.supports_system_prompt);
  }
  throw FormatError("profile '" + p.name + "': unknown chat mock '" + p.mock + "'");
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const BackendProfile& p) {
  expect_kind(p, BackendKind::kEmbedding);
  if (p.mock.empty()) return std::make_unique<HttpEmbeddingBackend>(p);
  if (p.mock == "hash") {
    return std::make_unique<HashedBagOfWordsEmbedder>(
        p.mock_options.value("dimension", std::size_t{256}), p.max_in_flight);
  }
  if (p.mock == "exact") {
    std::map<std::string, std::string> aliases;
    if (auto it = p.mock_options.find("aliases"); it != p.mock_options.end()) {
      aliases = it->get<std::map<std::string, std::string>>();
    }
    return std::make_unique<ExactMatchEmbedder>(p.mock_options.value("dimension", std::size_t{64}),
                                                std::move(aliases), p.max_in_flight);
  }
  throw FormatError("profile '" + p.name + "': unknown embedding mock '" + p.mock + "'");
}

std::unique_ptr<NliBackend> make_nli_backend(const BackendProfile& p) {
  expect_kind(p, BackendKind::kNli);
  if (p.mock.empty()) return std::make_unique<HttpNliBackend>(p);
  if (p.mock == "rules") {
    std::vector<RuleNliBackend::TermPair> pairs;
    if (auto it = p.mock_options.find("contradictions"); it != p.mock_options.end()) {
      for (const auto& pair : *it) {
        if (!pair.is_array() || pair.size() != 2) {
          throw FormatError("profile '" + p.name + "': contradictions must be [a, b] pairs");
        }
        pairs.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
      }
    }
    return std::make_unique<RuleNliBackend>(std::move(pairs), p.max_in_flight);
  }
  throw FormatError("profile '" + p.name + "': unknown NLI mock '" + p.mock + "'");
}

// --- registry ----------------------------------------------------------------------

ProfileRegistry ProfileRegistry::from_json(const json& config, const std::filesystem::path& base_dir) {
  ProfileRegistry reg;
  auto it = config.find("profiles");
  if (it == config.end()) return reg;
  if (!it->is_object()) throw FormatError("'profiles' must be an object");
  for (const auto& [name, obj] : it->items()) reg.add(profile_from_json(name, obj, base_dir));
  return reg;
}

void ProfileRegistry::add(BackendProfile profile) {
  auto name = profile.name;
  profiles_.insert_or_assign(std::move(name), std::move(profile));
}

bool ProfileRegistry::contains(const std::string& name) const { return profiles_.count(name) != 0; }

const BackendProfile* ProfileRegistry::find(const std::string& name) const {
  auto it = profiles_.find(name);
  return it == profiles_.end() ? nullptr : &it->second;
}

BackendProfile ProfileRegistry::resolve(const std::string& name, BackendKind kind) const {
  if (auto it = profiles_.find(name); it != profiles_.end()) {
    if (it->second.kind != kind) {
      throw InvalidArgument("profile '" + name + "' is a " + to_string(it->second.kind) +
                            " backend, expected " + to_string(kind));
    }
    return it->second;
  }
  if (name == "mock" && kind != BackendKind::kChat) {
    BackendProfile p;
    p.name = "mock";
    p.kind = kind;
    p.mock = kind == BackendKind::kEmbedding ? "hash" : "rules";
    return p;
  }
  throw InvalidArgument("unknown backend profile '" + name + "'");
}

std::vector<std::string> ProfileRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : profiles_) out.push_back(name);
  return out;
}

}  // namespace oasis::backends
