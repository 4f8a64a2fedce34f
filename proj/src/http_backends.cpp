#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

#include "oasis/backends.hpp"
#include "oasis/errors.hpp"

namespace oasis::backends {

using json = jsonl::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing '/'
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw FormatError("endpoint '" + url + "' must start with http:// or https://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) ep.prefix = url.substr(path_start);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

// POSTs `body` to `path` and returns the parsed JSON response. Retries
// transient failures with exponential backoff.
json post_json(const BackendProfile& profile, const std::string& path, const json& body,
               const std::string& fingerprint, std::atomic<std::uint64_t>& retry_counter) {
  const Endpoint ep = split_endpoint(profile.endpoint);
  httplib::Headers headers;
  if (!profile.auth_env.empty()) {
    const char* key = std::getenv(profile.auth_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw BackendError(BackendErrorKind::kAuthFailure, fingerprint,
                         "environment variable " + profile.auth_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string payload = body.dump();
  const auto timeout = std::chrono::duration<double>(profile.timeout_seconds);

  for (int attempt = 0;; ++attempt) {
    httplib::Client client(ep.origin);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    auto res = client.Post(ep.prefix + path, headers, payload, "application/json");

    BackendErrorKind failure;
    std::string detail;
    if (!res) {
      failure = BackendErrorKind::kTimeout;
      detail = "no response from " + profile.endpoint + " (" + httplib::to_string(res.error()) + ")";
    } else if (res->status == 401 || res->status == 403) {
      throw BackendError(BackendErrorKind::kAuthFailure, fingerprint,
                         "HTTP " + std::to_string(res->status));
    } else if (res->status == 429) {
      failure = BackendErrorKind::kRateLimited;
      detail = "HTTP 429";
    } else if (res->status >= 500) {
      failure = BackendErrorKind::kTransport;
      detail = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw BackendError(BackendErrorKind::kTransport, fingerprint,
                         "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    } else {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error&) {
        throw BackendError(BackendErrorKind::kMalformedResponse, fingerprint,
                           "response body is not JSON");
      }
    }

    if (attempt >= profile.max_retries) throw BackendError(failure, fingerprint, detail);
    const auto delay = std::chrono::milliseconds(
        static_cast<long long>(profile.backoff_ms * std::ldexp(1.0, attempt)));
    ++retry_counter;
    spdlog::warn("{} backend '{}': {} (request {}), retry {}/{} in {} ms",
                 to_string(profile.kind), profile.name, detail, fingerprint, attempt + 1,
                 profile.max_retries, delay.count());
    std::this_thread::sleep_for(delay);
  }
}

[[noreturn]] void malformed(const std::string& fingerprint, const std::string& detail) {
  throw BackendError(BackendErrorKind::kMalformedResponse, fingerprint, detail);
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendProfile profile)
    : ChatBackend(profile.max_in_flight, profile.temperature, profile.supports_system_prompt),
      profile_(std::move(profile)) {
  split_endpoint(profile_.endpoint);
}

std::string HttpChatBackend::do_chat(std::span<const Message> messages,
                                     const std::string& fingerprint) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", profile_.model}, {"messages", std::move(msgs)},
               {"temperature", profile_.temperature}};
  const json res = post_json(profile_, "/chat/completions", body, fingerprint, retries_);
  try {
    const auto& content = res.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) malformed(fingerprint, "message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception&) {
    malformed(fingerprint, "missing choices[0].message.content");
  }
}

HttpEmbeddingBackend::HttpEmbeddingBackend(BackendProfile profile)
    : EmbeddingBackend(profile.max_in_flight), profile_(std::move(profile)) {
  split_endpoint(profile_.endpoint);
}

std::vector<EmbeddingVector> HttpEmbeddingBackend::do_embed(std::span<const std::string> texts,
                                                            const std::string& fingerprint) {
  json body = {{"model", profile_.model},
               {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const json res = post_json(profile_, "/embeddings", body, fingerprint, retries_);
  std::vector<EmbeddingVector> out(texts.size());
  try {
    const auto& data = res.at("data");
    if (!data.is_array() || data.size() != texts.size()) {
      malformed(fingerprint, "embedding count does not match input count");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t index = data[i].value("index", i);
      if (index >= out.size() || !out[index].empty()) malformed(fingerprint, "bad embedding index");
      out[index] = data[i].at("embedding").get<EmbeddingVector>();
      if (out[index].empty()) malformed(fingerprint, "empty embedding");
    }
  } catch (const json::exception& e) {
    malformed(fingerprint, std::string("unexpected embeddings response: ") + e.what());
  }
  return out;
}

HttpNliBackend::HttpNliBackend(BackendProfile profile)
    : NliBackend(profile.max_in_flight), profile_(std::move(profile)) {
  split_endpoint(profile_.endpoint);
}

NliDistribution HttpNliBackend::do_nli(std::string_view premise, std::string_view hypothesis,
                                       const std::string& fingerprint) {
  json body = {{"model", profile_.model}, {"premise", premise}, {"hypothesis", hypothesis}};
  const json res = post_json(profile_, "/nli", body, fingerprint, retries_);
  NliDistribution d;
  try {
    if (res.is_object()) {
      const json& scores = res.contains("scores") ? res.at("scores") : res;
      d.entailment = scores.at("entailment").get<double>();
      d.neutral = scores.at("neutral").get<double>();
      d.contradiction = scores.at("contradiction").get<double>();
    } else if (res.is_array()) {
      bool seen[3] = {false, false, false};
      for (const auto& item : res) {
        std::string label = item.at("label").get<std::string>();
        for (char& c : label) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const double score = item.at("score").get<double>();
        if (label == "entailment") {
          d.entailment = score, seen[0] = true;
        } else if (label == "neutral") {
          d.neutral = score, seen[1] = true;
        } else if (label == "contradiction") {
          d.contradiction = score, seen[2] = true;
        }
      }
      if (!(seen[0] && seen[1] && seen[2])) malformed(fingerprint, "missing NLI label scores");
    } else {
      malformed(fingerprint, "unexpected NLI response shape");
    }
  } catch (const json::exception& e) {
    malformed(fingerprint, std::string("unexpected NLI response: ") + e.what());
  }
  return d;
}

}  // namespace oasis::backends
