#pragma once

#include "scenesynth/common.hpp"
#include "scenesynth/relations.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>

namespace scenesynth {

inline constexpr const char* kApiKeyEnv = "SCENESYNTH_API_KEY";

struct HttpEndpoint {
  std::string url;  // http://host[:port]/path
  std::string api_key_env = kApiKeyEnv;
  double timeout_seconds = 30.0;
  int max_attempts = 3;
  int retry_backoff_ms = 200;
};

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError(fmt::format("endpoint '{}' has no scheme", url));
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http") {
    throw ConfigError(fmt::format("endpoint '{}': only http:// is supported by this build", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

/// Substitutes every "{{name}}" in `tpl`.
inline std::string render_template(std::string tpl, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) {
    const std::string key = "{{" + k + "}}";
    for (std::size_t pos = tpl.find(key); pos != std::string::npos; pos = tpl.find(key, pos + v.size())) {
      tpl.replace(pos, key.size(), v);
    }
  }
  return tpl;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// POSTs a JSON body and returns the response body. Connection failures and
/// non-2xx replies are retried up to max_attempts; then TransportError.
inline std::string post_json(const HttpEndpoint& ep, const nlohmann::json& body) {
  const SplitUrl u = split_url(ep.url);
  httplib::Client client(u.origin);
  const auto timeout = std::chrono::duration<double>(ep.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (const char* key = std::getenv(ep.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, ep.max_attempts); ++attempt) {
    auto res = client.Post(u.path, headers, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    last_error = res ? fmt::format("HTTP {}", res->status) : httplib::to_string(res.error());
    log_warn("POST {} attempt {}/{} failed: {}", ep.url, attempt, ep.max_attempts, last_error);
    if (attempt < ep.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(ep.retry_backoff_ms * attempt));
    }
  }
  throw TransportError(fmt::format("POST {} failed after {} attempts: {}", ep.url, ep.max_attempts, last_error));
}

/// Relation backend over HTTP. Sends one request per object; the reply is
/// parsed fail-soft (schema problems drop relations, transport problems throw).
class HttpRelationBackend final : public RelationBackend {
 public:
  HttpRelationBackend(HttpEndpoint endpoint, std::string prompt_template)
      : endpoint_(std::move(endpoint)), prompt_template_(std::move(prompt_template)) {}

  std::vector<SpatialRelation> propose(const RelationRequest& req, Rng&) override {
    nlohmann::json body = relation_request_body(req);
    body["prompt"] = render_template(prompt_template_, {{"group", std::string(to_string(req.group))},
                                                        {"placed", body["placed"].dump()},
                                                        {"next_object", body["next_object"].dump()}});
    return parse_relation_reply(post_json(endpoint_, body), req.next_object.id);
  }

 private:
  HttpEndpoint endpoint_;
  std::string prompt_template_;
};

}  // namespace scenesynth
