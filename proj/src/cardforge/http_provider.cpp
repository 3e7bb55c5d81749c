#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "cardforge/http_provider.hpp"

#include <cstdlib>

#include "cardforge/hashing.hpp"
#include "httplib.h"

namespace cardforge {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::config, std::string(kApiBaseEnv) + " must be an absolute http(s) URL: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

TransportReply post_json(const HttpEndpoint& endpoint, const std::string& route, const std::string& body) {
  auto url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);
  httplib::Headers headers{{"Authorization", "Bearer " + endpoint.api_key}};
  auto res = client.Post(url.path + route, headers, body, "application/json");
  if (!res) {
    return {0, {}, "network error: " + httplib::to_string(res.error())};
  }
  return {res->status, res->body, res->status == 200 ? std::string() : res->body.substr(0, 200)};
}

}  // namespace

HttpEndpoint endpoint_from_env() {
  HttpEndpoint e;
  const char* key = std::getenv(kApiKeyEnv);
  if (!key || !*key) {
    throw Error(ErrorKind::config, std::string("remote provider requires the ") + kApiKeyEnv +
                                       " environment variable", kApiKeyEnv);
  }
  e.api_key = key;
  if (const char* base = std::getenv(kApiBaseEnv); base && *base) e.base_url = base;
  split_url(e.base_url);
  return e;
}

std::optional<std::string> parse_chat_reply(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) return std::nullopt;
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

TransportReply HttpChatTransport::send(const CompletionRequest& request) {
  ordered_json body;
  body["model"] = request.model_id;
  ordered_json messages = ordered_json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
  body["messages"] = messages;
  body["temperature"] = request.sampling.temperature;
  body["max_tokens"] = request.sampling.max_tokens;
  if (request.sampling.seed) body["seed"] = *request.sampling.seed;

  auto reply = post_json(endpoint_, "/chat/completions", canonical_dump(body));
  if (reply.status != 200) return reply;
  auto content = parse_chat_reply(reply.text);
  if (!content) {
    return {TransportReply::kMalformedReply, {}, "missing choices[0].message.content"};
  }
  return {200, *content, {}};
}

TransportReply post_embeddings(const HttpEndpoint& endpoint, const std::string& model,
                               const std::vector<std::string>& texts) {
  ordered_json body;
  body["model"] = model;
  body["input"] = texts;
  return post_json(endpoint, "/embeddings", canonical_dump(body));
}

std::vector<std::vector<double>> parse_embedding_reply(const std::string& body, std::size_t expected) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("data") || !j["data"].is_array()) {
    throw Error(ErrorKind::provider_malformed, "embedding reply lacks a data array");
  }
  std::vector<std::vector<double>> out(expected);
  std::vector<bool> seen(expected, false);
  for (const auto& item : j["data"]) {
    if (!item.contains("index") || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw Error(ErrorKind::provider_malformed, "embedding entry lacks index or embedding");
    }
    auto idx = item["index"].get<std::size_t>();
    if (idx >= expected || seen[idx]) {
      throw Error(ErrorKind::provider_malformed, "embedding index out of range or repeated");
    }
    seen[idx] = true;
    out[idx] = item["embedding"].get<std::vector<double>>();
  }
  for (bool s : seen) {
    if (!s) throw Error(ErrorKind::provider_malformed, "embedding reply is missing entries");
  }
  return out;
}

}  // namespace cardforge
