#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "cardforge/gateway.hpp"

namespace cardforge {

inline constexpr const char* kApiKeyEnv = "CARDFORGE_API_KEY";
inline constexpr const char* kApiBaseEnv = "CARDFORGE_API_BASE";
inline constexpr const char* kDefaultApiBase = "https://api.openai.com/v1";

struct HttpEndpoint {
  std::string base_url = kDefaultApiBase;
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// Reads CARDFORGE_API_KEY / CARDFORGE_API_BASE. A missing key is a config
/// error that names the variable.
HttpEndpoint endpoint_from_env();

/// OpenAI-style `POST {base}/chat/completions`.
class HttpChatTransport : public Transport {
 public:
  explicit HttpChatTransport(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  TransportReply send(const CompletionRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

/// OpenAI-style `POST {base}/embeddings`. Returns the raw reply; the body is
/// parsed by parse_embedding_reply.
TransportReply post_embeddings(const HttpEndpoint& endpoint, const std::string& model,
                               const std::vector<std::string>& texts);

/// Extracts `data[i].embedding` in index order; throws provider_malformed.
std::vector<std::vector<double>> parse_embedding_reply(const std::string& body, std::size_t expected);

/// Extracts `choices[0].message.content`; nullopt when absent.
std::optional<std::string> parse_chat_reply(const std::string& body);

}  // namespace cardforge
