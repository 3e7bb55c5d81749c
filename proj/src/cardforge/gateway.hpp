#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cardforge/error.hpp"

namespace cardforge {

struct SamplingParams {
  double temperature = 0.7;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;
};

struct CompletionRequest {
  std::string provider_id;
  std::string model_id;
  std::string system_prompt;
  std::string user_prompt;
  SamplingParams sampling;

  /// Content hash over every field; names the cache entry.
  std::string key() const;
};

struct CompletionResult {
  std::string request_key;
  std::string text;
  bool cached = false;
  int attempts = 1;
};

// Transport status codes follow HTTP: 200 success, 401/403 authentication,
// 408/429/5xx transient. 0 is a network failure (transient) and
// kMalformedReply marks a body the transport could not interpret.
struct TransportReply {
  static constexpr int kMalformedReply = -1;

  int status = 200;
  std::string text;
  std::string detail;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const CompletionRequest& request) = 0;
};

enum class ReplyClass { ok, transient, auth, malformed, fatal };

ReplyClass classify_status(int status);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  std::chrono::milliseconds max_delay{30000};
  bool full_jitter = true;

  /// Upper bound for the wait before retry `retry` (1-based):
  /// min(max_delay, base_delay * factor^(retry-1)).
  std::chrono::milliseconds ceiling(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RetryOutcome {
  TransportReply reply;
  int attempts = 0;
};

/// Calls `attempt` until it succeeds, fails fatally or the attempt cap is hit.
/// With full jitter each wait is uniform in [0, ceiling], drawn from a stream
/// seeded by `jitter_seed`.
RetryOutcome run_with_retry(const RetryPolicy& policy, const Sleeper& sleeper, std::uint64_t jitter_seed,
                            const std::function<TransportReply()>& attempt, const std::string& what);

// Directory of `<key>.json` files plus an in-memory layer. Writes go through a
// temporary file and rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& text);

  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  std::optional<std::filesystem::path> dir_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::string> memory_;
};

struct GatewayOptions {
  RetryPolicy retry;
  // Global bound on concurrently executing uncached requests.
  int max_in_flight = 8;
  std::optional<std::filesystem::path> cache_dir;
  Sleeper sleeper;  // defaults to std::this_thread::sleep_for
};

struct BatchOutcome {
  std::optional<CompletionResult> result;
  std::optional<Error> error;

  bool ok() const { return result.has_value(); }
};

class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});

  void register_transport(const std::string& provider_id, std::shared_ptr<Transport> transport);
  bool has_transport(const std::string& provider_id) const;

  CompletionResult complete(const CompletionRequest& request);

  /// Results line up index-for-index with `requests`. Per-item failures are
  /// reported positionally; with `fail_fast` the first failure cancels
  /// items not yet started.
  std::vector<BatchOutcome> complete_batch(std::span<const CompletionRequest> requests, int max_in_flight,
                                           bool fail_fast = false);

  /// Number of Transport::send invocations so far (including retries).
  std::uint64_t transport_calls() const { return transport_calls_.load(); }

  int max_in_flight() const { return options_.max_in_flight; }
  const RetryPolicy& retry_policy() const { return options_.retry; }

 private:
  CompletionResult complete_uncached(const CompletionRequest& request, const std::string& key);
  Transport& transport_for(const std::string& provider_id);

  GatewayOptions options_;
  std::map<std::string, std::shared_ptr<Transport>> transports_;
  ResponseCache cache_;
  std::atomic<std::uint64_t> transport_calls_{0};
  std::unique_ptr<std::counting_semaphore<>> window_;
};

}  // namespace cardforge
