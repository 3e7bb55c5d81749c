#include "cardforge/gateway.hpp"

#include <cmath>
#include <exception>
#include <thread>

#include "cardforge/fileio.hpp"
#include "cardforge/hashing.hpp"
#include "cardforge/logging.hpp"
#include "cardforge/rng.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

std::string CompletionRequest::key() const {
  ordered_json fields = ordered_json::array({provider_id, model_id, system_prompt, user_prompt,
                                             sampling.temperature, sampling.max_tokens});
  fields.push_back(sampling.seed ? ordered_json(*sampling.seed) : ordered_json());
  return content_hash(fields);
}

ReplyClass classify_status(int status) {
  if (status >= 200 && status < 300) return ReplyClass::ok;
  if (status == 0 || status == 408 || status == 429 || (status >= 500 && status < 600)) return ReplyClass::transient;
  if (status == 401 || status == 403) return ReplyClass::auth;
  if (status == TransportReply::kMalformedReply) return ReplyClass::malformed;
  return ReplyClass::fatal;
}

std::chrono::milliseconds RetryPolicy::ceiling(int retry) const {
  double ms = static_cast<double>(base_delay.count()) * std::pow(factor, std::max(0, retry - 1));
  double cap = static_cast<double>(max_delay.count());
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::min(ms, cap)));
}

RetryOutcome run_with_retry(const RetryPolicy& policy, const Sleeper& sleeper, std::uint64_t jitter_seed,
                            const std::function<TransportReply()>& attempt, const std::string& what) {
  Rng jitter(jitter_seed);
  const int cap = std::max(1, policy.max_attempts);
  TransportReply last;
  for (int n = 1; n <= cap; ++n) {
    last = attempt();
    switch (classify_status(last.status)) {
      case ReplyClass::ok:
        return {std::move(last), n};
      case ReplyClass::auth:
        throw Error(ErrorKind::provider_auth,
                    what + ": authentication failed (status " + std::to_string(last.status) + ") " + last.detail);
      case ReplyClass::malformed:
        throw Error(ErrorKind::provider_malformed, what + ": malformed provider response " + last.detail);
      case ReplyClass::fatal:
        throw Error(ErrorKind::provider_exhausted,
                    what + ": provider rejected the request (status " + std::to_string(last.status) + ") " +
                        last.detail);
      case ReplyClass::transient:
        break;
    }
    if (n == cap) break;
    auto ceiling = policy.ceiling(n);
    auto wait = policy.full_jitter
                    ? std::chrono::milliseconds(static_cast<std::int64_t>(jitter.unit() * ceiling.count()))
                    : ceiling;
    log().debug("event=retry what={} attempt={} status={} wait_ms={}", what, n, last.status, wait.count());
    sleeper(wait);
  }
  throw Error(ErrorKind::provider_exhausted, what + ": gave up after " + std::to_string(cap) +
                                                 " attempts (last status " + std::to_string(last.status) + ") " +
                                                 last.detail);
}

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) fileio::ensure_directory(*dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    auto it = memory_.find(key);
    if (it != memory_.end()) return it->second;
  }
  if (!dir_) return std::nullopt;
  auto path = *dir_ / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(fileio::read_file(path));
    if (j.at("key").get<std::string>() != key) return std::nullopt;
    std::string text = j.at("text").get<std::string>();
    std::lock_guard lock(mutex_);
    memory_.emplace(key, text);
    return text;
  } catch (const std::exception& e) {
    log().warn("event=cache_corrupt key={} error=\"{}\"", key, e.what());
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const std::string& text) {
  {
    std::lock_guard lock(mutex_);
    memory_[key] = text;
  }
  if (!dir_) return;
  ordered_json j;
  j["key"] = key;
  j["text"] = text;
  fileio::write_file_atomic(*dir_ / (key + ".json"), canonical_dump(j) + "\n");
}

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)),
      cache_(options_.cache_dir),
      window_(std::make_unique<std::counting_semaphore<>>(std::max(1, options_.max_in_flight))) {
  if (options_.max_in_flight < 1) {
    throw Error(ErrorKind::config, "max_in_flight must be at least 1");
  }
  if (!options_.sleeper) {
    options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

void Gateway::register_transport(const std::string& provider_id, std::shared_ptr<Transport> transport) {
  transports_[provider_id] = std::move(transport);
}

bool Gateway::has_transport(const std::string& provider_id) const { return transports_.count(provider_id) != 0; }

Transport& Gateway::transport_for(const std::string& provider_id) {
  auto it = transports_.find(provider_id);
  if (it == transports_.end()) {
    throw Error(ErrorKind::config, "no transport registered for provider '" + provider_id + "'");
  }
  return *it->second;
}

CompletionResult Gateway::complete(const CompletionRequest& request) {
  std::string key = request.key();
  if (auto hit = cache_.get(key)) {
    return {key, *hit, true, 1};
  }
  return complete_uncached(request, key);
}

CompletionResult Gateway::complete_uncached(const CompletionRequest& request, const std::string& key) {
  if (request.system_prompt.empty() && request.user_prompt.empty()) {
    throw Error(ErrorKind::invalid_argument, "completion request has empty prompts");
  }
  Transport& transport = transport_for(request.provider_id);
  window_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*window_};

  auto outcome = run_with_retry(
      options_.retry, options_.sleeper, digest_u64(key),
      [&] {
        ++transport_calls_;
        return transport.send(request);
      },
      "provider " + request.provider_id);
  std::string text = text::sanitize_utf8(outcome.reply.text);
  cache_.put(key, text);
  return {key, std::move(text), false, outcome.attempts};
}

std::vector<BatchOutcome> Gateway::complete_batch(std::span<const CompletionRequest> requests, int max_in_flight,
                                                  bool fail_fast) {
  if (max_in_flight < 1) {
    throw Error(ErrorKind::invalid_argument, "max_in_flight must be at least 1");
  }
  std::vector<BatchOutcome> out(requests.size());
  std::vector<std::string> keys(requests.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    keys[i] = requests[i].key();
    if (auto hit = cache_.get(keys[i])) {
      out[i].result = CompletionResult{keys[i], *hit, true, 1};
    } else {
      pending.push_back(i);
    }
  }

  std::atomic<bool> cancelled{false};
  std::size_t workers = std::min<std::size_t>(pending.size(), static_cast<std::size_t>(max_in_flight));
  std::atomic<std::size_t> next{0};
  std::exception_ptr crash;
  std::mutex crash_mutex;

  auto worker = [&] {
    while (true) {
      std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      std::size_t i = pending[slot];
      if (cancelled.load()) {
        out[i].error = Error(ErrorKind::precondition, "cancelled after an earlier failure in the batch");
        continue;
      }
      try {
        out[i].result = complete_uncached(requests[i], keys[i]);
      } catch (const Error& e) {
        out[i].error = e;
        if (fail_fast) cancelled = true;
      } catch (...) {
        std::lock_guard lock(crash_mutex);
        if (!crash) crash = std::current_exception();
        cancelled = true;
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (crash) std::rethrow_exception(crash);
  return out;
}

}  // namespace cardforge
