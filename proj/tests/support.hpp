#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>
#include <cmath>

#include "cardforge/gateway.hpp"
#include "cardforge/mock_provider.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cardforge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

// Wraps the mock and lets a test rewrite or fail individual requests.
class ScriptedTransport : public cardforge::Transport {
 public:
  using Hook = std::function<std::optional<cardforge::TransportReply>(const cardforge::CompletionRequest&)>;

  explicit ScriptedTransport(Hook hook = {}) : hook_(std::move(hook)) {}

  cardforge::TransportReply send(const cardforge::CompletionRequest& request) override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      requests.push_back(request);
    }
    if (hook_) {
      if (auto r = hook_(request)) {
        record(*r);
        return *r;
      }
    }
    cardforge::TransportReply r{200, cardforge::mock_complete(request), {}};
    record(r);
    return r;
  }

  std::vector<cardforge::CompletionRequest> requests;
  std::vector<cardforge::TransportReply> replies;

 private:
  void record(const cardforge::TransportReply& r) {
    std::lock_guard<std::mutex> lock(mutex_);
    replies.push_back(r);
  }
  Hook hook_;
  std::mutex mutex_;
};

inline cardforge::GatewayOptions quiet_gateway(std::optional<std::filesystem::path> cache = std::nullopt) {
  cardforge::GatewayOptions o;
  o.cache_dir = std::move(cache);
  o.sleeper = [](std::chrono::milliseconds) {};
  o.retry.base_delay = std::chrono::milliseconds(1);
  return o;
}

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = n(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace testing
