#include "cardforge/logging.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include <cstdlib>
#include <memory>

namespace cardforge {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto l = std::make_shared<spdlog::logger>("cardforge", sink);
    l->set_pattern("ts=%Y-%m-%dT%H:%M:%S.%e level=%l %v");
    if (const char* level = std::getenv("CARDFORGE_LOG_LEVEL")) {
      l->set_level(spdlog::level::from_str(level));
    } else {
      l->set_level(spdlog::level::info);
    }
    return l;
  }();
  return *logger;
}

}  // namespace cardforge
