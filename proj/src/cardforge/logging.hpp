#pragma once

#include <spdlog/spdlog.h>

namespace cardforge {

// Shared stderr logger. Lines are key=value structured; the level comes from
// CARDFORGE_LOG_LEVEL (trace, debug, info, warn, error, off).
spdlog::logger& log();

}  // namespace cardforge
