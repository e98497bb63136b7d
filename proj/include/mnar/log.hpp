#pragma once

#include <spdlog/spdlog.h>

namespace mnar::log {

using spdlog::debug;
using spdlog::error;
using spdlog::info;
using spdlog::warn;

// Reads the level from MNAR_LOG (trace, debug, info, warn, error, off);
// defaults to warn. Output goes to stderr.
void init_from_env();

}  // namespace mnar::log
