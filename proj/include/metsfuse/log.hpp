#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace metsfuse {

/// Library logger writing to stderr. Level comes from METSFUSE_LOG
/// (trace, debug, info, warn, error, off); default "warn".
std::shared_ptr<spdlog::logger> logger();

}  // namespace metsfuse
