#include "metsfuse/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_sinks.h>

namespace metsfuse {

std::shared_ptr<spdlog::logger> logger() {
  static const auto instance = [] {
    auto l = std::make_shared<spdlog::logger>("metsfuse", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("METSFUSE_LOG");
    l->set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
    return l;
  }();
  return instance;
}

}  // namespace metsfuse
