#pragma once

#include <functional>
#include <set>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "metsfuse/error.hpp"

namespace metsfuse {

/// Reads optional keys of a JSON object into existing values and rejects keys nobody read.
class JsonFields {
 public:
  JsonFields(const nlohmann::json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", context_));
  }

  template <typename T>
  JsonFields& read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", context_, key, e.what()));
    }
    return *this;
  }

  /// Calls fn with the nested object when the key is present.
  JsonFields& nested(const char* key, const std::function<void(const nlohmann::json&, const std::string&)>& fn) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) fn(*it, context_ + "." + key);
    return *this;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", context_, k));
    }
  }

 private:
  const nlohmann::json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace metsfuse
