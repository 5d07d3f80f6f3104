#pragma once

// Run configuration shared by the command-line tool. A JSON file supplies
// defaults, command-line flags override it; unknown keys are rejected.

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "matteforge/error.hpp"
#include "matteforge/guidance.hpp"
#include "matteforge/metrics.hpp"
#include "matteforge/parallel.hpp"

namespace matteforge {

inline constexpr const char* kSeedEnvVar = "MATTEFORGE_SEED";

struct Config {
  std::uint64_t seed = 0;
  ThicknessSchedule schedule;
  MetricParams metrics;
  unsigned jobs = default_jobs();

  void validate() const {
    schedule.validate();
    if (!(metrics.sigma > 0.0)) throw ContractError("sigma must be positive");
    if (!(metrics.theta >= 0.0)) throw ContractError("theta must be non-negative");
    if (metrics.levels < 1) throw ContractError("levels must be >= 1");
    if (jobs < 1) throw ContractError("jobs must be >= 1");
  }
};

namespace detail {

template <typename T>
T config_value(const nlohmann::json& j, const std::string& key) {
  const bool ok = std::is_floating_point_v<T> ? j.is_number()
                  : std::is_unsigned_v<T>     ? j.is_number_unsigned()
                                              : j.is_number_integer();
  if (!ok) throw ContractError("config key '" + key + "' has the wrong type");
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ContractError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

// Overlays the keys of a JSON object onto `base`.
inline Config apply_config_json(Config base, const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      base.seed = detail::config_value<std::uint64_t>(value, key);
    } else if (key == "t_start") {
      base.schedule.t_start = detail::config_value<double>(value, key);
    } else if (key == "t_end") {
      base.schedule.t_end = detail::config_value<double>(value, key);
    } else if (key == "decay_steps") {
      base.schedule.decay_steps = detail::config_value<std::int64_t>(value, key);
    } else if (key == "hold_steps") {
      base.schedule.hold_steps = detail::config_value<std::int64_t>(value, key);
    } else if (key == "sigma") {
      base.metrics.sigma = detail::config_value<double>(value, key);
    } else if (key == "theta") {
      base.metrics.theta = detail::config_value<double>(value, key);
    } else if (key == "levels") {
      base.metrics.levels = detail::config_value<int>(value, key);
    } else if (key == "jobs") {
      base.jobs = detail::config_value<unsigned>(value, key);
    } else {
      throw ContractError("unknown config key '" + key + "'");
    }
  }
  base.validate();
  return base;
}

inline std::optional<std::uint64_t> parse_seed(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 0);
  if (errno != 0 || end == nullptr || *end != '\0' || text[0] == '-') return std::nullopt;
  return static_cast<std::uint64_t>(v);
}

// Seed from the environment, if set and well-formed.
inline std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv(kSeedEnvVar);
  if (v == nullptr) return std::nullopt;
  const auto seed = parse_seed(v);
  if (!seed) throw ContractError(std::string(kSeedEnvVar) + " is not an unsigned integer");
  return seed;
}

}  // namespace matteforge
