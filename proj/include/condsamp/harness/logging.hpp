#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace condsamp {

/// Level named by COND_SAMPLER_LOG (error | warn | info | debug); warn when unset or unknown.
inline spdlog::level::level_enum log_level_from_env() {
  const char* v = std::getenv("COND_SAMPLER_LOG");
  if (!v) return spdlog::level::warn;
  const std::string s(v);
  if (s == "error") return spdlog::level::err;
  if (s == "warn") return spdlog::level::warn;
  if (s == "info") return spdlog::level::info;
  if (s == "debug") return spdlog::level::debug;
  return spdlog::level::warn;
}

/// Thread-safe stderr logger shared by the harness.
inline std::shared_ptr<spdlog::logger> harness_logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::get("condsamp");
    if (!l) l = spdlog::stderr_color_mt("condsamp");
    l->set_level(log_level_from_env());
    l->set_pattern("[%l] %v");
    return l;
  }();
  return log;
}

}  // namespace condsamp
