#pragma once

#include <cstdlib>
#include <memory>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace emoclim {

// Process-wide logger writing to stderr. The level comes from EMOCLIM_LOG
// (error | info | debug); anything else falls back to info.
inline spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto log = spdlog::stderr_color_st("emoclim");
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::info);
    if (const char* env = std::getenv("EMOCLIM_LOG")) {
      std::string_view level{env};
      if (level == "error") {
        log->set_level(spdlog::level::err);
      } else if (level == "debug") {
        log->set_level(spdlog::level::debug);
      }
    }
    return log;
  }();
  return *instance;
}

}  // namespace emoclim
