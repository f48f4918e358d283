#include "halfsync/util/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace halfsync::util {

void init_logging() {
  auto logger = spdlog::get("halfsync");
  if (!logger) logger = spdlog::stderr_color_mt("halfsync");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("HALFSYNC_LOG")) {
    const std::string_view v(env);
    if (v == "error") {
      level = spdlog::level::err;
    } else if (v == "debug") {
      level = spdlog::level::debug;
    }
  }
  spdlog::set_level(level);
}

}  // namespace halfsync::util
