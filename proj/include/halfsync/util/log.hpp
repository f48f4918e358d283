#pragma once

#include <spdlog/spdlog.h>

namespace halfsync::util {

/// Configures the process logger from HALFSYNC_LOG (error, info, debug).
/// Unset or unrecognised values fall back to info.
void init_logging();

}  // namespace halfsync::util
