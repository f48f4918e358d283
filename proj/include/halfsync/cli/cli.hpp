#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace halfsync::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses `args` (program name excluded) and runs one subcommand:
/// gen-data, train, evaluate, roc, bench-scaling, estimate, capacity.
/// Returns 0 on success, 1 on a usage or configuration error, 2 on a
/// runtime, data, communication or numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace halfsync::cli
