#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace fguap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand (gen-data, train, attack, eval, transfer, redundancy).
/// `args` excludes the program name. Returns the process exit code: 0 when
/// every output was written, 2 for usage errors, 1 for runtime failures.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace fguap::cli
