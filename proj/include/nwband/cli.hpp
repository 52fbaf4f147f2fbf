#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nwband {

/// Exit codes of the command-line entry point.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand (simulate, bench, fit, predict, theory). `args`
/// excludes the program name. Returns kExitUsage for invalid flags,
/// kExitFailure for ingestion, preprocessing or numerical failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nwband
