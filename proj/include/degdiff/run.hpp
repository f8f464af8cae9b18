#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "degdiff/config.hpp"

namespace degdiff {

enum ExitCode : int { kOk = 0, kConfigError = 1, kSolverFailure = 2, kThresholdViolation = 3 };

struct RunOptions {
  /// Turn acceptance-threshold violations into exit code 3.
  bool check_thresholds = false;
  int jobs = 1;
  /// Overrides [output] path.
  std::optional<std::string> out;
};

/// Dispatches a validated config, writes its CSV, and prints a one-line
/// summary to `out`. Errors are reported on `err` and mapped to exit codes.
int run(const config::RunConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace degdiff
