#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wgflow/config.hpp"
#include "wgflow/dynamic_action.hpp"

namespace wgf {

/// Deterministic decimal formatting used for every CSV cell.
std::string format_double(double v);

void write_density_csv(const std::string& path, const GridDensity& rho);
void write_curve_csv(const std::string& path, const DiscreteCurve& curve);

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 invariant failure, 2 config error
  std::vector<std::string> failures;
  std::string out_dir;
};

/// Runs one experiment subcommand: gamma-sweep, rate, w2, semigroup, jko,
/// particles or norm-check. Writes the subcommand CSV plus a run manifest
/// into the output directory; failures additionally produce failures.txt.
RunResult run_subcommand(const std::string& subcommand, const ExperimentConfig& config,
                         const std::optional<std::string>& out_override,
                         const std::optional<std::uint64_t>& seed_override);

}  // namespace wgf
