#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "emclt/config.hpp"
#include "emclt/schedules.hpp"

namespace emclt {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitAuditViolation = 2 };

const std::vector<std::string>& experiment_names();

/// Runs the configured experiment, writes its artifacts and MANIFEST.json into
/// cfg.out_dir(), and returns the process exit code. Errors propagate as exceptions.
int run_experiment(const RunConfig& cfg, std::ostream& log);

/// Stable per-label seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& label);

/// a(t) = t^{1+beta} for power schedules; the finite-n ratio T_[nt]/T_n otherwise.
std::vector<double> fclt_time_change(const StepSchedule& schedule, std::size_t n,
                                     std::span<const double> t_grid, bool limit = true);

/// {1, 2, 5} x 10^j below n, then n.
std::vector<std::size_t> decade_checkpoints(std::size_t n);

}  // namespace emclt
