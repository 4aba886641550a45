#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "emclt/model.hpp"
#include "emclt/rng.hpp"
#include "emclt/schedules.hpp"

namespace emclt {

inline constexpr double kDivergenceBound = 1e12;

struct ChainDiverged : std::runtime_error {
  ChainDiverged(std::uint64_t chain, std::uint64_t step, double value);
  std::uint64_t chain;
  std::uint64_t step;
};

/// theta + eta b(theta) + sigma (sqrt(eta) xi). Throws ChainDiverged (chain 0) on
/// non-finite or runaway output, with `step` as the reported index.
std::vector<double> em_step(std::span<const double> theta, const SDEModel& model, double eta,
                            std::span<const double> xi, std::uint64_t step = 0);

struct FixedInit { std::vector<double> x; };
struct UniformChoiceInit { std::vector<double> choices; };
struct CustomInit { std::vector<std::vector<double>> states; };
using InitSpec = std::variant<FixedInit, UniformChoiceInit, CustomInit>;

/// The paper's initial law: uniform over {-8, 2, 12}.
InitSpec paper_init();

/// Evaluations of a Poisson solution along the trajectory (d = 1).
struct PhiHooks {
  std::function<double(double)> phi, dphi, d2phi;
  TestFunction h;
  double pi_h = 0.0;
};

struct Recorders {
  bool running_sum = true;
  std::vector<double> snapshot_grid;
  std::vector<double> moment_powers;
  std::vector<std::size_t> moment_steps;
  bool terminal_state = false;
  std::optional<PhiHooks> phi;
  /// Values of n at which the decomposition tallies are captured.
  std::vector<std::size_t> phi_steps;
};

struct EnsembleConfig {
  EnsembleConfig(SDEModel m, StepSchedule s) : model(std::move(m)), schedule(std::move(s)) {}

  SDEModel model;
  StepSchedule schedule;
  std::vector<TestFunction> test_functions;
  std::size_t chains = 1;
  std::size_t steps = 1;
  std::uint64_t seed = 0;
  std::uint64_t first_chain = 0;
  InitSpec init = FixedInit{{0.0}};
  Recorders recorders;
  std::size_t burn_in = 0;
  std::size_t workers = 0;
  std::uint64_t step_budget = 5'000'000'000ull;
  /// Test hook: force xi = 0.
  bool zero_noise = false;
  std::filesystem::path checkpoint_file;
  std::size_t checkpoint_every = 1'000'000;
  /// Test hook: return after this many steps as if interrupted.
  std::optional<std::size_t> stop_after;
};

/// Raw (unnormalized) sums along a chain up to step n; see analysis.
struct PhiTally {
  std::size_t n = 0;
  double stat = 0.0;        // sum (h(theta_k) - pi_h)
  double martingale = 0.0;  // sum Z_{k+1}
  double r0 = 0.0;          // sum eta^{-1} (phi(theta_{k+1}) - phi(theta_k))
  double r1 = 0.0;
  double r2 = 0.0;
  double z_abs_max = 0.0;
  double z_sq = 0.0;

  bool operator==(const PhiTally&) const = default;
};

struct ChainAccumulator {
  std::uint64_t chain_id = 0;
  std::vector<double> sum_h;
  /// snapshots[j * G + g]: partial sum of h_j up to index [n t_g].
  std::vector<double> snapshots;
  std::vector<double> terminal;
  /// moments[p * M + m]: |theta_k|^{p} at moment_steps[m].
  std::vector<double> moments;
  std::vector<PhiTally> phi;
  bool diverged = false;
  std::uint64_t diverged_at = 0;

  bool operator==(const ChainAccumulator&) const = default;
};

struct EnsembleResult {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t dim = 1;
  std::vector<std::string> test_functions;
  std::vector<double> snapshot_grid;
  std::vector<std::size_t> snapshot_index;
  std::vector<double> moment_powers;
  std::vector<std::size_t> moment_steps;
  std::vector<std::size_t> phi_steps;
  std::vector<ChainAccumulator> chains;
  bool complete = true;

  std::vector<std::uint64_t> diverged_chains() const;
  /// Ensemble mean of |theta_k|^p over surviving chains, per moment step.
  std::vector<double> moment_mean(std::size_t power_index) const;
  /// Folds another partition of the same ensemble in; result is ordered by chain id.
  void merge(const EnsembleResult& other);
};

/// Hash of everything that determines per-chain output (not the chain range or workers).
std::string ensemble_hash(const EnsembleConfig& config);

EnsembleResult run_ensemble(const EnsembleConfig& config);

/// Splits a Brownian increment dw over duration h into m bridge-consistent pieces.
void bridge_increments(double dw, double h, std::size_t m, const RandomStream& stream,
                       std::uint64_t offset, std::span<double> out);

/// Refined EM over [t_start, t_end] with m uniform substeps. If `coarse_increment`
/// is non-empty it is refined by Brownian bridge draws from `stream`; otherwise
/// fresh increments are drawn. Stream indices start at `offset`.
std::vector<double> fine_reference(const SDEModel& model, double t_start,
                                   std::span<const double> x_start, double t_end, std::size_t m,
                                   std::span<const double> coarse_increment,
                                   const RandomStream& stream, std::uint64_t offset = 0);

void write_ensemble_csv(const EnsembleResult& result, const std::filesystem::path& path);

}  // namespace emclt
