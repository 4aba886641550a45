#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "emclt/common.hpp"

namespace emclt {

struct PowerSteps { double beta; };
struct LogOverK {};
struct HarmonicSteps {};
struct ScaledPowerSteps { double c0; double beta; };
/// Explicit values; indices past the table repeat the last entry.
struct TableSteps { std::vector<double> values; };

class StepSchedule {
 public:
  using Kind = std::variant<PowerSteps, LogOverK, HarmonicSteps, ScaledPowerSteps, TableSteps>;

  explicit StepSchedule(Kind kind, std::string description = {});

  static StepSchedule power(double beta);
  static StepSchedule log_over_k();
  static StepSchedule harmonic();
  static StepSchedule scaled_power(double c0, double beta);
  static StepSchedule table(std::vector<double> values);

  /// eta_k for k >= 1.
  double eta(std::uint64_t k) const;

  const Kind& kind() const noexcept { return kind_; }
  const std::string& description() const noexcept { return description_; }
  /// Canonical text form, e.g. "power(0.75)".
  std::string name() const;

 private:
  Kind kind_;
  std::string description_;
};

class SchedulePrefix {
 public:
  SchedulePrefix() = default;

  std::size_t n_max() const noexcept { return eta_.size() - 1; }
  double eta(std::size_t k) const { return eta_.at(k); }
  double t(std::size_t k) const { return t_.at(k); }
  double T(std::size_t k) const { return T_.at(k); }
  /// Index 0 holds a placeholder (eta) or zero (t, T).
  std::span<const double> etas() const noexcept { return eta_; }
  std::span<const double> ts() const noexcept { return t_; }
  std::span<const double> Ts() const noexcept { return T_; }

 private:
  friend SchedulePrefix build_prefix(const StepSchedule&, std::size_t);
  std::vector<double> eta_, t_, T_;
};

SchedulePrefix build_prefix(const StepSchedule& schedule, std::size_t n_max);

struct StepTotals {
  double t = 0.0;
  double T = 0.0;
};
/// Compensated t_n and T_n without storing the arrays.
StepTotals step_totals(const StepSchedule& schedule, std::uint64_t n);

/// Euler-Maclaurin evaluation of sum_{k<=n} k^p, exact head for small k.
double power_sum(double p, std::uint64_t n);

double scaling_number(const SchedulePrefix& prefix, std::size_t n);

std::vector<double> time_change(const SchedulePrefix& prefix, std::size_t n,
                                std::span<const double> t_grid);

struct ConditionVerdict {
  std::string condition;
  Verdict verdict = Verdict::Inconclusive;
  std::optional<std::uint64_t> witness;
  std::string note;
};

struct AuditRow {
  std::uint64_t k;
  double eta, t, T, critical, inverse_eta_sqrt_T;
};

struct AssumptionReport {
  std::string schedule;
  std::uint64_t n_max = 0;
  double epsilon = 0.0;
  double eta_1 = 0.0;
  std::optional<std::uint64_t> below_one_from;

  bool monotone_ok = true;
  std::optional<std::uint64_t> monotone_witness;

  double divergence_trend = 0.0;
  double divergence_block_ratio = 0.0;

  double c_fit = 0.0;
  std::uint64_t c_fit_argmax = 0;

  double tail_partial_sum = 0.0;
  double tail_estimate = 0.0;
  double tail_block_ratio = 0.0;

  std::vector<AuditRow> checkpoints;
  double critical_trend = 0.0;

  std::vector<ConditionVerdict> verdicts;

  const ConditionVerdict& verdict(std::string_view name) const;
  bool any_violation() const;
};

namespace condition {
inline constexpr const char* kNonIncreasing = "non_increasing";
inline constexpr const char* kBelowOne = "eventually_below_one";
inline constexpr const char* kDivergent = "steps_diverge";
inline constexpr const char* kDecrementBound = "step_decrement_bound";
inline constexpr const char* kSummable = "power_summable";
inline constexpr const char* kCritical = "critical_ratio_vanishes";
}  // namespace condition

AssumptionReport audit_assumptions(const StepSchedule& schedule, std::uint64_t n_max,
                                   double epsilon);

struct ATrendReport {
  std::vector<double> delta;
  std::vector<double> tau;
  std::vector<double> value;
  Verdict verdict = Verdict::Inconclusive;
};

ATrendReport audit_a_condition(const std::function<double(double)>& a, double horizon, double C,
                               std::span<const double> delta_grid);

}  // namespace emclt
