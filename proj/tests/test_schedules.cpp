#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "emclt/schedules.hpp"

using namespace emclt;

namespace {

// Independent oracle: pairwise (binary split) summation in long double.
long double split_sum(std::uint64_t lo, std::uint64_t hi, long double p) {
  if (hi - lo < 16) {
    long double s = 0;
    for (std::uint64_t k = lo; k < hi; ++k) s += std::pow(static_cast<long double>(k), p);
    return s;
  }
  const std::uint64_t mid = lo + (hi - lo) / 2;
  return split_sum(lo, mid, p) + split_sum(mid, hi, p);
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST(Prefix, PowerT4MatchesDirectSum) {
  const auto p = build_prefix(StepSchedule::power(0.75), 4);
  const double direct = 1.0 + std::pow(2.0, 0.75) + std::pow(3.0, 0.75) + std::pow(4.0, 0.75);
  EXPECT_NEAR(p.T(4), direct, 1e-14);
  EXPECT_NEAR(p.T(4), 7.7897, 5e-5);
}

TEST(Prefix, ConstantTable) {
  const auto p = build_prefix(StepSchedule::table({1, 1, 1}), 3);
  for (std::size_t k = 1; k <= 3; ++k) {
    EXPECT_EQ(p.t(k), double(k));
    EXPECT_EQ(p.T(k), double(k));
  }
}

TEST(Prefix, HarmonicClosedForm) {
  const std::size_t n = 100000;
  const auto p = build_prefix(StepSchedule::harmonic(), n);
  for (std::size_t k : {1ul, 10ul, 1000ul, n}) EXPECT_EQ(p.T(k), double(k) * (k + 1) / 2.0);
}

TEST(Prefix, TableRepeatsLastValue) {
  const auto s = StepSchedule::table({0.5, 0.25});
  EXPECT_EQ(s.eta(1), 0.5);
  EXPECT_EQ(s.eta(2), 0.25);
  EXPECT_EQ(s.eta(1000), 0.25);
}

TEST(Prefix, NonpositiveStepNamesIndex) {
  const auto s = StepSchedule::table({0.5, 0.5, -0.1});
  try {
    build_prefix(s, 5);
    FAIL() << "expected ScheduleInvalid";
  } catch (const ScheduleInvalid& e) {
    EXPECT_EQ(e.index, 3u);
  }
}

TEST(Prefix, RejectsBadParameters) {
  EXPECT_THROW(StepSchedule::power(0.0), std::invalid_argument);
  EXPECT_THROW(StepSchedule::power(1.5), std::invalid_argument);
  EXPECT_THROW(StepSchedule::table({}), std::invalid_argument);
  EXPECT_THROW(build_prefix(StepSchedule::harmonic(), 0), std::invalid_argument);
}

TEST(Prefix, PowerSumAgreesWithBinarySplitTo1e7) {
  const auto s = StepSchedule::power(0.75);
  for (std::uint64_t n : {1000ull, 100000ull, 10000000ull}) {
    const long double oracle = split_sum(1, n + 1, 0.75L);
    const double looped = step_totals(s, n).T;
    EXPECT_NEAR(looped / static_cast<double>(oracle), 1.0, 1e-12) << n;
    EXPECT_NEAR(power_sum(0.75, n) / static_cast<double>(oracle), 1.0, 1e-12) << n;
  }
}

TEST(Prefix, StepTotalsMatchPrefix) {
  const auto s = StepSchedule::log_over_k();
  const auto p = build_prefix(s, 5000);
  const auto tot = step_totals(s, 5000);
  EXPECT_EQ(tot.t, p.t(5000));
  EXPECT_EQ(tot.T, p.T(5000));
}

TEST(Scaling, PowerGrowthExponent) {
  const double beta = 0.75;
  const auto p = build_prefix(StepSchedule::power(beta), 1000000);
  std::vector<double> lx, ly;
  for (std::size_t n = 10000; n <= 1000000; n *= 10) {
    lx.push_back(std::log(double(n)));
    ly.push_back(std::log(scaling_number(p, n)));
  }
  EXPECT_NEAR(ls_slope(lx, ly), (1 - beta) / 2, 0.02);
}

TEST(Scaling, ConstantIsSqrtN) {
  const auto p = build_prefix(StepSchedule::table({1.0}), 400);
  EXPECT_DOUBLE_EQ(scaling_number(p, 400), 20.0);
}

TEST(Scaling, HarmonicTendsToSqrt2) {
  const auto p = build_prefix(StepSchedule::harmonic(), 1000000);
  EXPECT_NEAR(scaling_number(p, 1000000), std::sqrt(2.0), 1e-5);
}

TEST(Scaling, AlgebraicIdentity) {
  const auto p = build_prefix(StepSchedule::power(0.6), 3000);
  for (std::size_t n : {1ul, 17ul, 3000ul}) {
    const double s = scaling_number(p, n);
    EXPECT_NEAR(s * s / (double(n) * n) * p.T(n), 1.0, 1e-14);
  }
  EXPECT_THROW(scaling_number(p, 0), std::out_of_range);
  EXPECT_THROW(scaling_number(p, 3001), std::out_of_range);
}

TEST(TimeChange, PowerMidpoint) {
  const std::size_t n = 1000000;
  const auto p = build_prefix(StepSchedule::power(0.75), n);
  const std::vector<double> grid = {0.0, 0.5, 1.0};
  const auto a = time_change(p, n, grid);
  EXPECT_EQ(a[0], 0.0);
  EXPECT_NEAR(a[1], std::pow(0.5, 1.75), 5e-3);
  EXPECT_EQ(a[2], 1.0);
}

TEST(TimeChange, ConstantStepsIsIdentity) {
  const std::size_t n = 1000;
  const auto p = build_prefix(StepSchedule::table({1.0}), n);
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0 * 0.999);
  const auto a = time_change(p, n, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(a[i], grid[i], 1.0 / n);
}

TEST(TimeChange, MonotoneForEverySchedule) {
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) grid.push_back(i / 50.0);
  for (const auto& s : {StepSchedule::power(0.3), StepSchedule::log_over_k(), StepSchedule::harmonic(),
                        StepSchedule::scaled_power(2.0, 0.9), StepSchedule::table({1.0, 0.2, 0.7})}) {
    const auto p = build_prefix(s, 777);
    const auto a = time_change(p, 777, grid);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LE(a[i - 1], a[i]) << s.name();
    EXPECT_EQ(a.back(), 1.0);
  }
  const auto p = build_prefix(StepSchedule::harmonic(), 10);
  const std::vector<double> bad = {0.5, 0.2};
  EXPECT_THROW(time_change(p, 10, bad), std::invalid_argument);
  EXPECT_THROW(time_change(p, 11, grid), std::out_of_range);
}

TEST(Audit, HarmonicViolatesCriticalCondition) {
  const auto rep = audit_assumptions(StepSchedule::harmonic(), 1000000, 0.4);
  const auto& v = rep.verdict(condition::kCritical);
  EXPECT_EQ(v.verdict, Verdict::ViolatedAt);
  ASSERT_TRUE(v.witness.has_value());
  ASSERT_EQ(rep.checkpoints.back().k, 1000000u);
  EXPECT_NEAR(rep.checkpoints.back().inverse_eta_sqrt_T / std::sqrt(2.0), 1.0, 0.01);
  EXPECT_TRUE(rep.any_violation());
}

TEST(Audit, PowerSatisfiesBothConditions) {
  const auto rep = audit_assumptions(StepSchedule::power(0.75), 1000000, 0.4);
  EXPECT_EQ(rep.verdict(condition::kSummable).verdict, Verdict::SatisfiedOnRange);
  EXPECT_EQ(rep.verdict(condition::kCritical).verdict, Verdict::SatisfiedOnRange);
  EXPECT_EQ(rep.verdict(condition::kNonIncreasing).verdict, Verdict::SatisfiedOnRange);
  EXPECT_EQ(rep.verdict(condition::kDivergent).verdict, Verdict::SatisfiedOnRange);
  EXPECT_FALSE(rep.any_violation());
}

TEST(Audit, ConstantTableHasZeroDecrementFit) {
  const auto rep = audit_assumptions(StepSchedule::table({0.5, 0.5}), 1000, 0.4);
  EXPECT_EQ(rep.c_fit, 0.0);
  EXPECT_EQ(rep.verdict(condition::kDecrementBound).verdict, Verdict::SatisfiedOnRange);
}

TEST(Audit, EveryViolationCarriesWitness) {
  for (const auto& s : {StepSchedule::harmonic(), StepSchedule::log_over_k(), StepSchedule::table({2.0})}) {
    const auto rep = audit_assumptions(s, 10000, 0.4);
    for (const auto& v : rep.verdicts)
      if (v.verdict == Verdict::ViolatedAt) EXPECT_TRUE(v.witness.has_value()) << v.condition;
  }
  EXPECT_THROW(audit_assumptions(StepSchedule::harmonic(), 99, 0.4), std::invalid_argument);
}

TEST(ACondition, ConvexPowerDecreases) {
  const std::vector<double> deltas = {0.1, 0.01, 0.001};
  const auto rep = audit_a_condition([](double t) { return std::pow(t, 1.75); }, 1.0, 1.0, deltas);
  ASSERT_EQ(rep.value.size(), 3u);
  EXPECT_GT(rep.value[0], rep.value[1]);
  EXPECT_GT(rep.value[1], rep.value[2]);
  EXPECT_EQ(rep.verdict, Verdict::SatisfiedOnRange);
  EXPECT_NEAR(rep.tau[1], std::sqrt(1.0 - std::pow(0.99, 1.75)), 1e-9);
}

TEST(ACondition, LinearClosedForm) {
  const std::vector<double> deltas = {0.01};
  const auto rep = audit_a_condition([](double t) { return t; }, 1.0, 1.0, deltas);
  EXPECT_NEAR(rep.tau[0], 0.1, 1e-9);
  EXPECT_NEAR(rep.value[0] / (10.0 * std::exp(-100.0)), 1.0, 1e-6);
  EXPECT_EQ(rep.verdict, Verdict::Inconclusive);
}

TEST(ACondition, RejectsNonMonotone) {
  const std::vector<double> deltas = {0.1};
  EXPECT_THROW(audit_a_condition([](double t) { return std::sin(10 * t); }, 1.0, 1.0, deltas),
               std::invalid_argument);
}
