#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "emclt/analysis.hpp"

using namespace emclt;

namespace {

std::vector<double> normals(std::uint64_t seed, std::size_t n, double mean = 0.0, double sd = 1.0) {
  const RandomStream r(seed, 0, StreamTag::Test);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = mean + sd * r.normal(i);
  return out;
}

PhiHooks linear_hooks() {
  return {[](double x) { return -x; }, [](double) { return -1.0; }, [](double) { return 0.0; },
          TestFunction::identity(), 0.0};
}

EnsembleConfig ou_config(std::size_t chains, std::size_t steps, PhiHooks hooks) {
  EnsembleConfig c(SDEModel::ornstein_uhlenbeck(std::sqrt(2.0)), StepSchedule::power(0.75));
  c.test_functions = {hooks.h};
  c.chains = chains;
  c.steps = steps;
  c.seed = 77;
  c.init = UniformChoiceInit{{-2.0, 0.5, 3.0}};
  c.recorders.phi = std::move(hooks);
  return c;
}

}  // namespace

TEST(Statistic, CenteredSumIsZero) {
  EXPECT_EQ(clt_statistic(250 * 0.4, 250, 17.0, 0.4), 0.0);
  EXPECT_THROW(clt_statistic(1.0, 1, 0.0, 0.0), std::invalid_argument);
}

TEST(Statistic, ConstantStepsGiveSqrtNScaling) {
  EnsembleConfig c(SDEModel::shifted_sine(), StepSchedule::table({1.0}));
  c.test_functions = {TestFunction::witch()};
  c.chains = 3;
  c.steps = 400;
  c.recorders.terminal_state = true;
  const auto res = run_ensemble(c);
  const double T = build_prefix(c.schedule, 400).T(400);
  EXPECT_EQ(T, 400.0);
  const auto rep = clt_report(res, 0, T, 0.3, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_DOUBLE_EQ(rep.samples[i], (res.chains[i].sum_h[0] - 400 * 0.3) / 20.0);
}

TEST(Kolmogorov, ReferenceValues) {
  EXPECT_NEAR(kolmogorov_survival(0.5), 0.9639452436648751, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.0), 0.26999967167735456, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.36), 0.049485876755377876, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.63), 0.009846364888486529, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(2.0), 0.0006709252557796953, 1e-12);
  EXPECT_EQ(kolmogorov_survival(0.0), 1.0);
  EXPECT_NEAR(kolmogorov_survival(1.18 - 1e-12), kolmogorov_survival(1.18), 1e-10);
  EXPECT_NEAR(normal_cdf(0.5), 0.6914624612740131, 1e-15);
}

TEST(KsNormal, PointMassAtZero) {
  const std::vector<double> z(100, 0.0);
  const auto r = ks_test_normal(z, 1.0);
  EXPECT_DOUBLE_EQ(r.statistic, 0.5);
  EXPECT_LT(r.p_value, 0.01);
}

TEST(KsNormal, MinimumSampleGuard) {
  EXPECT_THROW(ks_test_normal(normals(1, 29), 1.0), std::invalid_argument);
  EXPECT_NO_THROW(ks_test_normal(normals(1, 30), 1.0));
  EXPECT_THROW(ks_test_normal(normals(1, 50), -1.0), std::invalid_argument);
}

TEST(KsNormal, ScaleInvariance) {
  auto x = normals(2, 500, 0.0, 1.7);
  const auto a = ks_test_normal(x, 1.7 * 1.7);
  for (double& v : x) v *= 3.0;
  const auto b = ks_test_normal(x, 9.0 * 1.7 * 1.7);
  EXPECT_NEAR(a.statistic, b.statistic, 1e-14);
}

TEST(KsNormal, SelfCalibration) {
  const double v = 0.37;
  int rejections = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep)
    if (ks_test_normal(normals(1000 + rep, 5000, 0.0, std::sqrt(v)), v).p_value < 0.05) ++rejections;
  const double frac = rejections / 200.0;
  EXPECT_GE(frac, 0.02);
  EXPECT_LE(frac, 0.09);
}

TEST(KsNormal, DetectsWrongVariance) {
  EXPECT_LT(ks_test_normal(normals(3, 2000, 0.0, 1.3), 1.0).p_value, 1e-4);
}

TEST(KsTwoSample, IdenticalAndShifted) {
  const auto a = normals(4, 1000);
  const auto same = ks_two_sample(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_LT(ks_two_sample(a, normals(5, 1000, 0.5)).p_value, 1e-6);
  EXPECT_GT(ks_two_sample(a, normals(6, 1000)).p_value, 0.001);
}

TEST(KsTwoSample, TiesAreGrouped) {
  const std::vector<double> a = {0, 0, 0, 1}, b = {0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(ks_two_sample(a, b).statistic, 0.5);
  EXPECT_THROW(ks_two_sample(a, std::vector<double>{}), std::invalid_argument);
}

TEST(W2, Examples) {
  const auto a = normals(7, 200);
  EXPECT_EQ(w2_empirical_1d(a, a), 0.0);
  const std::vector<double> z = {0, 0}, o = {1, 1};
  EXPECT_EQ(w2_empirical_1d(z, o), 1.0);
  EXPECT_NEAR(w2_empirical_1d(normals(8, 100000), normals(9, 100000, 0.3)), 0.3, 0.02);
  EXPECT_THROW(w2_empirical_1d(z, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(W2, MetricAxioms) {
  const auto a = normals(10, 300), b = normals(11, 300, 0.2, 1.5), c = normals(12, 300, -1.0);
  EXPECT_EQ(w2_empirical_1d(a, b), w2_empirical_1d(b, a));
  EXPECT_LE(w2_empirical_1d(a, c), w2_empirical_1d(a, b) + w2_empirical_1d(b, c) + 1e-15);
  EXPECT_GT(w2_empirical_1d(a, b), 0.0);
  // Permutation invariance.
  auto r = b;
  std::reverse(r.begin(), r.end());
  EXPECT_EQ(w2_empirical_1d(a, r), w2_empirical_1d(a, b));
}

TEST(Decomposition, LinearPhiIsDegenerate) {
  auto c = ou_config(64, 1000, linear_hooks());
  c.recorders.phi_steps = {1, 1000};
  const auto res = run_ensemble(c);
  const double T = step_totals(c.schedule, 1000).T;
  const auto d = decomposition_diagnostics(res, 1000, T, 0.0, 0);
  ASSERT_EQ(d.r1.size(), 64u);
  for (std::size_t i = 0; i < d.r1.size(); ++i) {
    EXPECT_EQ(d.r1[i], 0.0);
    EXPECT_EQ(d.r2[i], 0.0);
    EXPECT_LE(std::abs(d.r3[i]), 1e-13 * (1 + std::abs(d.statistic[i])));
  }
  EXPECT_LE(d.max_recombination_error, 1e-10);
}

TEST(Decomposition, QuadraticPhiHasNoTaylorRemainder) {
  // OU(sqrt 2), h = x^2 - 1: phi = -x^2/2 exactly, so only the cross term survives in R1.
  PhiHooks q{[](double x) { return -0.5 * x * x; }, [](double x) { return -x; }, [](double) { return -1.0; },
             TestFunction("x2m1", [](double x) { return x * x - 1.0; }, 1.0), 0.0};
  auto c = ou_config(64, 1000, q);
  c.recorders.phi_steps = {1000};
  const auto res = run_ensemble(c);
  const double T = step_totals(c.schedule, 1000).T;
  const auto d = decomposition_diagnostics(res, 1000, T, 0.0, 0);
  for (std::size_t i = 0; i < d.r3.size(); ++i) {
    const double scale = std::abs(d.martingale[i]) + std::abs(d.r0[i]) + std::abs(d.r1[i]) + std::abs(d.r2[i]);
    EXPECT_LE(std::abs(d.r3[i]), 1e-12 * scale);
    EXPECT_NE(d.r1[i], 0.0);
  }
  EXPECT_LE(d.max_recombination_error, 1e-10);
}

TEST(Decomposition, SingleStepIdentity) {
  PhiHooks cubic{[](double x) { return x * x * x; }, [](double x) { return 3 * x * x; },
                 [](double x) { return 6 * x; }, TestFunction::witch(), 0.2};
  auto c = ou_config(40, 1, cubic);
  c.recorders.phi_steps = {1};
  const auto res = run_ensemble(c);
  const double T = step_totals(c.schedule, 1).T;
  const auto d = decomposition_diagnostics(res, 1, T, 0.2, 0);
  for (std::size_t i = 0; i < d.statistic.size(); ++i)
    EXPECT_NEAR(d.martingale[i] + d.r0[i] + d.r1[i] - d.r2[i] - d.r3[i], d.statistic[i],
                1e-13 * (1 + std::abs(d.r0[i])));
  EXPECT_THROW(decomposition_diagnostics(res, 2, T, 0.2), std::invalid_argument);
}

TEST(Martingale, SingleStepSquare) {
  auto c = ou_config(10, 1, linear_hooks());
  c.recorders.phi_steps = {1};
  const auto res = run_ensemble(c);
  const double eta1 = c.schedule.eta(1);
  const auto m = martingale_conditions(res, 1, 1.0 / eta1, 2.0);
  for (std::size_t i = 0; i < 10; ++i) {
    // Z_1 = sqrt(2) xi / sqrt(eta_1), so Z_1^2 eta_1 = 2 xi^2.
    const double xi = RandomStream(c.seed, i, StreamTag::Step).normal(0);
    EXPECT_NEAR(m.sum_z2[i], 2 * xi * xi, 1e-13);
  }
}

TEST(Martingale, ConstantStepsAverageToVariance) {
  auto c = ou_config(200, 100000, linear_hooks());
  c.schedule = StepSchedule::table({1.0 / 64});
  c.recorders.phi_steps = {100000};
  const auto res = run_ensemble(c);
  const double T = 100000 * 64.0;
  // With constant steps sum Z^2 / T_n = (1/n) sum Z^2 eta.
  const auto m = martingale_conditions(res, 100000, T, 2.0);
  EXPECT_LE(std::abs(m.deviation_se), 3.0);
}

TEST(Fclt, BrownianPathsPass) {
  const std::vector<double> grid = {0.25, 0.5, 0.75, 1.0};
  std::vector<double> a;
  for (double t : grid) a.push_back(std::pow(t, 1.75));
  const double v = 0.8;
  const std::size_t N = 2000;
  const RandomStream r(13, 0, StreamTag::Test);
  std::vector<double> paths;
  for (std::size_t i = 0; i < N; ++i) {
    double w = 0, prev = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      w += std::sqrt(v * (a[g] - prev)) * r.normal(i * 4 + g);
      prev = a[g];
      paths.push_back(w);
    }
  }
  const auto rep = fclt_covariance_test(paths, grid, a, v);
  EXPECT_TRUE(rep.pass) << rep.max_abs_deviation;
  EXPECT_TRUE(rep.psd);
  EXPECT_LE(rep.max_increment_deviation, 4.0);
  for (double p : rep.marginal_p) EXPECT_GT(p, 1e-4);
  // Jackknife SE of a variance is close to the Gaussian value sqrt(2/N) v a.
  EXPECT_NEAR(rep.se[15] / (std::sqrt(2.0 / N) * v), 1.0, 0.15);
}

TEST(Fclt, EndpointGridReducesToVariance) {
  const std::vector<double> grid = {1.0}, a = {1.0};
  const auto x = normals(14, 400, 0.0, 1.1);
  const auto rep = fclt_covariance_test(x, grid, a, 1.21);
  EXPECT_NEAR(rep.cov[0], sample_moments(x).variance, 1e-12);
  EXPECT_TRUE(rep.pass);
}

TEST(Fclt, Preconditions) {
  const std::vector<double> bad = {0.5, 0.25}, a2 = {0.5, 0.25}, dup = {0.5, 0.5};
  const auto x = normals(15, 400);
  EXPECT_THROW(fclt_covariance_test(x, bad, a2, 1.0), std::invalid_argument);
  EXPECT_THROW(fclt_covariance_test(x, dup, a2, 1.0), std::invalid_argument);
  const std::vector<double> one = {1.0};
  EXPECT_THROW(fclt_covariance_test(normals(16, 99), one, one, 1.0), std::invalid_argument);
}
