#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "emclt/model.hpp"

using namespace emclt;

TEST(Model, ShiftedSineDrift) {
  const auto m = SDEModel::shifted_sine();
  EXPECT_EQ(m.drift(0.0), 0.0);
  EXPECT_NEAR(m.drift(std::numbers::pi), -std::numbers::pi, 1e-15);
  EXPECT_EQ(m.dim(), 1u);
  EXPECT_EQ(m.scalar_sigma(), 1.0);
}

TEST(Model, OuDrift) {
  const auto m = SDEModel::ornstein_uhlenbeck(std::sqrt(2.0));
  EXPECT_EQ(m.drift(1.0), -1.0);
  EXPECT_THROW(SDEModel::ornstein_uhlenbeck(0.0), std::invalid_argument);
}

TEST(Model, RejectsK3NotBoundingSigma) {
  EXPECT_THROW(SDEModel("bad", [](double x) { return -x; }, 3.0, {.lipschitz = 1, .k1 = 1, .k2 = 0, .k3 = 1.01}),
               std::invalid_argument);
}

TEST(Model, MultiDimensionalDrift) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2, 2);
  SDEModel m("ou2", 2,
             [](std::span<const double> x, std::span<double> out) {
               out[0] = -x[0];
               out[1] = -x[1];
             },
             s, {.lipschitz = 1, .k1 = 1, .k2 = 0, .k3 = 1.01});
  const std::vector<double> x = {1.0, -2.0};
  std::vector<double> b(2);
  m.drift(x, b);
  EXPECT_EQ(b, (std::vector<double>{-1.0, 2.0}));
  EXPECT_THROW(m.drift(1.0), UnsupportedDimension);
  std::vector<double> wrong(3);
  EXPECT_THROW(m.drift(x, wrong), UnsupportedDimension);
}

TEST(Generator, LinearPhiUnderOu) {
  const auto m = SDEModel::ornstein_uhlenbeck(std::sqrt(2.0));
  for (double x : {-3.0, 0.0, 0.7, 5.0}) {
    const std::vector<double> xs = {x}, grad = {-1.0};
    EXPECT_NEAR(generator_apply(m, xs, grad, Eigen::MatrixXd::Zero(1, 1)), x, 1e-15);
  }
}

TEST(Generator, ConstantPhiVanishes) {
  const auto m = SDEModel::shifted_sine();
  const std::vector<double> xs = {1.3}, grad = {0.0};
  EXPECT_EQ(generator_apply(m, xs, grad, Eigen::MatrixXd::Zero(1, 1)), 0.0);
}

TEST(Generator, QuadraticPhiMatchesFiniteDifferences) {
  const double s = 0.8;
  const auto m = SDEModel::ornstein_uhlenbeck(s);
  const auto phi = [](double x) { return x * x; };
  for (double x : {-1.5, 0.2, 2.0}) {
    const std::vector<double> xs = {x}, grad = {2 * x};
    const double a = generator_apply(m, xs, grad, Eigen::MatrixXd::Constant(1, 1, 2.0));
    EXPECT_NEAR(a, -2 * x * x + s * s, 1e-14);
    const double h = 1e-4;
    const double fd = m.drift(x) * (phi(x + h) - phi(x - h)) / (2 * h) +
                      0.5 * s * s * (phi(x + h) - 2 * phi(x) + phi(x - h)) / (h * h);
    EXPECT_NEAR(a, fd, 1e-6);
  }
}

TEST(Probe, OuIsEqualityCase) {
  const auto rep = dissipativity_probe(SDEModel::ornstein_uhlenbeck(1.0), 10000, 20.0, 3);
  EXPECT_EQ(rep.max_violation, 0.0);
  EXPECT_EQ(rep.verdict, Verdict::SatisfiedOnRange);
}

TEST(Probe, ShiftedSineConstantsHold) {
  const auto rep = dissipativity_probe(SDEModel::shifted_sine(), 100000, 20.0, 4);
  EXPECT_LE(rep.max_violation, 0.0);
  EXPECT_LE(rep.lipschitz_ratio, 2.0);
  EXPECT_EQ(rep.verdict, Verdict::SatisfiedOnRange);
}

TEST(Probe, ShiftedSineContractsAtLongRange) {
  // Brute-force grid: <b(x)-b(y), x-y> <= 0 once |x-y| >= pi.
  const auto m = SDEModel::shifted_sine();
  for (double x = -20; x <= 20; x += 0.05)
    for (double r = std::numbers::pi; r <= 20; r += 0.05) {
      const double y = x + r;
      ASSERT_LE((m.drift(x) - m.drift(y)) * (x - y), 1e-12) << x << " " << y;
    }
}

TEST(Probe, EmptyIsInconclusive) {
  const auto rep = dissipativity_probe(SDEModel::shifted_sine(), 0, 1.0, 0);
  EXPECT_EQ(rep.pairs, 0u);
  EXPECT_EQ(rep.verdict, Verdict::Inconclusive);
}

TEST(Kappa, Examples) {
  const DissipativityConstants c{.lipschitz = 2, .k1 = 1, .k2 = 4, .k3 = 1.01};
  EXPECT_EQ(kappa(c, 1.0), 2.0);
  EXPECT_NEAR(kappa(c, 1e8), -1.0, 1e-12);
  const DissipativityConstants c0{.lipschitz = 2, .k1 = 1, .k2 = 0, .k3 = 1.01};
  for (double r : {1e-3, 1.0, 50.0}) EXPECT_EQ(kappa(c0, r), -1.0);
  EXPECT_THROW(kappa(c, 0.0), std::domain_error);
}

TEST(TestFunctions, ByName) {
  EXPECT_EQ(TestFunction::by_name("witch")(1.0), 0.5);
  EXPECT_EQ(TestFunction::by_name("identity")(-3.0), -3.0);
  EXPECT_EQ(TestFunction::constant(2.5)(7.0), 2.5);
  EXPECT_THROW(TestFunction::by_name("cosine"), std::invalid_argument);
}
