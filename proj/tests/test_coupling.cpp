#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "emclt/analysis.hpp"
#include "emclt/coupling.hpp"
#include "curve_oracle.hpp"

using namespace emclt;

namespace {

const DissipativityConstants kRef{.lipschitz = 2.0, .k1 = 1.0, .k2 = 4.0, .k3 = 1.01};

}  // namespace

TEST(Curve, R0ForReferenceConstants) {
  EXPECT_NEAR(coupling_R0(kRef), 2.0, 1e-9);
  // R1 solves s (s - 2)(-1 + 4/s^2) = -8.
  const double R1 = coupling_R1(kRef, 2.0);
  EXPECT_NEAR(R1 * (R1 - 2) * (-1 + 4 / (R1 * R1)), -8.0, 1e-9);
}

TEST(Curve, NoShortRangeRepulsion) {
  const DissipativityConstants c{.lipschitz = 1.0, .k1 = 2.0, .k2 = 0.0, .k3 = 1.0 + 1e-9};
  EXPECT_EQ(coupling_R0(c), 0.0);
  EXPECT_NEAR(coupling_R1(c, 0.0), std::sqrt(8.0 / 2.0), 1e-12);
  const auto cv = build_curve(c, {.points = 1001, .r_max = std::nullopt});
  for (std::size_t i = 0; i < cv.r.size(); ++i) {
    ASSERT_EQ(cv.phi[i], 1.0);
    ASSERT_NEAR(cv.Phi[i], cv.r[i], 1e-13);
  }
}

TEST(Curve, RejectsBadConstants) {
  EXPECT_THROW(build_curve(DissipativityConstants{.lipschitz = 1, .k1 = 0, .k2 = 1, .k3 = 2}),
               CurveConstructionError);
  EXPECT_THROW(build_curve(DissipativityConstants{.lipschitz = 1, .k1 = 1, .k2 = 1, .k3 = 1}),
               CurveConstructionError);
}

TEST(Curve, PhiExponentMatchesQuadrature) {
  // Simpson on pieces split at the kinks of kappa+ (sqrt(4/3) and 2).
  auto f = [](double x) { return x <= 0 ? 0.0 : x * std::max(kappa(kRef, x), 0.0); };
  auto simpson = [&](double a, double b) {
    const int n = 2000;
    double s = 0;
    for (int i = 0; i < n; ++i) {
      const double l = a + (b - a) * i / n, r = a + (b - a) * (i + 1) / n;
      s += (r - l) / 6 * (f(l) + 4 * f((l + r) / 2) + f(r));
    }
    return s;
  };
  for (double r : {0.3, 1.0, 1.5, 2.0, 3.7}) {
    double s = 0, lo = 0;
    for (double k : {std::sqrt(4.0 / 3.0), 2.0, r}) {
      const double hi = std::min(k, r);
      if (hi > lo) s += simpson(lo, hi);
      lo = std::max(lo, hi);
    }
    EXPECT_NEAR(phi_exponent(kRef, r), 0.5 * 1.01 * s, 1e-12) << r;
  }
}

TEST(Curve, InequalitiesHoldOnGrid) {
  const auto cv = build_curve(kRef);
  ASSERT_EQ(cv.r.size(), 10001u);
  EXPECT_EQ(cv.r[cv.r1_index], cv.R1);
  const auto rep = check_f_inequalities(cv);
  EXPECT_LE(rep.local_violation, 1e-8);
  EXPECT_LE(rep.max_f_second, 1e-8);
  EXPECT_LE(rep.max_lower_gap, 1e-8);
  EXPECT_LE(rep.max_upper_gap, 1e-8);
  EXPECT_LE(rep.df_max, 1.0 + 1e-12);
  EXPECT_GE(rep.df_min, 0.5 * std::exp(-phi_exponent(kRef, cv.R0)) - 1e-12);
  EXPECT_GT(rep.c1_prime, 0.0);
  EXPECT_TRUE(rep.g_non_increasing);
  EXPECT_NEAR(rep.g_min_to_R1, 0.5, 1e-10);
}

TEST(Curve, ConstantsSatisfyDefiningIntegrals) {
  const auto cv = build_curve(kRef);
  const auto o = oracle_integrals(cv.R1, 40000);
  EXPECT_NEAR(1.0 / (2 * 1.01 * cv.c1) / static_cast<double>(o.A), 1.0, 1e-9);
  EXPECT_NEAR(1.0 / (4 * 1.01 * cv.c2) / static_cast<double>(o.B), 1.0, 1e-9);
}

TEST(Curve, LookupIsConsistent) {
  const auto cv = build_curve(kRef);
  EXPECT_EQ(cv.f_at(0.0), 0.0);
  EXPECT_EQ(cv.f_at(cv.r[123]), cv.f[123]);
  const double far = cv.r.back() + 3.0;
  EXPECT_NEAR(cv.f_at(far), cv.f.back() + 3.0 * cv.df.back(), 1e-12);
  for (double r : {0.01, 0.5, 2.0, 4.0, 7.5}) {
    EXPECT_LE(cv.f_at(r), r + 1e-12);
    EXPECT_GT(cv.f_at(r), 0.0);
  }
}

TEST(Rho1, Examples) {
  auto cv = std::make_shared<const CouplingCurve>(build_curve(kRef));
  const std::vector<double> a = {0.7}, zero = {0.0}, one = {1.0}, small = {0.02};
  EXPECT_EQ(rho1({cv, 1.0}, a, a), 0.0);
  const double f_small = rho1({cv, 0.0}, zero, small);
  EXPECT_NEAR(f_small, cv->f_at(0.02), 1e-15);
  EXPECT_LE(f_small, 0.02);
  EXPECT_NEAR(rho1({cv, 1.0}, zero, one), cv->f_at(1.0) + 3.0, 1e-14);
}

TEST(CoupledStep, ReflectionInOneDimension) {
  const auto m = SDEModel::ornstein_uhlenbeck(0.9);
  const CouplingNoise noise(3, 0);
  CoupledPair p{{5.0}, {-5.0}};
  coupled_step(p, m, 0.0, 0.01, 1, 1e-6, noise, 0);
  const double dx = p.x[0] - (5.0 - 0.01 * 5.0);
  const double dy = p.y[0] - (-5.0 + 0.01 * 5.0);
  EXPECT_NE(dx, 0.0);
  EXPECT_NEAR(dy, -dx, 1e-15);
  EXPECT_NEAR(dx, 0.9 * 0.1 * noise.b1.normal(0), 1e-15);
  EXPECT_FALSE(p.coalesced);
}

TEST(CoupledStep, SynchronousWhenEqual) {
  const auto m = SDEModel::ornstein_uhlenbeck(1.0);
  const CouplingNoise noise(4, 1);
  CoupledPair p{{1.3}, {1.3}};
  coupled_step(p, m, 0.0, 0.2, 5, 1e-6, noise, 0);
  EXPECT_EQ(p.x, p.y);
  EXPECT_TRUE(p.coalesced);
}

TEST(CoupledStep, CloseStartsMeet) {
  const auto m = SDEModel::ornstein_uhlenbeck(1.0);
  int met = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const CouplingNoise noise(5, s);
    CoupledPair p{{0.05}, {-0.05}};
    coupled_step(p, m, 0.0, 0.5, 50, 1e-6, noise, 0, ReseparationPolicy::ForceSynchronous);
    if (p.ever_coalesced) ++met;
    EXPECT_EQ(p.reseparations, 0u);
  }
  EXPECT_GT(met, 180);
}

TEST(CoupledStep, MarginalMatchesUncoupledReference) {
  const auto m = SDEModel::ornstein_uhlenbeck(1.0);
  const std::size_t pairs = 3000, sub = 10;
  const auto sched = build_prefix(StepSchedule::power(0.75), 10);
  std::vector<double> coupled, reference;
  for (std::size_t p = 0; p < pairs; ++p) {
    const CouplingNoise noise(6, p);
    CoupledPair pair{{2.0}, {2.0 - 1.0}};
    std::vector<double> ref = {2.0};
    const RandomStream rs(6, p, StreamTag::Reference);
    for (std::size_t k = 1; k <= 10; ++k) {
      coupled_step(pair, m, sched.t(k - 1), sched.t(k), sub, 1e-6, noise, (k - 1) * sub);
      ref = fine_reference(m, sched.t(k - 1), ref, sched.t(k), sub, {}, rs, (k - 1) * sub);
    }
    coupled.push_back(pair.x[0]);
    reference.push_back(ref[0]);
  }
  EXPECT_GT(ks_two_sample(coupled, reference).p_value, 0.001);
}

TEST(CoupledStep, Preconditions) {
  const auto m = SDEModel::ornstein_uhlenbeck(1.0);
  const CouplingNoise noise(1, 1);
  CoupledPair p{{1.0}, {0.0}};
  EXPECT_THROW(coupled_step(p, m, 0.0, 1.0, 0, 1e-6, noise, 0), std::invalid_argument);
  EXPECT_THROW(coupled_step(p, m, 1.0, 1.0, 1, 1e-6, noise, 0), std::invalid_argument);
  CoupledPair bad{{1.0, 2.0}, {0.0, 0.0}};
  EXPECT_THROW(coupled_step(bad, m, 0.0, 1.0, 1, 1e-6, noise, 0), UnsupportedDimension);
}

TEST(BoundProxy, GeometricClosedForm) {
  const auto p = build_prefix(StepSchedule::table({0.01}), 1000);
  const auto bp = bound_proxy(p, 0.7);
  const double q = std::exp(-0.7 * 0.01);
  EXPECT_NEAR(bp[1000] / (std::pow(0.01, 1.5) * (1 - std::pow(q, 1000)) / (1 - q)), 1.0, 1e-12);
  EXPECT_EQ(bp[0], 0.0);
}

TEST(BoundProxy, SquareRootScalingForConstantSteps) {
  const double c = 1.0;
  const auto a = bound_proxy(build_prefix(StepSchedule::table({0.01}), 1000), c);
  const auto b = bound_proxy(build_prefix(StepSchedule::table({0.005}), 1000), c);
  const double ra = a[1000] / std::sqrt(0.01), rb = b[1000] / std::sqrt(0.005);
  EXPECT_NEAR(ra / rb, 1.0, 0.02);
}

TEST(Contraction, DecreasesBeyondThousand) {
  ContractionParams p;
  p.seed = 20240501;
  p.checkpoints = {1, 10, 100, 1000, 2000, 5000, 10000};
  const auto rep = contraction_study(SDEModel::ornstein_uhlenbeck(1.0), StepSchedule::power(0.75), 2.0,
                                     10000, 2000, p);
  ASSERT_EQ(rep.rows.size(), 7u);
  EXPECT_GT(rep.c, 0.0);
  EXPECT_GT(rep.epsilon, 0.0);
  std::vector<double> lx, ly;
  for (std::size_t i = 3; i < rep.rows.size(); ++i) {
    lx.push_back(std::log(double(rep.rows[i].n)));
    ly.push_back(std::log(rep.rows[i].estimate));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / lx.size(), my += ly[i] / ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
  EXPECT_LT(sxy / sxx, 0.0);
  EXPECT_LT(rep.rows.back().estimate, rep.rows[3].estimate);
  EXPECT_GT(rep.rows.back().coalesced_fraction, rep.rows[1].coalesced_fraction);
}

TEST(Contraction, FrozenDriftSeparatesEqualStarts) {
  // X and Y start at z, but only Y uses the frozen drift, so rho1 leaves 0 after one step.
  ContractionParams p;
  p.checkpoints = {1};
  const auto rep = contraction_study(SDEModel::ornstein_uhlenbeck(1.0), StepSchedule::power(0.75), 0.5,
                                     1, 20, p);
  EXPECT_GT(rep.rows[0].estimate, 0.0);
  EXPECT_THROW(contraction_study(SDEModel::ornstein_uhlenbeck(1.0), StepSchedule::power(0.75), 0.5, 1, 0, p),
               std::invalid_argument);
}

TEST(W2Study, SingleSubstepIsSelfComparison) {
  W2Params p;
  p.substeps = 1;
  const std::vector<std::size_t> cps = {10, 100};
  const auto rep = w2_rate_study(SDEModel::shifted_sine(), StepSchedule::power(0.75), 2.0, cps, 200, p);
  for (const auto& r : rep.rows) EXPECT_EQ(r.estimate, 0.0);
}

TEST(W2Study, WorkerIndependent) {
  W2Params p;
  p.substeps = 4;
  p.seed = 8;
  const std::vector<std::size_t> cps = {10, 100};
  p.workers = 1;
  const auto a = w2_rate_study(SDEModel::shifted_sine(), StepSchedule::power(0.75), 2.0, cps, 300, p);
  p.workers = 4;
  const auto b = w2_rate_study(SDEModel::shifted_sine(), StepSchedule::power(0.75), 2.0, cps, 300, p);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].estimate, b.rows[i].estimate);
  EXPECT_GT(a.rows[0].estimate, 0.0);
  const std::vector<std::size_t> bad = {100, 10};
  EXPECT_THROW(w2_rate_study(SDEModel::shifted_sine(), StepSchedule::power(0.75), 2.0, bad, 10, p),
               std::invalid_argument);
}
