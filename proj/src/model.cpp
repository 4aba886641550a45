#include "emclt/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "emclt/rng.hpp"

namespace emclt {

SDEModel::SDEModel(std::string name, std::size_t dim, DriftFn drift, Eigen::MatrixXd sigma,
                   DissipativityConstants constants)
    : name_(std::move(name)),
      dim_(dim),
      drift_(std::move(drift)),
      sigma_(std::move(sigma)),
      constants_(constants) {
  validate();
}

SDEModel::SDEModel(std::string name, ScalarDriftFn drift, double sigma,
                   DissipativityConstants constants)
    : name_(std::move(name)),
      dim_(1),
      scalar_drift_(std::move(drift)),
      sigma_(Eigen::MatrixXd::Constant(1, 1, sigma)),
      constants_(constants) {
  drift_ = [f = scalar_drift_](std::span<const double> x, std::span<double> out) {
    out[0] = f(x[0]);
  };
  validate();
}

void SDEModel::validate() {
  if (dim_ < 1 || dim_ > kMaxDim)
    throw UnsupportedDimension(fmt::format("dimension must be in [1,{}], got {}", kMaxDim, dim_));
  if (sigma_.rows() != static_cast<Eigen::Index>(dim_) || sigma_.cols() != sigma_.rows())
    throw std::invalid_argument("sigma must be a d x d matrix");
  const auto& c = constants_;
  if (!(c.lipschitz > 0.0) || !(c.k1 > 0.0) || !(c.k2 >= 0.0) || !(c.k3 > 1.0))
    throw std::invalid_argument(fmt::format(
        "need L > 0, K1 > 0, K2 >= 0, K3 > 1 (got L={}, K1={}, K2={}, K3={})", c.lipschitz, c.k1,
        c.k2, c.k3));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma_);
  if (!lu.isInvertible()) throw std::invalid_argument("sigma is singular");
  sigma_inv_ = lu.inverse();
  // |sigma^{-1} y|^2 = y^T (sigma sigma^T)^{-1} y, so the bound is an eigenvalue range.
  const Eigen::MatrixXd q = sigma_inv_.transpose() * sigma_inv_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  const double tol = 1e-12;
  if (lo < 1.0 / c.k3 - tol || hi > c.k3 + tol)
    throw std::invalid_argument(fmt::format(
        "K3={} does not bound sigma: |sigma^-1 y|^2/|y|^2 ranges over [{}, {}]", c.k3, lo, hi));
}

SDEModel SDEModel::shifted_sine() {
  return SDEModel("shifted-sine", [](double x) { return -x + std::sin(x); }, 1.0,
                  {.lipschitz = 2.0, .k1 = 0.5, .k2 = 2.0, .k3 = 1.01});
}

SDEModel SDEModel::ornstein_uhlenbeck(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("OU sigma must be positive");
  const double s2 = sigma * sigma;
  return SDEModel(fmt::format("ou({})", sigma), [](double x) { return -x; }, sigma,
                  {.lipschitz = 1.0, .k1 = 1.0, .k2 = 0.0, .k3 = std::max({s2, 1.0 / s2, 1.01})});
}

SDEModel builtin_model(BuiltinModel which, double sigma) {
  switch (which) {
    case BuiltinModel::ShiftedSine: return SDEModel::shifted_sine();
    case BuiltinModel::OrnsteinUhlenbeck: return SDEModel::ornstein_uhlenbeck(sigma);
  }
  throw std::invalid_argument("unknown builtin model");
}

void SDEModel::drift(std::span<const double> x, std::span<double> out) const {
  if (x.size() != dim_ || out.size() != dim_)
    throw UnsupportedDimension(fmt::format("drift expects dimension {}", dim_));
  drift_(x, out);
}

double SDEModel::drift(double x) const {
  if (dim_ != 1) throw UnsupportedDimension("scalar drift on a multi-dimensional model");
  if (scalar_drift_) return scalar_drift_(x);
  double out = 0.0;
  drift_(std::span<const double>(&x, 1), std::span<double>(&out, 1));
  return out;
}

double SDEModel::scalar_sigma() const {
  if (dim_ != 1) throw UnsupportedDimension("scalar sigma on a multi-dimensional model");
  return sigma_(0, 0);
}

TestFunction::TestFunction(std::string name, Fn h, double lipschitz_bound)
    : name_(std::move(name)), h_(std::move(h)), lipschitz_(lipschitz_bound) {
  if (!(lipschitz_ >= 0.0)) throw std::invalid_argument("Lipschitz bound must be non-negative");
}

TestFunction::TestFunction(std::string name, std::function<double(double)> h,
                           double lipschitz_bound)
    : name_(std::move(name)), scalar_(std::move(h)), lipschitz_(lipschitz_bound) {
  if (!(lipschitz_ >= 0.0)) throw std::invalid_argument("Lipschitz bound must be non-negative");
  h_ = [f = scalar_](std::span<const double> x) { return f(x[0]); };
}

// sup |d/dx (1+x^2)^{-1}| = 3 sqrt(3) / 8 at x = 1/sqrt(3).
TestFunction TestFunction::witch() {
  return TestFunction("witch", [](double x) { return 1.0 / (1.0 + x * x); }, 0.6496);
}
TestFunction TestFunction::sine() {
  return TestFunction("sine", [](double x) { return std::sin(x); }, 1.0);
}
TestFunction TestFunction::identity() {
  return TestFunction("identity", [](double x) { return x; }, 1.0);
}
TestFunction TestFunction::constant(double c) {
  return TestFunction(fmt::format("constant({})", c), [c](double) { return c; }, 0.0);
}

TestFunction TestFunction::by_name(const std::string& name) {
  if (name == "witch") return witch();
  if (name == "sine") return sine();
  if (name == "identity") return identity();
  throw std::invalid_argument(fmt::format("unknown test function '{}'", name));
}

double generator_apply(const SDEModel& model, std::span<const double> x,
                       std::span<const double> grad, const Eigen::MatrixXd& hess) {
  const auto d = model.dim();
  if (x.size() != d || grad.size() != d || hess.rows() != static_cast<Eigen::Index>(d) ||
      hess.cols() != static_cast<Eigen::Index>(d))
    throw UnsupportedDimension(fmt::format("generator_apply expects dimension {}", d));
  double b[kMaxDim];
  model.drift(x, std::span<double>(b, d));
  double first = 0.0;
  for (std::size_t i = 0; i < d; ++i) first += b[i] * grad[i];
  const Eigen::MatrixXd a = model.sigma() * model.sigma().transpose();
  return first + 0.5 * (a.array() * hess.array()).sum();
}

ProbeReport dissipativity_probe(const SDEModel& model, std::size_t n_pairs, double radius,
                                std::uint64_t seed) {
  ProbeReport rep;
  rep.pairs = n_pairs;
  if (n_pairs == 0) return rep;
  const auto d = model.dim();
  const auto& c = model.constants();
  RandomStream rng(seed, 0, StreamTag::Probe);
  double x[kMaxDim], y[kMaxDim], bx[kMaxDim], by[kMaxDim];
  rep.max_violation = -INFINITY;
  std::uint64_t idx = 0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = radius * (2.0 * rng.uniform(idx++) - 1.0);
      y[i] = radius * (2.0 * rng.uniform(idx++) - 1.0);
    }
    model.drift(std::span<const double>(x, d), std::span<double>(bx, d));
    model.drift(std::span<const double>(y, d), std::span<double>(by, d));
    double inner = 0.0, r2 = 0.0, db2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double dx = x[i] - y[i], dbi = bx[i] - by[i];
      inner += dbi * dx;
      r2 += dx * dx;
      db2 += dbi * dbi;
    }
    rep.max_violation = std::max(rep.max_violation, inner + c.k1 * r2 - c.k2);
    if (r2 > 0) rep.lipschitz_ratio = std::max(rep.lipschitz_ratio, std::sqrt(db2 / r2));
  }
  const bool ok = rep.max_violation <= 0.0 && rep.lipschitz_ratio <= c.lipschitz * (1 + 1e-12);
  rep.verdict = ok ? Verdict::SatisfiedOnRange : Verdict::ViolatedAt;
  return rep;
}

double kappa(const DissipativityConstants& c, double r) {
  if (!(r > 0.0)) throw std::domain_error("kappa needs r > 0");
  return std::min(-c.k1 + c.k2 / (r * r), c.lipschitz);
}

double kappa(const SDEModel& model, double r) { return kappa(model.constants(), r); }

}  // namespace emclt
