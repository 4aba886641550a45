#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "emclt/common.hpp"

namespace emclt {

inline constexpr std::size_t kMaxDim = 4;

using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;
using ScalarDriftFn = std::function<double(double)>;

struct DissipativityConstants {
  double lipschitz = 0.0;  // L
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
};

/// dtheta = b(theta) dt + sigma dB with constant invertible sigma.
class SDEModel {
 public:
  SDEModel(std::string name, std::size_t dim, DriftFn drift, Eigen::MatrixXd sigma,
           DissipativityConstants constants);
  /// One-dimensional model from a scalar drift.
  SDEModel(std::string name, ScalarDriftFn drift, double sigma, DissipativityConstants constants);

  static SDEModel shifted_sine();
  static SDEModel ornstein_uhlenbeck(double sigma);

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  const DissipativityConstants& constants() const noexcept { return constants_; }
  const Eigen::MatrixXd& sigma() const noexcept { return sigma_; }
  const Eigen::MatrixXd& sigma_inverse() const noexcept { return sigma_inv_; }

  void drift(std::span<const double> x, std::span<double> out) const;
  /// d = 1 only.
  double drift(double x) const;
  double scalar_sigma() const;

 private:
  std::string name_;
  std::size_t dim_;
  DriftFn drift_;
  ScalarDriftFn scalar_drift_;
  Eigen::MatrixXd sigma_, sigma_inv_;
  DissipativityConstants constants_;
  void validate();
};

enum class BuiltinModel { ShiftedSine, OrnsteinUhlenbeck };
SDEModel builtin_model(BuiltinModel which, double sigma = 1.0);

class TestFunction {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  TestFunction(std::string name, Fn h, double lipschitz_bound);
  TestFunction(std::string name, std::function<double(double)> h, double lipschitz_bound);

  static TestFunction witch();
  static TestFunction sine();
  static TestFunction identity();
  static TestFunction constant(double c);
  static TestFunction by_name(const std::string& name);

  double operator()(std::span<const double> x) const { return h_(x); }
  double operator()(double x) const { return scalar_ ? scalar_(x) : h_(std::span<const double>(&x, 1)); }

  const std::string& name() const noexcept { return name_; }
  double lipschitz_bound() const noexcept { return lipschitz_; }

 private:
  std::string name_;
  Fn h_;
  std::function<double(double)> scalar_;
  double lipschitz_;
};

/// <b(x), grad> + (1/2) <sigma sigma^T, hess>_HS.
double generator_apply(const SDEModel& model, std::span<const double> x,
                       std::span<const double> grad, const Eigen::MatrixXd& hess);

struct ProbeReport {
  std::size_t pairs = 0;
  double max_violation = 0.0;
  double lipschitz_ratio = 0.0;
  Verdict verdict = Verdict::Inconclusive;
};

/// Samples pairs uniformly in [-radius, radius]^d.
ProbeReport dissipativity_probe(const SDEModel& model, std::size_t n_pairs, double radius,
                                std::uint64_t seed);

double kappa(const DissipativityConstants& c, double r);
double kappa(const SDEModel& model, double r);

}  // namespace emclt
