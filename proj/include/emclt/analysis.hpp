#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emclt/engine.hpp"

namespace emclt {

/// (sum_h - n pi_h) / sqrt(T_n).
double clt_statistic(double sum_h, std::size_t n, double T_n, double pi_h);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);
double normal_cdf(double x);

struct KSResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

KSResult ks_test_normal(std::span<const double> samples, double v);
KSResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};
SampleMoments sample_moments(std::span<const double> x);

struct CLTReport {
  std::string test_function;
  std::size_t n = 0;
  double T_n = 0.0;
  double pi_h = 0.0;
  double v = 0.0;
  std::vector<std::uint64_t> chain_ids;
  std::vector<double> samples;
  std::size_t diverged = 0;
  KSResult ks;
  SampleMoments moments;

  nlohmann::json summary() const;
  /// columns chain_id, statistic; summary in the sidecar.
  void write_csv(const std::filesystem::path& path, const nlohmann::json& meta) const;
};

CLTReport clt_report(const EnsembleResult& result, std::size_t h_index, double T_n, double pi_h,
                     double v);

struct FCLTReport {
  std::vector<double> t_grid, a;
  double v = 0.0;
  std::size_t chains = 0;
  /// Row-major G x G matrices.
  std::vector<double> cov, target, se, deviation;
  std::vector<double> marginal_p;
  double max_abs_deviation = 0.0;
  /// max over s < t of |C(s,t) - C(s,s)| / SE.
  double max_increment_deviation = 0.0;
  double min_eigenvalue = 0.0;
  bool psd = true;
  bool pass = false;

  nlohmann::json summary() const;
  /// Long format: s, t, emp, target, se.
  void write_covariance_csv(const std::filesystem::path& path, const nlohmann::json& meta) const;
};

/// W_n(t_g) per surviving chain, row-major chains x G.
std::vector<double> fclt_paths(const EnsembleResult& result, std::size_t h_index, double T_n,
                               double pi_h, std::vector<std::uint64_t>* chain_ids = nullptr);

FCLTReport fclt_covariance_test(std::span<const double> paths, std::span<const double> t_grid,
                                std::span<const double> a, double v);

struct DecompositionDiag {
  std::size_t n = 0;
  double T_n = 0.0;
  std::vector<double> statistic, martingale, r0, r1, r2, r3;
  SampleMoments m_statistic, m_martingale, m_r0, m_r1, m_r2, m_r3;
  /// Ensemble mean of |R0| + |R1| + |R2| + |R3|.
  double remainder_abs_mean = 0.0;
  /// Largest per-chain |recombined - direct statistic| relative to the term scale.
  double max_recombination_error = 0.0;
  nlohmann::json summary() const;
};

/// Uses the tallies captured at step n of every surviving chain; `sum_h` of the
/// matching test function is used for the direct statistic when n is the run length.
DecompositionDiag decomposition_diagnostics(const EnsembleResult& result, std::size_t n,
                                            double T_n, double pi_h,
                                            std::optional<std::size_t> h_index = std::nullopt);

struct MartingaleDiag {
  std::size_t n = 0;
  std::vector<double> max_z, sum_z2;  // |Z|max / sqrt(T_n), sum Z^2 / T_n
  double mean_max_z = 0.0;
  double mean_sum_z2 = 0.0, se_sum_z2 = 0.0;
  double v = 0.0;
  /// (mean_sum_z2 - v) / se_sum_z2.
  double deviation_se = 0.0;
  nlohmann::json summary() const;
};

MartingaleDiag martingale_conditions(const EnsembleResult& result, std::size_t n, double T_n,
                                     double v);

double w2_empirical_1d(std::span<const double> a, std::span<const double> b);

}  // namespace emclt
