#include "emclt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "emclt/io.hpp"

namespace emclt {

double clt_statistic(double sum_h, std::size_t n, double T_n, double pi_h) {
  if (!(T_n > 0.0)) throw std::invalid_argument("T_n must be positive");
  return (sum_h - static_cast<double>(n) * pi_h) / std::sqrt(T_n);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-transformed series for the CDF; converges fast for small lambda.
    const double w = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double term = std::exp(-static_cast<double>((2 * k - 1) * (2 * k - 1)) * w);
      cdf += term;
      if (term < 1e-300) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += sign * term;
    sign = -sign;
    if (term < 1e-18 * q) break;
  }
  return std::clamp(2.0 * q, 0.0, 1.0);
}

namespace {

double ks_p(double d, double n_eff) {
  const double s = std::sqrt(n_eff);
  return kolmogorov_survival((s + 0.12 + 0.11 / s) * d);
}

// Leave-one-out sample covariances (denominator N - 2) of two columns.
std::vector<double> loo_cov(std::span<const double> x, std::span<const double> y) {
  const std::size_t N = x.size();
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < N; ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
  }
  std::vector<double> out(N);
  const double m = static_cast<double>(N - 1);
  for (std::size_t i = 0; i < N; ++i) {
    const double ax = sx - x[i], ay = sy - y[i];
    out[i] = (sxy - x[i] * y[i] - ax * ay / m) / (m - 1.0);
  }
  return out;
}

double jackknife_se(const std::vector<double>& loo) {
  const double N = static_cast<double>(loo.size());
  double mean = 0.0;
  for (double v : loo) mean += v;
  mean /= N;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt((N - 1.0) / N * ss);
}

}  // namespace

KSResult ks_test_normal(std::span<const double> samples, double v) {
  const std::size_t N = samples.size();
  if (N < 30) throw std::invalid_argument(fmt::format("KS test needs >= 30 samples, got {}", N));
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  KSResult r;
  r.n = N;
  if (!(v > 0.0)) {
    if (v < 0.0 || x.front() != x.back())
      throw std::invalid_argument("KS reference variance must be positive");
    r.statistic = x.front() == 0.0 ? 0.0 : 1.0;
    r.p_value = ks_p(r.statistic, static_cast<double>(N));
    return r;
  }
  const double sd = std::sqrt(v);
  const double n = static_cast<double>(N);
  double d = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double F = normal_cdf(x[i] / sd);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  r.statistic = d;
  r.p_value = ks_p(d, n);
  return r;
}

KSResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("two-sample KS needs non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KSResult r;
  r.statistic = d;
  r.n = x.size() + y.size();
  r.p_value = ks_p(d, n * m / (n + m));
  return r;
}

SampleMoments sample_moments(std::span<const double> x) {
  SampleMoments m;
  if (x.empty()) return m;
  CompensatedSum s;
  for (double v : x) s.add(v);
  m.mean = s.value() / static_cast<double>(x.size());
  if (x.size() > 1) {
    CompensatedSum q;
    for (double v : x) q.add((v - m.mean) * (v - m.mean));
    m.variance = q.value() / static_cast<double>(x.size() - 1);
  }
  return m;
}

nlohmann::json CLTReport::summary() const {
  return {{"test_function", test_function}, {"n", n},          {"T_n", T_n},
          {"pi_h", pi_h},                   {"v", v},          {"samples", samples.size()},
          {"diverged", diverged},           {"ks_D", ks.statistic}, {"ks_p", ks.p_value},
          {"mean", moments.mean},           {"variance", moments.variance}};
}

void CLTReport::write_csv(const std::filesystem::path& path, const nlohmann::json& meta) const {
  CsvTable t({"chain_id", "statistic"});
  for (std::size_t i = 0; i < samples.size(); ++i)
    t.add_row({fmt::format("{}", chain_ids[i]), fmt_num(samples[i])});
  nlohmann::json m = meta;
  m.update(summary());
  t.write(path, m);
}

CLTReport clt_report(const EnsembleResult& result, std::size_t h_index, double T_n, double pi_h,
                     double v) {
  if (h_index >= result.test_functions.size()) throw std::out_of_range("test function index");
  CLTReport r;
  r.test_function = result.test_functions[h_index];
  r.n = result.steps;
  r.T_n = T_n;
  r.pi_h = pi_h;
  r.v = v;
  for (const auto& c : result.chains) {
    if (c.diverged) {
      ++r.diverged;
      continue;
    }
    r.chain_ids.push_back(c.chain_id);
    r.samples.push_back(clt_statistic(c.sum_h[h_index], result.steps, T_n, pi_h));
  }
  r.moments = sample_moments(r.samples);
  if (r.samples.size() >= 30) r.ks = ks_test_normal(r.samples, v);
  return r;
}

std::vector<double> fclt_paths(const EnsembleResult& result, std::size_t h_index, double T_n,
                               double pi_h, std::vector<std::uint64_t>* chain_ids) {
  const std::size_t G = result.snapshot_grid.size();
  std::vector<double> out;
  for (const auto& c : result.chains) {
    if (c.diverged) continue;
    if (chain_ids) chain_ids->push_back(c.chain_id);
    for (std::size_t g = 0; g < G; ++g)
      out.push_back(clt_statistic(c.snapshots[h_index * G + g], result.snapshot_index[g], T_n, pi_h));
  }
  return out;
}

FCLTReport fclt_covariance_test(std::span<const double> paths, std::span<const double> t_grid,
                                std::span<const double> a, double v) {
  const std::size_t G = t_grid.size();
  if (G < 1) throw std::invalid_argument("FCLT grid is empty");
  for (std::size_t g = 0; g < G; ++g)
    if (!(t_grid[g] >= 0.0 && t_grid[g] <= 1.0) || (g > 0 && !(t_grid[g] > t_grid[g - 1])))
      throw std::invalid_argument("singular FCLT grid: points must be increasing within [0,1]");
  if (a.size() != G) throw std::invalid_argument("time-change values do not match the grid");
  if (paths.size() % G) throw std::invalid_argument("path matrix is not chains x grid");
  const std::size_t N = paths.size() / G;
  if (N < 100) throw std::invalid_argument(fmt::format("FCLT test needs >= 100 chains, got {}", N));

  FCLTReport r;
  r.t_grid.assign(t_grid.begin(), t_grid.end());
  r.a.assign(a.begin(), a.end());
  r.v = v;
  r.chains = N;
  std::vector<std::vector<double>> col(G, std::vector<double>(N));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t g = 0; g < G; ++g) col[g][i] = paths[i * G + g];
  // Centre first so the leave-one-out sums do not cancel catastrophically.
  for (auto& c : col) {
    const double m = sample_moments(c).mean;
    for (double& x : c) x -= m;
  }

  r.cov.assign(G * G, 0.0);
  r.target.assign(G * G, 0.0);
  r.se.assign(G * G, 0.0);
  r.deviation.assign(G * G, 0.0);
  std::vector<std::vector<double>> loo(G * G);
  for (std::size_t s = 0; s < G; ++s)
    for (std::size_t t = s; t < G; ++t) {
      double c = 0.0;
      for (std::size_t i = 0; i < N; ++i) c += col[s][i] * col[t][i];
      c /= static_cast<double>(N - 1);
      loo[s * G + t] = loo_cov(col[s], col[t]);
      const double se = jackknife_se(loo[s * G + t]);
      const double target = v * std::min(a[s], a[t]);
      const double dev = se > 0.0 ? (c - target) / se : (c == target ? 0.0 : INFINITY);
      for (auto idx : {s * G + t, t * G + s}) {
        r.cov[idx] = c;
        r.target[idx] = target;
        r.se[idx] = se;
        r.deviation[idx] = dev;
      }
      r.max_abs_deviation = std::max(r.max_abs_deviation, std::abs(dev));
    }
  for (std::size_t s = 0; s < G; ++s)
    for (std::size_t t = s + 1; t < G; ++t) {
      std::vector<double> diff(N);
      for (std::size_t i = 0; i < N; ++i) diff[i] = loo[s * G + t][i] - loo[s * G + s][i];
      const double se = jackknife_se(diff);
      const double d = r.cov[s * G + t] - r.cov[s * G + s];
      r.max_increment_deviation =
          std::max(r.max_increment_deviation, se > 0.0 ? std::abs(d) / se : (d == 0.0 ? 0.0 : INFINITY));
    }

  Eigen::MatrixXd C(G, G);
  for (std::size_t s = 0; s < G; ++s)
    for (std::size_t t = 0; t < G; ++t) C(s, t) = r.cov[s * G + t];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  r.psd = r.min_eigenvalue >= -1e-10 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());

  for (std::size_t g = 0; g < G; ++g) {
    std::vector<double> raw(N);
    for (std::size_t i = 0; i < N; ++i) raw[i] = paths[i * G + g];
    try {
      r.marginal_p.push_back(ks_test_normal(raw, v * a[g]).p_value);
    } catch (const std::invalid_argument&) {
      r.marginal_p.push_back(0.0);
    }
  }
  r.pass = r.max_abs_deviation <= 4.0;
  return r;
}

nlohmann::json FCLTReport::summary() const {
  return {{"t_grid", t_grid},
          {"a", a},
          {"v", v},
          {"chains", chains},
          {"max_abs_deviation_se", max_abs_deviation},
          {"max_increment_deviation_se", max_increment_deviation},
          {"min_eigenvalue", min_eigenvalue},
          {"psd", psd},
          {"marginal_ks_p", marginal_p},
          {"pass", pass}};
}

void FCLTReport::write_covariance_csv(const std::filesystem::path& path,
                                      const nlohmann::json& meta) const {
  CsvTable t({"s", "t", "emp", "target", "se"});
  const std::size_t G = t_grid.size();
  for (std::size_t s = 0; s < G; ++s)
    for (std::size_t u = 0; u < G; ++u)
      t.add_row({fmt_num(t_grid[s]), fmt_num(t_grid[u]), fmt_num(cov[s * G + u]),
                 fmt_num(target[s * G + u]), fmt_num(se[s * G + u])});
  nlohmann::json m = meta;
  m.update(summary());
  t.write(path, m);
}

DecompositionDiag decomposition_diagnostics(const EnsembleResult& result, std::size_t n,
                                            double T_n, double pi_h,
                                            std::optional<std::size_t> h_index) {
  if (!(T_n > 0.0)) throw std::invalid_argument("T_n must be positive");
  DecompositionDiag d;
  d.n = n;
  d.T_n = T_n;
  const double rt = std::sqrt(T_n);
  const bool direct = h_index && n == result.steps;
  for (const auto& c : result.chains) {
    if (c.diverged) continue;
    const auto it = std::find_if(c.phi.begin(), c.phi.end(), [&](const PhiTally& p) { return p.n == n; });
    if (it == c.phi.end())
      throw std::invalid_argument(fmt::format("no decomposition tallies at n = {} (missing hooks)", n));
    const double stat = direct ? clt_statistic(c.sum_h.at(*h_index), n, T_n, pi_h) : it->stat / rt;
    const double M = it->martingale / rt, R0 = it->r0 / rt, R1 = it->r1 / rt, R2 = it->r2 / rt;
    const double R3 = M + R0 + R1 - R2 - it->stat / rt;
    d.statistic.push_back(stat);
    d.martingale.push_back(M);
    d.r0.push_back(R0);
    d.r1.push_back(R1);
    d.r2.push_back(R2);
    d.r3.push_back(R3);
    const double recombined = M + R0 + R1 - R2 - R3;
    const double scale =
        std::max({std::abs(stat), std::abs(M) + std::abs(R0) + std::abs(R1) + std::abs(R2),
                  std::numeric_limits<double>::min()});
    d.max_recombination_error = std::max(d.max_recombination_error, std::abs(recombined - stat) / scale);
  }
  d.m_statistic = sample_moments(d.statistic);
  d.m_martingale = sample_moments(d.martingale);
  d.m_r0 = sample_moments(d.r0);
  d.m_r1 = sample_moments(d.r1);
  d.m_r2 = sample_moments(d.r2);
  d.m_r3 = sample_moments(d.r3);
  std::vector<double> rem(d.r0.size());
  for (std::size_t i = 0; i < rem.size(); ++i)
    rem[i] = std::abs(d.r0[i]) + std::abs(d.r1[i]) + std::abs(d.r2[i]) + std::abs(d.r3[i]);
  d.remainder_abs_mean = sample_moments(rem).mean;
  return d;
}

nlohmann::json DecompositionDiag::summary() const {
  auto mv = [](const SampleMoments& m) { return nlohmann::json{{"mean", m.mean}, {"variance", m.variance}}; };
  return {{"n", n},
          {"T_n", T_n},
          {"chains", statistic.size()},
          {"statistic", mv(m_statistic)},
          {"martingale", mv(m_martingale)},
          {"R0", mv(m_r0)},
          {"R1", mv(m_r1)},
          {"R2", mv(m_r2)},
          {"R3", mv(m_r3)},
          {"remainder_abs_mean", remainder_abs_mean},
          {"max_recombination_error", max_recombination_error}};
}

MartingaleDiag martingale_conditions(const EnsembleResult& result, std::size_t n, double T_n,
                                     double v) {
  if (!(T_n > 0.0)) throw std::invalid_argument("T_n must be positive");
  MartingaleDiag d;
  d.n = n;
  d.v = v;
  for (const auto& c : result.chains) {
    if (c.diverged) continue;
    const auto it = std::find_if(c.phi.begin(), c.phi.end(), [&](const PhiTally& p) { return p.n == n; });
    if (it == c.phi.end())
      throw std::invalid_argument(fmt::format("no martingale tallies at n = {}", n));
    d.max_z.push_back(it->z_abs_max / std::sqrt(T_n));
    d.sum_z2.push_back(it->z_sq / T_n);
  }
  d.mean_max_z = sample_moments(d.max_z).mean;
  const auto m = sample_moments(d.sum_z2);
  d.mean_sum_z2 = m.mean;
  d.se_sum_z2 = std::sqrt(m.variance / static_cast<double>(std::max<std::size_t>(1, d.sum_z2.size())));
  d.deviation_se = d.se_sum_z2 > 0.0 ? (m.mean - v) / d.se_sum_z2 : 0.0;
  return d;
}

nlohmann::json MartingaleDiag::summary() const {
  return {{"n", n},
          {"chains", max_z.size()},
          {"mean_max_abs_z_over_sqrt_T", mean_max_z},
          {"mean_sum_z2_over_T", mean_sum_z2},
          {"se_sum_z2_over_T", se_sum_z2},
          {"v", v},
          {"deviation_se", deviation_se}};
}

double w2_empirical_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("W2 needs equal sample counts");
  if (a.empty()) throw std::invalid_argument("W2 needs at least one sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  CompensatedSum s;
  for (std::size_t i = 0; i < x.size(); ++i) s.add((x[i] - y[i]) * (x[i] - y[i]));
  return std::sqrt(s.value() / static_cast<double>(x.size()));
}

}  // namespace emclt
