#include "emclt/coupling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "emclt/analysis.hpp"
#include "emclt/engine.hpp"
#include "emclt/io.hpp"

namespace emclt {

namespace {

double kappa0(const DissipativityConstants& c, double r) {
  if (r <= 0.0) return c.k2 > 0.0 ? c.lipschitz : -c.k1;
  return kappa(c, r);
}

void require(const DissipativityConstants& c) {
  if (!(c.k1 > 0.0)) throw CurveConstructionError("curve construction needs K1 > 0");
  if (!(c.k3 > 1.0)) throw CurveConstructionError("curve construction needs K3 > 1");
  if (!(c.k2 >= 0.0) || !(c.lipschitz > 0.0))
    throw CurveConstructionError("curve construction needs K2 >= 0 and L > 0");
}

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  workers = std::min(workers ? workers : std::max(1u, std::thread::hardware_concurrency()), n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace

double coupling_R0(const DissipativityConstants& c) {
  require(c);
  if (c.k2 == 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (kappa0(c, hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw CurveConstructionError("kappa stays positive up to r = 1e12");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kappa0(c, mid) > 0.0 ? lo : hi) = mid;
  }
  return hi;
}

double coupling_R1(const DissipativityConstants& c, double R0) {
  require(c);
  // kappa is non-increasing in r (K2/r^2 decreases, and min with a constant keeps
  // that), so for s >= R0 the sup over r >= s of kappa(r) is kappa(s) <= 0 and
  // the condition "s(s-R0) kappa(r) <= -8 for all r >= s" reduces to F(s) <= -8
  // with F(s) = s(s-R0) kappa(s). F is a product of a non-negative non-decreasing
  // factor and a non-positive non-increasing one, hence non-increasing: bisection
  // finds its level set. As r -> infinity kappa -> -K1 < 0, so F -> -infinity.
  auto F = [&](double s) { return s * (s - R0) * kappa0(c, s); };
  double lo = R0, hi = std::max(R0, 1.0) * 2.0;
  while (F(hi) > -8.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12)
      throw CurveConstructionError(
          fmt::format("R1 search did not converge: F({:.3g}) = {:.3g} > -8", lo, F(lo)));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (F(mid) > -8.0 ? lo : hi) = mid;
  }
  return hi;
}

double phi_exponent(const DissipativityConstants& c, double r) {
  if (c.k2 == 0.0 || r <= 0.0) return 0.0;
  const double rl = std::sqrt(c.k2 / (c.k1 + c.lipschitz));
  const double R0 = std::sqrt(c.k2 / c.k1);
  double J = 0.5 * c.lipschitz * std::pow(std::min(r, rl), 2);
  if (r > rl) {
    const double rho = std::min(r, R0);
    J += -0.5 * c.k1 * (rho * rho - rl * rl) + c.k2 * std::log(rho / rl);
  }
  return 0.5 * c.k3 * J;
}

CouplingCurve build_curve(const SDEModel& model, const CurveGridSpec& spec) {
  return build_curve(model.constants(), spec);
}

CouplingCurve build_curve(const DissipativityConstants& c, const CurveGridSpec& spec) {
  require(c);
  if (spec.points < 3) throw std::invalid_argument("curve grid needs at least 3 points");
  CouplingCurve cv;
  cv.constants = c;
  cv.R0 = coupling_R0(c);
  cv.R1 = coupling_R1(c, cv.R0);
  const double r_max = spec.r_max.value_or(std::max(2.0 * cv.R1, cv.R1 + 1.0));
  if (!(r_max > cv.R1)) throw std::invalid_argument("r_max must exceed R1");

  const std::size_t P = spec.points;
  const auto m1 = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(P - 1) * cv.R1 / r_max)), 1, P - 2);
  const double dr = cv.R1 / static_cast<double>(m1);
  cv.r1_index = m1;

  auto& r = cv.r;
  r.resize(P);
  cv.kappa.resize(P);
  cv.phi.resize(P);
  std::vector<double> dphi(P);
  for (std::size_t i = 0; i < P; ++i) {
    r[i] = i == m1 ? cv.R1 : static_cast<double>(i) * dr;
    cv.kappa[i] = kappa0(c, r[i]);
    cv.phi[i] = std::exp(-phi_exponent(c, r[i]));
    dphi[i] = -0.5 * c.k3 * r[i] * std::max(cv.kappa[i], 0.0) * cv.phi[i];
  }

  // Trapezoid with endpoint-derivative correction: h/2 (y0 + y1) + h^2/12 (y0' - y1').
  auto cumulate = [&](const std::vector<double>& y, const std::vector<double>& dy,
                      std::vector<double>& out) {
    out.assign(P, 0.0);
    for (std::size_t i = 0; i + 1 < P; ++i) {
      const double h = r[i + 1] - r[i];
      out[i + 1] = out[i] + 0.5 * h * (y[i] + y[i + 1]) + h * h / 12.0 * (dy[i] - dy[i + 1]);
    }
  };
  cumulate(cv.phi, dphi, cv.Phi);

  std::vector<double> a(P), da(P), b(P), db(P), A, B;
  for (std::size_t i = 0; i < P; ++i) {
    const double p = cv.phi[i], p2 = p * p;
    a[i] = cv.Phi[i] / p;
    da[i] = 1.0 - cv.Phi[i] * dphi[i] / p2;
    b[i] = 1.0 / p;
    db[i] = -dphi[i] / p2;
  }
  cumulate(a, da, A);
  cumulate(b, db, B);
  cv.int_Phi_over_phi = A[m1];
  cv.int_inv_phi = B[m1];
  cv.c1 = 1.0 / (2.0 * c.k3 * cv.int_Phi_over_phi);
  cv.c2 = 1.0 / (4.0 * c.k3 * cv.int_inv_phi);

  cv.g.resize(P);
  cv.df.resize(P);
  cv.d2f.resize(P);
  std::vector<double> dg(P, 0.0);
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t j = std::min(i, m1);
    cv.g[i] = 1.0 - 0.5 * cv.c1 * c.k3 * A[j] - cv.c2 * c.k3 * B[j];
    if (i <= m1) dg[i] = -0.5 * cv.c1 * c.k3 * a[i] - cv.c2 * c.k3 * b[i];
    cv.df[i] = cv.phi[i] * cv.g[i];
    cv.d2f[i] = dphi[i] * cv.g[i] + cv.phi[i] * dg[i];
  }
  // f'' jumps at R1 (g' switches off); the cell to its right uses the right limit.
  cv.f.assign(P, 0.0);
  for (std::size_t i = 0; i + 1 < P; ++i) {
    const double h = r[i + 1] - r[i];
    const double left = i == m1 ? dphi[i] * cv.g[i] : cv.d2f[i];
    cv.f[i + 1] = cv.f[i] + 0.5 * h * (cv.df[i] + cv.df[i + 1]) + h * h / 12.0 * (left - cv.d2f[i + 1]);
  }
  return cv;
}

double CouplingCurve::f_at(double x) const {
  if (x <= 0.0) return 0.0;
  const std::size_t P = r.size();
  if (x >= r.back()) return f.back() + df.back() * (x - r.back());
  const auto it = std::upper_bound(r.begin(), r.end(), x);
  const std::size_t i = std::min<std::size_t>(P - 2, static_cast<std::size_t>(it - r.begin()) - 1);
  const double h = r[i + 1] - r[i], t = (x - r[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f[i] + (t3 - 2 * t2 + t) * h * df[i] +
         (-2 * t3 + 3 * t2) * f[i + 1] + (t3 - t2) * h * df[i + 1];
}

void CouplingCurve::write_csv(const std::filesystem::path& path, const nlohmann::json& meta) const {
  CsvTable t({"r", "kappa", "phi_E", "Phi", "g", "f", "df", "d2f"});
  for (std::size_t i = 0; i < r.size(); ++i)
    t.add_row({fmt_num(r[i]), fmt_num(kappa[i]), fmt_num(phi[i]), fmt_num(Phi[i]), fmt_num(g[i]),
               fmt_num(f[i]), fmt_num(df[i]), fmt_num(d2f[i])});
  nlohmann::json m = meta;
  m["R0"] = R0;
  m["R1"] = R1;
  m["c1"] = c1;
  m["c2"] = c2;
  m["K1"] = constants.k1;
  m["K2"] = constants.k2;
  m["K3"] = constants.k3;
  m["L"] = constants.lipschitz;
  t.write(path, m);
}

FInequalityReport check_f_inequalities(const CouplingCurve& cv) {
  FInequalityReport rep;
  const auto& c = cv.constants;
  const double phi_R0 = std::exp(-phi_exponent(c, cv.R0));
  rep.local_violation = -INFINITY;
  rep.c1_prime = INFINITY;
  rep.max_f_second = -INFINITY;
  rep.max_lower_gap = -INFINITY;
  rep.max_upper_gap = -INFINITY;
  rep.df_min = INFINITY;
  rep.df_max = -INFINITY;
  rep.g_min_to_R1 = INFINITY;
  for (std::size_t i = 0; i < cv.r.size(); ++i) {
    const double r = cv.r[i];
    const double lhs = cv.d2f[i] / c.k3 + 0.5 * r * cv.kappa[i] * cv.df[i];
    if (i >= 1 && i <= cv.r1_index)
      rep.local_violation = std::max(rep.local_violation, lhs + 0.5 * cv.c1 * cv.f[i] + cv.c2);
    if (i >= 1) rep.c1_prime = std::min(rep.c1_prime, -2.0 * lhs / cv.f[i]);
    rep.max_f_second = std::max(rep.max_f_second, cv.d2f[i]);
    rep.max_lower_gap = std::max(rep.max_lower_gap, 0.5 * phi_R0 * r - cv.f[i]);
    rep.max_upper_gap = std::max(rep.max_upper_gap, cv.f[i] - r);
    rep.df_min = std::min(rep.df_min, cv.df[i]);
    rep.df_max = std::max(rep.df_max, cv.df[i]);
    if (i <= cv.r1_index) rep.g_min_to_R1 = std::min(rep.g_min_to_R1, cv.g[i]);
    if (i >= 1 && cv.g[i] > cv.g[i - 1]) rep.g_non_increasing = false;
  }
  return rep;
}

double rho1(const Rho1Params& p, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UnsupportedDimension("rho1 dimension mismatch");
  if (!p.curve) throw std::invalid_argument("rho1 needs a curve");
  double d2 = 0.0, vx = 1.0, vy = 1.0;
  bool same = true;
  for (std::size_t i = 0; i < x.size(); ++i) {
    same = same && x[i] == y[i];
    d2 += (x[i] - y[i]) * (x[i] - y[i]);
    vx += x[i] * x[i];
    vy += y[i] * y[i];
  }
  if (same) return 0.0;
  return p.curve->f_at(std::sqrt(d2)) + p.epsilon * (vx + vy);
}

void coupled_step(CoupledPair& pair, const SDEModel& model, double t0, double t1, std::size_t m,
                  double delta_stick, const CouplingNoise& noise, std::uint64_t offset,
                  ReseparationPolicy policy) {
  if (m < 1) throw std::invalid_argument("substep count must be >= 1");
  if (!(t1 > t0)) throw std::invalid_argument("interval must have positive length");
  const std::size_t d = model.dim();
  if (pair.x.size() != d || pair.y.size() != d)
    throw UnsupportedDimension("coupled pair dimension mismatch");
  const double delta = (t1 - t0) / static_cast<double>(m), sq = std::sqrt(delta);
  const auto& S = model.sigma();
  const auto& Si = model.sigma_inverse();

  double by[kMaxDim], bx[kMaxDim], z[kMaxDim], e[kMaxDim], dB[kMaxDim], u[kMaxDim];
  double nx[kMaxDim], ny[kMaxDim];
  model.drift(pair.y, std::span<double>(by, d));

  for (std::size_t j = 0; j < m; ++j) {
    double nz2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      z[i] = pair.x[i] - pair.y[i];
      nz2 += z[i] * z[i];
    }
    const bool sticky = std::sqrt(nz2) < delta_stick;
    const bool sync =
        sticky || (policy == ReseparationPolicy::ForceSynchronous && pair.ever_coalesced);
    if (pair.coalesced && !sticky) {
      if (!sync) ++pair.reseparations;
      pair.coalesced = sync;
    }
    const RandomStream& src = sync ? noise.b2 : noise.b1;
    for (std::size_t i = 0; i < d; ++i) dB[i] = sq * src.normal(offset + j * d + i);

    if (sync) {
      std::copy(dB, dB + d, u);
    } else {
      // e = sigma^{-1} Z / |sigma^{-1} Z|, u = (I - 2 e e^T) dB.
      double ne2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        e[i] = 0.0;
        for (std::size_t l = 0; l < d; ++l) e[i] += Si(i, l) * z[l];
        ne2 += e[i] * e[i];
      }
      const double ne = std::sqrt(ne2);
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        e[i] /= ne;
        proj += e[i] * dB[i];
      }
      for (std::size_t i = 0; i < d; ++i) u[i] = dB[i] - 2.0 * proj * e[i];
    }

    model.drift(pair.x, std::span<double>(bx, d));
    double cross = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double sx = 0.0, sy = 0.0;
      for (std::size_t l = 0; l < d; ++l) {
        sx += S(i, l) * dB[l];
        sy += S(i, l) * u[l];
      }
      nx[i] = pair.x[i] + delta * bx[i] + sx;
      ny[i] = pair.y[i] + delta * by[i] + sy;
      if (!std::isfinite(nx[i]) || !std::isfinite(ny[i]) || std::abs(nx[i]) > kDivergenceBound ||
          std::abs(ny[i]) > kDivergenceBound)
        throw ChainDiverged(0, j + 1, std::isfinite(nx[i]) ? ny[i] : nx[i]);
      cross += z[i] * (nx[i] - ny[i]);
    }
    bool met = !sync && cross <= 0.0;
    if (!sync && !met) {
      // Z moves along e with noise 2 sigma e (e . dB); a bridge between two
      // same-side endpoints still touches zero with probability exp(-2 z0 z1 / s^2).
      double se2 = 0.0, z1 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double v = 0.0;
        for (std::size_t l = 0; l < d; ++l) v += S(i, l) * e[l];
        se2 += v * v;
        z1 += (nx[i] - ny[i]) * (nx[i] - ny[i]);
      }
      const double s2 = 4.0 * se2 * delta;
      met = noise.b1.uniform(offset + j * d) < std::exp(-2.0 * std::sqrt(nz2 * z1) / s2);
    }
    if (met) {
      std::copy(nx, nx + d, ny);
      pair.coalesced = true;
      pair.ever_coalesced = true;
    }
    std::copy(nx, nx + d, pair.x.begin());
    std::copy(ny, ny + d, pair.y.begin());
    if (sync && sticky) {
      pair.coalesced = true;
      pair.ever_coalesced = true;
    }
  }
}

std::vector<double> bound_proxy(const SchedulePrefix& prefix, double c) {
  const std::size_t n = prefix.n_max();
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double eta = prefix.eta(k);
    out[k] = std::exp(-c * eta) * out[k - 1] + eta * std::sqrt(eta);
  }
  return out;
}

ContractionReport contraction_study(const SDEModel& model, const StepSchedule& schedule, double z,
                                    std::size_t n_end, std::size_t pairs,
                                    const ContractionParams& params) {
  if (pairs < 1 || n_end < 1) throw std::invalid_argument("need pairs >= 1 and n_end >= 1");
  const auto prefix = build_prefix(schedule, n_end);
  auto curve = std::make_shared<const CouplingCurve>(build_curve(model, params.grid));
  ContractionReport rep;
  rep.pairs = pairs;
  rep.c = params.c.value_or(curve->c1 / 2.0);
  rep.epsilon = params.epsilon.value_or(curve->c2);
  if (!(rep.c > 0.0) || !(rep.epsilon > 0.0))
    throw std::invalid_argument("contraction rate c and epsilon must be positive");
  const Rho1Params rp{curve, rep.epsilon};

  auto marks = params.checkpoints;
  if (marks.empty())
    for (std::size_t n = 1; n <= n_end; n *= 10) marks.push_back(n);
  if (marks.back() != n_end) marks.push_back(n_end);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  if (marks.front() < 1 || marks.back() > n_end)
    throw std::invalid_argument("checkpoints must lie in [1, n_end]");

  const std::size_t d = model.dim(), C = marks.size();
  std::vector<double> rho(pairs * C), coal(pairs * C);
  std::vector<std::size_t> resep(pairs);
  parallel_for(pairs, params.workers, [&](std::size_t p) {
    CoupledPair pair{std::vector<double>(d, z), std::vector<double>(d, z)};
    const CouplingNoise noise(params.seed, p);
    std::size_t next = 0;
    for (std::size_t k = 1; k <= n_end; ++k) {
      coupled_step(pair, model, prefix.t(k - 1), prefix.t(k), params.substeps, params.delta_stick,
                   noise, (k - 1) * params.substeps * d, params.policy);
      while (next < C && marks[next] == k) {
        // delta_stick is the resolution at which the pair counts as equal.
        double z2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) z2 += (pair.x[i] - pair.y[i]) * (pair.x[i] - pair.y[i]);
        rho[p * C + next] = std::sqrt(z2) < params.delta_stick ? 0.0 : rho1(rp, pair.x, pair.y);
        coal[p * C + next] = pair.coalesced ? 1.0 : 0.0;
        ++next;
      }
    }
    resep[p] = pair.reseparations;
  });

  const auto proxy = bound_proxy(prefix, rep.c);
  for (std::size_t i = 0; i < C; ++i) {
    StudyRow row;
    row.n = marks[i];
    row.t = prefix.t(row.n);
    row.eta = prefix.eta(row.n);
    CompensatedSum s, cs;
    for (std::size_t p = 0; p < pairs; ++p) {
      s.add(rho[p * C + i]);
      cs.add(coal[p * C + i]);
    }
    row.estimate = s.value() / static_cast<double>(pairs);
    row.coalesced_fraction = cs.value() / static_cast<double>(pairs);
    row.bound_proxy = proxy[row.n];
    row.ratio = row.estimate / row.bound_proxy;
    rep.rows.push_back(row);
  }
  for (auto r : resep) rep.reseparations += r;

  std::vector<double> lx, ly;
  for (std::size_t i = C / 2; i < C; ++i) {
    if (!(rep.rows[i].ratio > 0.0)) continue;
    lx.push_back(std::log(static_cast<double>(rep.rows[i].n)));
    ly.push_back(std::log(rep.rows[i].ratio));
  }
  if (lx.size() >= 2) {
    rep.ratio_trend = ls_slope(lx, ly);
    rep.verdict = rep.ratio_trend <= 0.05 ? Verdict::SatisfiedOnRange : Verdict::ViolatedAt;
  }
  return rep;
}

W2Report w2_rate_study(const SDEModel& model, const StepSchedule& schedule, double z,
                       std::span<const std::size_t> checkpoints, std::size_t pairs,
                       const W2Params& params) {
  if (model.dim() != 1) throw UnsupportedDimension("W2 rate study is one-dimensional");
  if (checkpoints.empty() || !std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end() ||
      checkpoints.front() < 1)
    throw std::invalid_argument("checkpoints must be strictly increasing and >= 1");
  if (pairs < 1) throw std::invalid_argument("need at least one pair");
  const std::size_t n_end = checkpoints.back(), C = checkpoints.size();
  const auto prefix = build_prefix(schedule, n_end);
  const std::size_t m = params.substeps;
  const double s = model.scalar_sigma();

  std::vector<double> coarse(C * pairs), fine(C * pairs);
  parallel_for(pairs, params.workers, [&](std::size_t p) {
    const RandomStream xi(params.seed, p, StreamTag::Step);
    const RandomStream bridge(params.seed, p, StreamTag::Bridge);
    std::vector<double> dw(m);
    double theta = z, x = z;
    std::size_t next = 0;
    for (std::size_t k = 1; k <= n_end; ++k) {
      const double eta = prefix.eta(k), sq = std::sqrt(eta);
      const double inc = sq * xi.normal(k - 1);
      const double b = model.drift(theta);
      theta = theta + eta * b + s * inc;
      bridge_increments(inc, eta, m, bridge, (k - 1) * m, dw);
      const double delta = eta / static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) x = x + delta * model.drift(x) + s * dw[j];
      if (!std::isfinite(theta) || !std::isfinite(x) || std::abs(theta) > kDivergenceBound ||
          std::abs(x) > kDivergenceBound)
        throw ChainDiverged(p, k, std::isfinite(theta) ? x : theta);
      if (next < C && checkpoints[next] == k) {
        coarse[next * pairs + p] = theta;
        fine[next * pairs + p] = x;
        ++next;
      }
    }
  });

  W2Report rep;
  std::vector<double> lx, ly, ratios;
  for (std::size_t i = 0; i < C; ++i) {
    StudyRow row;
    row.n = checkpoints[i];
    row.t = prefix.t(row.n);
    row.eta = prefix.eta(row.n);
    row.estimate = w2_empirical_1d(std::span<const double>(coarse.data() + i * pairs, pairs),
                                   std::span<const double>(fine.data() + i * pairs, pairs));
    row.bound_proxy = std::pow(row.eta, 0.25);
    row.ratio = row.estimate / row.bound_proxy;
    ratios.push_back(row.ratio);
    if (row.estimate > 0.0) {
      lx.push_back(std::log(row.eta));
      ly.push_back(std::log(row.estimate));
    }
    rep.rows.push_back(row);
  }
  rep.slope = ls_slope(lx, ly);
  std::vector<double> sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                          : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  const double tail_max = *std::max_element(ratios.begin() + static_cast<long>(C / 2), ratios.end());
  rep.ratio_spread = median > 0.0 ? tail_max / median : (tail_max > 0.0 ? INFINITY : 0.0);
  rep.ratio_bounded = rep.ratio_spread <= 2.0;
  rep.verdict = rep.ratio_bounded ? Verdict::SatisfiedOnRange : Verdict::ViolatedAt;
  return rep;
}

void write_study_csv(const std::vector<StudyRow>& rows, const std::filesystem::path& path,
                     const nlohmann::json& meta) {
  CsvTable t({"n", "t_n", "eta_n", "estimate", "bound_proxy", "ratio"});
  for (const auto& r : rows)
    t.add_row({fmt::format("{}", r.n), fmt_num(r.t), fmt_num(r.eta), fmt_num(r.estimate),
               fmt_num(r.bound_proxy), fmt_num(r.ratio)});
  t.write(path, meta);
}

}  // namespace emclt
