#include "emclt/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "emclt/io.hpp"

namespace emclt {

namespace {

using Index = long long;

// Mirrored-pair Simpson sum over cells of values already weighted by the density.
double simpson_pairs(double dx, const std::vector<double>& node, const std::vector<double>& mid) {
  const std::size_t cells = node.size() - 1;
  auto cell = [&](std::size_t i) { return dx / 6.0 * ((node[i] + node[i + 1]) + 4.0 * mid[i]); };
  double total = 0.0;
  for (std::size_t j = 0; j < cells / 2; ++j) total += cell(j) + cell(cells - 1 - j);
  return total;
}

double hermite(double y0, double y1, double s0, double s1, double dx, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * dx * s0 + (-2 * t3 + 3 * t2) * y1 +
         (t3 - t2) * dx * s1;
}

struct Potential {
  std::vector<double> node, mid;
  double shift = 0.0;
};

Potential integrate_potential(const SDEModel& model, const UniformGrid& g, double sigma) {
  const std::size_t N = g.points, c = (N - 1) / 2;
  const double k = 2.0 / (sigma * sigma);
  auto u = [&](double x) { return k * model.drift(x); };
  auto at = [&](double rel) { return rel * g.dx; };
  Potential p;
  p.node.assign(N, 0.0);
  p.mid.assign(N - 1, 0.0);
  for (std::size_t i = c; i + 1 < N; ++i) {
    const Index r = static_cast<Index>(i) - static_cast<Index>(c);
    const double ui = u(g.x(i)), ui1 = u(g.x(i + 1)), um = u(g.midpoint(i));
    p.node[i + 1] = p.node[i] + g.dx / 6.0 * ((ui + ui1) + 4.0 * um);
    p.mid[i] = p.node[i] + g.dx / 12.0 * ((ui + um) + 4.0 * u(at(r + 0.25)));
  }
  for (std::size_t i = c; i-- > 0;) {
    const Index r = static_cast<Index>(i) - static_cast<Index>(c);
    const double ui = u(g.x(i)), ui1 = u(g.x(i + 1)), um = u(g.midpoint(i));
    p.node[i] = p.node[i + 1] - g.dx / 6.0 * ((ui1 + ui) + 4.0 * um);
    p.mid[i] = p.node[i + 1] - g.dx / 12.0 * ((ui1 + um) + 4.0 * u(at(r + 0.75)));
  }
  p.shift = *std::max_element(p.node.begin(), p.node.end());
  return p;
}

StationaryDensity density_on(const SDEModel& model, const UniformGrid& g) {
  StationaryDensity d;
  d.grid = g;
  d.sigma = model.scalar_sigma();
  auto pot = integrate_potential(model, g, d.sigma);
  d.log_unnormalized = std::move(pot.node);
  d.log_unnormalized_mid = std::move(pot.mid);
  d.log_shift = pot.shift;
  const std::size_t N = g.points;
  d.density.resize(N);
  d.density_mid.resize(N - 1);
  for (std::size_t i = 0; i < N; ++i) d.density[i] = std::exp(d.log_unnormalized[i] - d.log_shift);
  for (std::size_t i = 0; i + 1 < N; ++i)
    d.density_mid[i] = std::exp(d.log_unnormalized_mid[i] - d.log_shift);
  d.normalizer = simpson_pairs(g.dx, d.density, d.density_mid);
  for (double& v : d.density) v /= d.normalizer;
  for (double& v : d.density_mid) v /= d.normalizer;

  // Laplace estimate of the mass beyond each end: pi(X) / |U'(X)|.
  const double k = 2.0 / (d.sigma * d.sigma);
  const double ur = k * model.drift(g.x(N - 1)), ul = k * model.drift(g.x(0));
  const double tr = ur < 0 ? d.density[N - 1] / -ur : INFINITY;
  const double tl = ul > 0 ? d.density[0] / ul : INFINITY;
  d.tail_mass = tl + tr;
  return d;
}

UniformGrid make_grid(std::size_t points, double x_max) {
  UniformGrid g;
  g.points = points;
  g.x_max = x_max;
  g.dx = x_max / static_cast<double>((points - 1) / 2);
  return g;
}

}  // namespace

double UniformGrid::x(std::size_t i) const {
  return static_cast<double>(static_cast<Index>(i) - static_cast<Index>((points - 1) / 2)) * dx;
}

double UniformGrid::midpoint(std::size_t i) const {
  return (static_cast<double>(static_cast<Index>(i) - static_cast<Index>((points - 1) / 2)) + 0.5) *
         dx;
}

StationaryDensity stationary_density(const SDEModel& model, const GridSpec& spec) {
  if (model.dim() != 1)
    throw UnsupportedDimension("stationary density is implemented for d = 1 only");
  if (spec.points < 5 || spec.points % 2 == 0)
    throw std::invalid_argument("grid needs an odd number of points >= 5");
  if (spec.x_max) {
    if (!(*spec.x_max > 0.0)) throw std::invalid_argument("x_max must be positive");
    auto d = density_on(model, make_grid(spec.points, *spec.x_max));
    if (!(d.tail_mass < spec.tail_mass))
      throw GridError(fmt::format(
          "estimated tail mass {:.3g} beyond x_max={} exceeds {:.3g}; use a larger x_max",
          d.tail_mass, *spec.x_max, spec.tail_mass));
    return d;
  }
  double x_max = 4.0;
  for (int it = 0; it < 60; ++it, x_max *= 1.25) {
    auto d = density_on(model, make_grid(spec.points, x_max));
    if (d.tail_mass < spec.tail_mass) return d;
  }
  throw GridError("could not find an x_max meeting the tail criterion; set x_max explicitly");
}

PoissonSolution solve_poisson(const SDEModel& model, const TestFunction& h,
                              const StationaryDensity& dens) {
  if (model.dim() != 1) throw UnsupportedDimension("Poisson solver is implemented for d = 1 only");
  const auto& g = dens.grid;
  const std::size_t N = g.points;
  if (dens.density.size() != N) throw GridError("density does not match its grid");
  PoissonSolution sol(model, h);
  sol.grid_ = g;
  sol.sigma_ = dens.sigma;
  sol.density_ = dens.density;
  const double s2 = dens.sigma * dens.sigma, k = 2.0 / s2;
  const double dx = g.dx;

  const double pi_h = dens.expect([&](double x) { return h(x); });
  sol.pi_h_ = pi_h;
  std::vector<double> gn(N), gm(N - 1), b(N);
  for (std::size_t i = 0; i < N; ++i) {
    gn[i] = h(g.x(i)) - pi_h;
    b[i] = model.drift(g.x(i));
  }
  for (std::size_t i = 0; i + 1 < N; ++i) gm[i] = h(g.midpoint(i)) - pi_h;
  if (!std::isfinite(pi_h)) throw GridError("h is not integrable on the density grid");

  const auto& U = dens.log_unnormalized;
  const auto& Um = dens.log_unnormalized_mid;

  // Two-term Laplace asymptotic of the truncated tail integral, psi ~ q - q'/U'.
  const std::size_t c = (N - 1) / 2;
  auto xs = [&](Index j) { return static_cast<double>(j) * dx; };
  auto q = [&](double x) {
    const double up = k * model.drift(x);
    return up != 0.0 ? (h(x) - pi_h) / up : 0.0;
  };
  auto tail_psi = [&](Index j) {
    const double x = xs(j);
    const double up = k * model.drift(x);
    if (up == 0.0) return 0.0;
    const double dq = (q(xs(j + 1)) - q(xs(j - 1))) / (2.0 * dx);
    return q(x) - dq / up;
  };
  const Index ci = static_cast<Index>(c);

  std::vector<double> psi(N, 0.0);
  const std::size_t mode = static_cast<std::size_t>(std::max_element(U.begin(), U.end()) - U.begin());
  psi[0] = tail_psi(-ci);
  for (std::size_t i = 0; i < mode; ++i) {
    const double e = std::exp(U[i] - U[i + 1]);
    const double em = std::exp(Um[i] - U[i + 1]);
    psi[i + 1] = psi[i] * e + dx / 6.0 * ((gn[i] * e + gn[i + 1]) + 4.0 * gm[i] * em);
  }
  const double left_at_mode = psi[mode];
  psi[N - 1] = tail_psi(ci);
  for (std::size_t i = N - 1; i-- > mode;) {
    const double e = std::exp(U[i + 1] - U[i]);
    const double em = std::exp(Um[i] - U[i]);
    psi[i] = psi[i + 1] * e - dx / 6.0 * ((gn[i + 1] * e + gn[i]) + 4.0 * gm[i] * em);
  }
  sol.junction_mismatch_ = std::abs(left_at_mode - psi[mode]);
  psi[mode] = 0.5 * (left_at_mode + psi[mode]);

  auto& d1 = sol.dphi_;
  auto& d2 = sol.d2phi_;
  auto& p = sol.phi_;
  d1.resize(N);
  d2.resize(N);
  p.assign(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    d1[i] = k * psi[i];
    d2[i] = k * (gn[i] - b[i] * d1[i]);
  }
  // Hermite-corrected trapezoid outward from the centre node.
  auto step = [&](std::size_t i) {
    return dx / 2.0 * (d1[i] + d1[i + 1]) + dx * dx / 12.0 * (d2[i] - d2[i + 1]);
  };
  for (std::size_t i = c; i + 1 < N; ++i) p[i + 1] = p[i] + step(i);
  for (std::size_t i = c; i-- > 0;) p[i] = p[i + 1] - step(i);

  auto mid_of = [&](const std::vector<double>& y, const std::vector<double>& s, std::size_t i) {
    return (y[i] + y[i + 1]) / 2.0 + dx / 8.0 * (s[i] - s[i + 1]);
  };
  std::vector<double> wn(N), wm(N - 1);
  for (std::size_t i = 0; i < N; ++i) wn[i] = p[i] * dens.density[i];
  for (std::size_t i = 0; i + 1 < N; ++i) wm[i] = mid_of(p, d1, i) * dens.density_mid[i];
  sol.pi_phi_ = simpson_pairs(dx, wn, wm);
  for (double& v : p) v -= sol.pi_phi_;

  for (std::size_t i = 0; i < N; ++i) wn[i] = s2 * d1[i] * d1[i] * dens.density[i];
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const double m = mid_of(d1, d2, i);
    wm[i] = s2 * m * m * dens.density_mid[i];
  }
  sol.variance_ = simpson_pairs(dx, wn, wm);

  double res = 0.0;
  Eigen::MatrixXd hess(1, 1);
  for (std::size_t i = 1; i + 1 < N; ++i) {
    const double x = g.x(i);
    hess(0, 0) = (d1[i + 1] - d1[i - 1]) / (2.0 * dx);
    const double grad = d1[i];
    const double a = generator_apply(model, std::span<const double>(&x, 1),
                                     std::span<const double>(&grad, 1), hess);
    res = std::max(res, std::abs(a - gn[i]));
  }
  sol.residual_max_ = res;
  return sol;
}

double PoissonSolution::phi_at(double x) const {
  const std::size_t N = grid_.points;
  const double X = grid_.x_max;
  if (x >= X) {
    const double u = x - X;
    return phi_[N - 1] + dphi_[N - 1] * u + 0.5 * d2phi_[N - 1] * u * u;
  }
  if (x <= -X) {
    const double u = x + X;
    return phi_[0] + dphi_[0] * u + 0.5 * d2phi_[0] * u * u;
  }
  const double s = (x + X) / grid_.dx;
  const auto i = std::min<std::size_t>(N - 2, static_cast<std::size_t>(s));
  return hermite(phi_[i], phi_[i + 1], dphi_[i], dphi_[i + 1], grid_.dx, s - static_cast<double>(i));
}

double PoissonSolution::dphi_at(double x) const {
  const std::size_t N = grid_.points;
  const double X = grid_.x_max;
  if (x >= X) return dphi_[N - 1] + d2phi_[N - 1] * (x - X);
  if (x <= -X) return dphi_[0] + d2phi_[0] * (x + X);
  const double s = (x + X) / grid_.dx;
  const auto i = std::min<std::size_t>(N - 2, static_cast<std::size_t>(s));
  return hermite(dphi_[i], dphi_[i + 1], d2phi_[i], d2phi_[i + 1], grid_.dx,
                 s - static_cast<double>(i));
}

double PoissonSolution::d2phi_at(double x) const {
  return 2.0 / (sigma_ * sigma_) * (h_(x) - pi_h_ - model_.drift(x) * dphi_at(x));
}

PhiHooks PoissonSolution::hooks() const {
  auto self = std::make_shared<const PoissonSolution>(*this);
  return PhiHooks{[self](double x) { return self->phi_at(x); },
                  [self](double x) { return self->dphi_at(x); },
                  [self](double x) { return self->d2phi_at(x); }, h_, pi_h_};
}

void PoissonSolution::write_csv(const std::filesystem::path& path,
                                const nlohmann::json& meta) const {
  CsvTable t({"x", "pi", "phi", "dphi", "d2phi"});
  for (std::size_t i = 0; i < grid_.points; ++i)
    t.add_row({fmt_num(grid_.x(i)), fmt_num(density_[i]), fmt_num(phi_[i]), fmt_num(dphi_[i]),
               fmt_num(d2phi_[i])});
  nlohmann::json m = meta;
  m["model"] = model_.name();
  m["test_function"] = h_.name();
  m["pi_h"] = pi_h_;
  m["variance"] = variance_;
  m["residual_max"] = residual_max_;
  m["x_max"] = grid_.x_max;
  m["points"] = grid_.points;
  m["interpolation"] = "cubic Hermite, O(dx^4)";
  t.write(path, m);
}

RegularityReport regularity_fit(const PoissonSolution& sol, std::optional<double> range) {
  RegularityReport rep;
  const auto& g = sol.grid();
  rep.range = range ? std::min(*range, g.x_max) : g.x_max;
  const std::vector<double>* d[3] = {&sol.phi(), &sol.dphi(), &sol.d2phi()};
  for (int k = 0; k < 3; ++k) {
    double inner = 0.0, outer = 0.0;
    for (std::size_t i = 0; i < g.points; ++i) {
      const double ax = std::abs(g.x(i));
      if (ax > rep.range) continue;
      const double r = std::abs((*d[k])[i]) / (1.0 + std::pow(ax, k + 2));
      double& band = ax > 0.9 * rep.range ? outer : inner;
      band = std::max(band, r);
    }
    rep.ratio[k] = std::max(inner, outer);
    if (outer > inner * (1.0 + 1e-9) && outer > 1e-12) rep.bounded = false;
  }
  return rep;
}

}  // namespace emclt
