#include "emclt/schedules.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace emclt {

namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument(fmt::format("power exponent must lie in (0,1], got {}", beta));
}

double slope(std::span<const double> x, std::span<const double> y) {
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

std::vector<std::uint64_t> audit_checkpoints(std::uint64_t n_max) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t p = 10; p <= n_max; p *= 10) {
    for (std::uint64_t c : {1, 2, 5})
      if (c * p <= n_max) out.push_back(c * p);
    if (p > n_max / 10) break;
  }
  out.push_back(n_max);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

StepSchedule::StepSchedule(Kind kind, std::string description)
    : kind_(std::move(kind)), description_(std::move(description)) {
  std::visit(overloaded{
                 [](const PowerSteps& p) { require_beta(p.beta); },
                 [](const ScaledPowerSteps& p) {
                   require_beta(p.beta);
                   if (!(p.c0 > 0.0)) throw std::invalid_argument("c0 must be positive");
                 },
                 [](const TableSteps& t) {
                   if (t.values.empty()) throw std::invalid_argument("empty step table");
                 },
                 [](const auto&) {},
             },
             kind_);
  if (description_.empty()) description_ = name();
}

StepSchedule StepSchedule::power(double beta) { return StepSchedule(PowerSteps{beta}); }
StepSchedule StepSchedule::log_over_k() { return StepSchedule(LogOverK{}); }
StepSchedule StepSchedule::harmonic() { return StepSchedule(HarmonicSteps{}); }
StepSchedule StepSchedule::scaled_power(double c0, double beta) {
  return StepSchedule(ScaledPowerSteps{c0, beta});
}
StepSchedule StepSchedule::table(std::vector<double> values) {
  return StepSchedule(TableSteps{std::move(values)});
}

double StepSchedule::eta(std::uint64_t k) const {
  if (k == 0) throw std::out_of_range("step index starts at 1");
  const double x = static_cast<double>(k);
  return std::visit(overloaded{
                        [x](const PowerSteps& p) { return std::pow(x, -p.beta); },
                        [x](const LogOverK&) { return std::log(x + 1.0) / (x + 1.0); },
                        [x](const HarmonicSteps&) { return 1.0 / x; },
                        [x](const ScaledPowerSteps& p) { return p.c0 * std::pow(x, -p.beta); },
                        [k](const TableSteps& t) {
                          return k <= t.values.size() ? t.values[k - 1] : t.values.back();
                        },
                    },
                    kind_);
}

std::string StepSchedule::name() const {
  return std::visit(overloaded{
                        [](const PowerSteps& p) { return fmt::format("power({})", p.beta); },
                        [](const LogOverK&) { return std::string("log-over-k"); },
                        [](const HarmonicSteps&) { return std::string("harmonic"); },
                        [](const ScaledPowerSteps& p) {
                          return fmt::format("scaled-power({},{})", p.c0, p.beta);
                        },
                        [](const TableSteps& t) {
                          std::string s = "table(";
                          for (std::size_t i = 0; i < t.values.size(); ++i)
                            s += (i ? "," : "") + fmt::format("{}", t.values[i]);
                          return s + ")";
                        },
                    },
                    kind_);
}

static double checked_eta(const StepSchedule& s, std::uint64_t k) {
  const double e = s.eta(k);
  if (!(e > 0.0) || !std::isfinite(e))
    throw ScheduleInvalid(k, fmt::format("step size at k={} is {} (must be positive)", k, e));
  return e;
}

SchedulePrefix build_prefix(const StepSchedule& schedule, std::size_t n_max) {
  if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");
  SchedulePrefix p;
  p.eta_.resize(n_max + 1);
  p.t_.resize(n_max + 1);
  p.T_.resize(n_max + 1);
  p.eta_[0] = std::nan("");
  p.t_[0] = 0.0;
  p.T_[0] = 0.0;
  CompensatedSum t, T;
  for (std::size_t k = 1; k <= n_max; ++k) {
    const double e = checked_eta(schedule, k);
    p.eta_[k] = e;
    t.add(e);
    T.add(1.0 / e);
    p.t_[k] = t.value();
    p.T_[k] = T.value();
  }
  return p;
}

StepTotals step_totals(const StepSchedule& schedule, std::uint64_t n) {
  CompensatedSum t, T;
  for (std::uint64_t k = 1; k <= n; ++k) {
    const double e = checked_eta(schedule, k);
    t.add(e);
    T.add(1.0 / e);
  }
  return {t.value(), T.value()};
}

double power_sum(double p, std::uint64_t n) {
  constexpr std::uint64_t a = 32;
  if (n < 2 * a) {
    CompensatedSum s;
    for (std::uint64_t k = 1; k <= n; ++k) s.add(std::pow(static_cast<double>(k), p));
    return s.value();
  }
  CompensatedSum s;
  for (std::uint64_t k = 1; k < a; ++k) s.add(std::pow(static_cast<double>(k), p));
  const double A = static_cast<double>(a), N = static_cast<double>(n);
  auto d = [p](double x, int order) {
    double c = 1.0;
    for (int i = 0; i < order; ++i) c *= (p - i);
    return c * std::pow(x, p - order);
  };
  const double integral = std::abs(p + 1.0) < 1e-300
                              ? std::log(N / A)
                              : (std::pow(N, p + 1.0) - std::pow(A, p + 1.0)) / (p + 1.0);
  s.add(integral);
  s.add(0.5 * (d(A, 0) + d(N, 0)));
  s.add((d(N, 1) - d(A, 1)) / 12.0);
  s.add(-(d(N, 3) - d(A, 3)) / 720.0);
  s.add((d(N, 5) - d(A, 5)) / 30240.0);
  return s.value();
}

double scaling_number(const SchedulePrefix& prefix, std::size_t n) {
  if (n < 1 || n > prefix.n_max())
    throw std::out_of_range(fmt::format("index {} outside [1, {}]", n, prefix.n_max()));
  return static_cast<double>(n) / std::sqrt(prefix.T(n));
}

std::vector<double> time_change(const SchedulePrefix& prefix, std::size_t n,
                                std::span<const double> t_grid) {
  if (n < 1 || n > prefix.n_max())
    throw std::out_of_range(fmt::format("index {} outside [1, {}]", n, prefix.n_max()));
  std::vector<double> out;
  out.reserve(t_grid.size());
  const double Tn = prefix.T(n);
  double prev = 0.0;
  for (double t : t_grid) {
    if (!(t >= 0.0 && t <= 1.0) || t < prev)
      throw std::invalid_argument("time grid must be sorted within [0,1]");
    prev = t;
    const auto idx = std::min<std::size_t>(n, static_cast<std::size_t>(std::floor(n * t)));
    out.push_back(idx == n ? 1.0 : prefix.T(idx) / Tn);
  }
  return out;
}

const ConditionVerdict& AssumptionReport::verdict(std::string_view name) const {
  for (const auto& v : verdicts)
    if (v.condition == name) return v;
  throw std::out_of_range(fmt::format("no verdict named {}", name));
}

bool AssumptionReport::any_violation() const {
  return std::any_of(verdicts.begin(), verdicts.end(),
                     [](const auto& v) { return v.verdict == Verdict::ViolatedAt; });
}

AssumptionReport audit_assumptions(const StepSchedule& schedule, std::uint64_t n_max,
                                   double epsilon) {
  if (n_max < 100) throw std::invalid_argument("audit needs n_max >= 100");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");

  AssumptionReport rep;
  rep.schedule = schedule.name();
  rep.n_max = n_max;
  rep.epsilon = epsilon;

  const auto marks = audit_checkpoints(n_max);
  std::size_t next_mark = 0;

  std::array<CompensatedSum, 64> block_eta{}, block_pow{};
  CompensatedSum t, T, pow_sum;
  double prev = 0.0;
  std::uint64_t last_at_least_one = 0;
  double c_first = -INFINITY, c_second = -INFINITY;
  double c_max = -INFINITY;
  const std::uint64_t half = n_max / 2;

  for (std::uint64_t k = 1; k <= n_max; ++k) {
    const double e = checked_eta(schedule, k);
    if (k == 1) rep.eta_1 = e;
    if (e >= 1.0) last_at_least_one = k;
    if (k >= 2) {
      if (e > prev && !rep.monotone_witness) rep.monotone_witness = k;
      const double r = (prev - e) / (e * e);
      double& c_half = k <= half ? c_first : c_second;
      c_half = std::max(c_half, r);
      if (r > c_max) {
        c_max = r;
        rep.c_fit_argmax = k;
      }
    }
    const double ep = std::pow(e, 2.0 - epsilon);
    const int j = std::bit_width(k) - 1;
    block_eta[j].add(e);
    block_pow[j].add(ep);
    t.add(e);
    T.add(1.0 / e);
    pow_sum.add(ep);
    if (next_mark < marks.size() && marks[next_mark] == k) {
      const double Tk = T.value();
      const double inv = 1.0 / (e * std::sqrt(Tk));
      rep.checkpoints.push_back({k, e, t.value(), Tk, std::sqrt(std::log(double(k))) * inv, inv});
      ++next_mark;
    }
    prev = e;
  }

  rep.monotone_ok = !rep.monotone_witness.has_value();
  if (last_at_least_one < n_max) rep.below_one_from = last_at_least_one + 1;
  rep.c_fit = std::max(0.0, c_max);
  rep.tail_partial_sum = pow_sum.value();

  // Last dyadic block [2^J, 2^{J+1}) fully inside the range.
  const int J = std::bit_width(n_max + 1) - 2;
  const double be1 = block_eta[J].value(), be0 = block_eta[J - 1].value();
  const double bp1 = block_pow[J].value(), bp0 = block_pow[J - 1].value();
  rep.divergence_block_ratio = be1 / be0;
  rep.tail_block_ratio = bp1 / bp0;
  const double q = rep.tail_block_ratio;
  rep.tail_estimate = q < 1.0 ? bp1 * q / (1.0 - q) : INFINITY;
  const std::uint64_t block_start = std::uint64_t{1} << J;

  std::vector<double> lx, lt, lc;
  for (const auto& row : rep.checkpoints) {
    if (row.k * 100 < n_max && rep.checkpoints.size() > 3) continue;
    lx.push_back(std::log(double(row.k)));
    lt.push_back(std::log(row.t));
    lc.push_back(std::log(row.critical));
  }
  rep.divergence_trend = slope(lx, lt);
  rep.critical_trend = slope(lx, lc);

  auto& vs = rep.verdicts;
  vs.push_back({condition::kNonIncreasing,
                rep.monotone_ok ? Verdict::SatisfiedOnRange : Verdict::ViolatedAt,
                rep.monotone_witness, rep.monotone_ok ? "" : "eta_k > eta_{k-1}"});

  if (rep.below_one_from)
    vs.push_back({condition::kBelowOne, Verdict::SatisfiedOnRange, std::nullopt,
                  fmt::format("eta_k < 1 for k >= {}", *rep.below_one_from)});
  else
    vs.push_back({condition::kBelowOne, Verdict::ViolatedAt, n_max, "eta_k >= 1 at end of range"});

  {
    ConditionVerdict v{condition::kDivergent, Verdict::Inconclusive, std::nullopt, ""};
    if (rep.divergence_block_ratio >= 0.99) {
      v.verdict = Verdict::SatisfiedOnRange;
      v.note = "divergence trend observed (dyadic blocks do not shrink)";
    } else if (rep.divergence_block_ratio <= 0.9) {
      v.verdict = Verdict::ViolatedAt;
      v.witness = block_start;
      v.note = "dyadic block sums shrink geometrically";
    }
    vs.push_back(v);
  }
  {
    ConditionVerdict v{condition::kDecrementBound, Verdict::Inconclusive, std::nullopt, ""};
    if (c_second <= std::max(c_first, 0.0)) {
      v.verdict = Verdict::SatisfiedOnRange;
      v.note = fmt::format("c = {}", rep.c_fit);
    } else if (c_second > 2.0 * std::max(c_first, 0.0)) {
      v.verdict = Verdict::ViolatedAt;
      v.witness = rep.c_fit_argmax;
      v.note = "decrement ratio keeps growing";
    }
    vs.push_back(v);
  }
  {
    ConditionVerdict v{condition::kSummable, Verdict::Inconclusive, std::nullopt,
                       fmt::format("block ratio {:.4f}", q)};
    if (q <= 0.975)
      v.verdict = Verdict::SatisfiedOnRange;
    else if (q >= 0.995) {
      v.verdict = Verdict::ViolatedAt;
      v.witness = block_start;
    }
    vs.push_back(v);
  }
  {
    ConditionVerdict v{condition::kCritical, Verdict::Inconclusive, std::nullopt,
                       fmt::format("log-log slope {:.4f}", rep.critical_trend)};
    if (rep.critical_trend <= -0.02)
      v.verdict = Verdict::SatisfiedOnRange;
    else if (rep.critical_trend >= 0.0) {
      v.verdict = Verdict::ViolatedAt;
      v.witness = n_max;
      v.note += ", non-vanishing trend";
    }
    vs.push_back(v);
  }
  return rep;
}

ATrendReport audit_a_condition(const std::function<double(double)>& a, double horizon, double C,
                               std::span<const double> delta_grid) {
  if (!(horizon > 0.0) || !(C > 0.0))
    throw std::invalid_argument("horizon and C must be positive");
  if (a(0.0) != 0.0) throw std::invalid_argument("a(0) must be 0");
  ATrendReport rep;
  double prev_delta = INFINITY;
  for (double delta : delta_grid) {
    if (!(delta > 0.0) || !(delta < prev_delta))
      throw std::invalid_argument("delta grid must be positive and decreasing");
    prev_delta = delta;
    const auto m_end = static_cast<std::uint64_t>(std::ceil(horizon / delta));
    double sup = 0.0, lo = a(0.0);
    for (std::uint64_t m = 0; m < m_end; ++m) {
      const double hi = a((m + 1) * delta);
      if (hi < lo) throw std::invalid_argument("a is not monotone");
      sup = std::max(sup, hi - lo);
      lo = hi;
    }
    const double tau = std::sqrt(sup);
    rep.delta.push_back(delta);
    rep.tau.push_back(tau);
    rep.value.push_back(tau > 0 ? tau / delta * std::exp(-C / (tau * tau)) : 0.0);
  }
  if (rep.value.size() >= 2) {
    const double first = rep.value.front(), last = rep.value.back();
    if (last * 10.0 <= first)
      rep.verdict = Verdict::SatisfiedOnRange;
    else if (last >= first)
      rep.verdict = Verdict::ViolatedAt;
  }
  return rep;
}

}  // namespace emclt
