#include "emclt/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "emclt/io.hpp"
#include "engine_state.hpp"

namespace emclt {

namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool runaway(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v) || std::abs(v) > kDivergenceBound) return true;
  return false;
}

std::string join_nums(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_num(v[i]);
  return s;
}

std::string describe_init(const InitSpec& init) {
  return std::visit(overloaded{
                        [](const FixedInit& f) { return "fixed:" + join_nums(f.x); },
                        [](const UniformChoiceInit& u) { return "uniform:" + join_nums(u.choices); },
                        [](const CustomInit& c) {
                          std::string s = "custom:";
                          for (const auto& x : c.states) s += "[" + join_nums(x) + "]";
                          return s;
                        },
                    },
                    init);
}

std::array<double, kMaxDim> initial_state(const EnsembleConfig& cfg, std::uint64_t chain) {
  const std::size_t d = cfg.model.dim();
  std::array<double, kMaxDim> x{};
  std::visit(overloaded{
                 [&](const FixedInit& f) {
                   if (f.x.size() != d) throw UnsupportedDimension("fixed init has wrong dimension");
                   std::copy(f.x.begin(), f.x.end(), x.begin());
                 },
                 [&](const UniformChoiceInit& u) {
                   if (u.choices.empty()) throw std::invalid_argument("empty init choice set");
                   RandomStream rng(cfg.seed, chain, StreamTag::Init);
                   const auto m = u.choices.size();
                   const auto pick = std::min<std::size_t>(
                       m - 1, static_cast<std::size_t>(rng.uniform(0) * static_cast<double>(m)));
                   x.fill(0.0);
                   for (std::size_t i = 0; i < d; ++i) x[i] = u.choices[pick];
                 },
                 [&](const CustomInit& c) {
                   const auto idx = chain - cfg.first_chain;
                   if (idx >= c.states.size())
                     throw std::invalid_argument("custom init has fewer states than chains");
                   if (c.states[idx].size() != d)
                     throw UnsupportedDimension("custom init has wrong dimension");
                   std::copy(c.states[idx].begin(), c.states[idx].end(), x.begin());
                 },
             },
             cfg.init);
  return x;
}

struct RunContext {
  const EnsembleConfig& cfg;
  const SchedulePrefix& prefix;
  std::size_t dim;
  std::vector<std::size_t> snap_idx;
  std::vector<double> sigma;  // row-major
};

void record_at(const RunContext& ctx, std::size_t k, detail::ChainState& st,
               ChainAccumulator& acc) {
  const auto& rec = ctx.cfg.recorders;
  const std::size_t G = ctx.snap_idx.size();
  for (std::size_t g = 0; g < G; ++g)
    if (ctx.snap_idx[g] == k)
      for (std::size_t j = 0; j < st.sums.size(); ++j) acc.snapshots[j * G + g] = st.sums[j].value();
  const std::size_t M = rec.moment_steps.size();
  for (std::size_t m = 0; m < M; ++m) {
    if (rec.moment_steps[m] != k) continue;
    double r2 = 0.0;
    for (std::size_t i = 0; i < ctx.dim; ++i) r2 += st.theta[i] * st.theta[i];
    const double r = std::sqrt(r2);
    for (std::size_t p = 0; p < rec.moment_powers.size(); ++p)
      acc.moments[p * M + m] = std::pow(r, rec.moment_powers[p]);
  }
  if (rec.phi)
    for (std::size_t n : rec.phi_steps)
      if (n == k)
        acc.phi.push_back({n, st.stat.value(), st.martingale.value(), st.r0.value(),
                           st.r1.value(), st.r2.value(), st.z_abs_max, st.z_sq.value()});
}

void run_segment(const RunContext& ctx, detail::ChainState& st, ChainAccumulator& acc,
                 std::size_t k_end) {
  if (st.stopped) return;
  const auto& cfg = ctx.cfg;
  const std::size_t d = ctx.dim;
  const std::size_t n = cfg.steps;
  const auto& hs = cfg.test_functions;
  const RandomStream noise(cfg.seed, acc.chain_id, StreamTag::Step);
  const PhiHooks* hooks = cfg.recorders.phi ? &*cfg.recorders.phi : nullptr;
  const double s = ctx.sigma[0];
  double phi_cur = (hooks && d == 1) ? hooks->phi(st.theta[0]) : 0.0;

  std::array<double, kMaxDim> b{}, xi{}, next{};
  for (std::size_t k = st.k; k < k_end; ++k) {
    record_at(ctx, k, st, acc);
    if (k >= cfg.burn_in)
      for (std::size_t j = 0; j < hs.size(); ++j)
        st.sums[j].add(hs[j](std::span<const double>(st.theta.data(), d)));

    const double eta = ctx.prefix.eta(k + 1);
    const double sq = std::sqrt(eta);
    for (std::size_t i = 0; i < d; ++i) xi[i] = cfg.zero_noise ? 0.0 : noise.normal(k * d + i);
    if (d == 1) {
      b[0] = cfg.model.drift(st.theta[0]);
      next[0] = st.theta[0] + eta * b[0] + s * (sq * xi[0]);
    } else {
      cfg.model.drift(std::span<const double>(st.theta.data(), d), std::span<double>(b.data(), d));
      for (std::size_t i = 0; i < d; ++i) {
        double noise_i = 0.0;
        for (std::size_t j = 0; j < d; ++j) noise_i += ctx.sigma[i * d + j] * (sq * xi[j]);
        next[i] = st.theta[i] + eta * b[i] + noise_i;
      }
    }
    if (runaway(std::span<const double>(next.data(), d))) {
      acc.diverged = true;
      acc.diverged_at = k + 1;
      st.stopped = true;
      st.k = k + 1;
      return;
    }
    if (hooks && d == 1) {
      const double x = st.theta[0];
      const double d1 = hooks->dphi(x), d2 = hooks->d2phi(x);
      const double phi_next = hooks->phi(next[0]);
      const double sx = s * xi[0];
      const double z = -(d1 * sx) / sq;
      st.stat.add(hooks->h(x) - hooks->pi_h);
      st.martingale.add(z);
      st.z_abs_max = std::max(st.z_abs_max, std::abs(z));
      st.z_sq.add(z * z);
      st.r0.add((phi_next - phi_cur) / eta);
      st.r1.add(0.5 * d2 * (s * s - sx * sx) - sq * d2 * b[0] * sx);
      st.r2.add(0.5 * eta * d2 * b[0] * b[0]);
      phi_cur = phi_next;
    }
    st.theta = next;
  }
  st.k = k_end;
  if (k_end == n) {
    record_at(ctx, n, st, acc);
    for (std::size_t j = 0; j < hs.size(); ++j) acc.sum_h[j] = st.sums[j].value();
    if (cfg.recorders.terminal_state) acc.terminal.assign(st.theta.begin(), st.theta.begin() + d);
  }
}

void validate(const EnsembleConfig& cfg) {
  if (cfg.chains < 1 || cfg.steps < 1) throw std::invalid_argument("need chains >= 1 and steps >= 1");
  const auto& rec = cfg.recorders;
  double prev = 0.0;
  for (double t : rec.snapshot_grid) {
    if (!(t >= 0.0 && t <= 1.0) || t < prev)
      throw std::invalid_argument("snapshot grid must be sorted within [0,1]");
    prev = t;
  }
  if (!std::is_sorted(rec.moment_steps.begin(), rec.moment_steps.end()) ||
      (!rec.moment_steps.empty() && rec.moment_steps.back() > cfg.steps))
    throw std::invalid_argument("moment steps must be sorted and <= steps");
  for (std::size_t n : rec.phi_steps)
    if (n > cfg.steps) throw std::invalid_argument("phi step beyond run length");
  if (rec.phi && cfg.model.dim() != 1)
    throw UnsupportedDimension("decomposition hooks are one-dimensional");
  const double total = static_cast<double>(cfg.chains) * static_cast<double>(cfg.steps);
  if (total > static_cast<double>(cfg.step_budget))
    throw BudgetExceeded(static_cast<std::uint64_t>(total), cfg.step_budget);
}

}  // namespace

ChainDiverged::ChainDiverged(std::uint64_t c, std::uint64_t k, double value)
    : std::runtime_error(fmt::format("chain {} diverged at step {} (value {})", c, k, value)),
      chain(c),
      step(k) {}

std::vector<double> em_step(std::span<const double> theta, const SDEModel& model, double eta,
                            std::span<const double> xi, std::uint64_t step) {
  if (!(eta > 0.0)) throw std::invalid_argument("step size must be positive");
  const std::size_t d = model.dim();
  if (theta.size() != d || xi.size() != d) throw UnsupportedDimension("em_step dimension mismatch");
  std::vector<double> b(d), out(d);
  model.drift(theta, b);
  const double sq = std::sqrt(eta);
  const auto& S = model.sigma();
  for (std::size_t i = 0; i < d; ++i) {
    double noise_i = 0.0;
    for (std::size_t j = 0; j < d; ++j) noise_i += S(i, j) * (sq * xi[j]);
    out[i] = theta[i] + eta * b[i] + noise_i;
    if (!std::isfinite(out[i]) || std::abs(out[i]) > kDivergenceBound)
      throw ChainDiverged(0, step, out[i]);
  }
  return out;
}

InitSpec paper_init() { return UniformChoiceInit{{-8.0, 2.0, 12.0}}; }

std::vector<std::uint64_t> EnsembleResult::diverged_chains() const {
  std::vector<std::uint64_t> out;
  for (const auto& c : chains)
    if (c.diverged) out.push_back(c.chain_id);
  return out;
}

std::vector<double> EnsembleResult::moment_mean(std::size_t p) const {
  const std::size_t M = moment_steps.size();
  if (p >= moment_powers.size()) throw std::out_of_range("moment power index");
  std::vector<double> out(M, 0.0);
  std::size_t alive = 0;
  for (const auto& c : chains) {
    if (c.diverged) continue;
    ++alive;
    for (std::size_t m = 0; m < M; ++m) out[m] += c.moments[p * M + m];
  }
  for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(alive, 1));
  return out;
}

void EnsembleResult::merge(const EnsembleResult& other) {
  if (other.config_hash != config_hash || other.steps != steps)
    throw std::invalid_argument("cannot merge results of different ensembles");
  chains.insert(chains.end(), other.chains.begin(), other.chains.end());
  std::sort(chains.begin(), chains.end(),
            [](const auto& a, const auto& b) { return a.chain_id < b.chain_id; });
  for (std::size_t i = 1; i < chains.size(); ++i)
    if (chains[i].chain_id == chains[i - 1].chain_id)
      throw std::invalid_argument(fmt::format("chain {} present twice", chains[i].chain_id));
  complete = complete && other.complete;
}

std::string ensemble_hash(const EnsembleConfig& cfg) {
  const auto& m = cfg.model;
  const auto& c = m.constants();
  std::string s = fmt::format("v={}\nmodel={}\ndim={}\nL={}\nK1={}\nK2={}\nK3={}\nsigma=", kVersion,
                              m.name(), m.dim(), fmt_num(c.lipschitz), fmt_num(c.k1),
                              fmt_num(c.k2), fmt_num(c.k3));
  for (Eigen::Index i = 0; i < m.sigma().size(); ++i) s += fmt_num(m.sigma().data()[i]) + ",";
  s += "\nschedule=" + cfg.schedule.name() + "\nh=";
  for (const auto& h : cfg.test_functions) s += h.name() + ",";
  s += fmt::format("\nsteps={}\nseed={}\ninit={}\nburn_in={}\nzero_noise={}\n", cfg.steps, cfg.seed,
                   describe_init(cfg.init), cfg.burn_in, cfg.zero_noise);
  const auto& r = cfg.recorders;
  s += "snap=" + join_nums(r.snapshot_grid) + "\nmoments=" + join_nums(r.moment_powers) + "@";
  for (auto k : r.moment_steps) s += fmt::format("{},", k);
  s += fmt::format("\nterminal={}\n", r.terminal_state);
  if (r.phi) {
    s += fmt::format("phi={}:{}@", r.phi->h.name(), fmt_num(r.phi->pi_h));
    for (auto k : r.phi_steps) s += fmt::format("{},", k);
  }
  return sha256_hex(s);
}

EnsembleResult run_ensemble(const EnsembleConfig& cfg) {
  validate(cfg);
  const std::size_t n = cfg.steps;
  const auto prefix = build_prefix(cfg.schedule, n);

  RunContext ctx{cfg, prefix, cfg.model.dim(), {}, {}};
  for (double t : cfg.recorders.snapshot_grid)
    ctx.snap_idx.push_back(std::min<std::size_t>(n, static_cast<std::size_t>(std::floor(n * t))));
  const auto& S = cfg.model.sigma();
  for (std::size_t i = 0; i < ctx.dim; ++i)
    for (std::size_t j = 0; j < ctx.dim; ++j) ctx.sigma.push_back(S(i, j));

  EnsembleResult res;
  res.config_hash = ensemble_hash(cfg);
  res.seed = cfg.seed;
  res.steps = n;
  res.dim = ctx.dim;
  for (const auto& h : cfg.test_functions) res.test_functions.push_back(h.name());
  res.snapshot_grid = cfg.recorders.snapshot_grid;
  res.snapshot_index = ctx.snap_idx;
  res.moment_powers = cfg.recorders.moment_powers;
  res.moment_steps = cfg.recorders.moment_steps;
  if (cfg.recorders.phi) res.phi_steps = cfg.recorders.phi_steps;

  const std::size_t N = cfg.chains, H = cfg.test_functions.size();
  const std::size_t G = ctx.snap_idx.size();
  const std::size_t M = cfg.recorders.moment_steps.size();
  std::vector<detail::ChainState> states;
  std::vector<ChainAccumulator> accs;
  std::uint64_t done = 0;

  const detail::CheckpointHeader header{res.config_hash, cfg.first_chain, N, 0};
  const bool checkpointing = !cfg.checkpoint_file.empty();
  if (!checkpointing ||
      !detail::load_checkpoint(cfg.checkpoint_file, header, states, accs, done)) {
    states.assign(N, {});
    accs.assign(N, {});
    for (std::size_t c = 0; c < N; ++c) {
      const std::uint64_t id = cfg.first_chain + c;
      states[c].theta = initial_state(cfg, id);
      states[c].sums.assign(H, {});
      auto& a = accs[c];
      a.chain_id = id;
      a.sum_h.assign(H, std::numeric_limits<double>::quiet_NaN());
      a.snapshots.assign(H * G, std::numeric_limits<double>::quiet_NaN());
      a.moments.assign(cfg.recorders.moment_powers.size() * M,
                       std::numeric_limits<double>::quiet_NaN());
    }
  }

  std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, N);
  const bool epochs = checkpointing || cfg.stop_after;
  const std::size_t epoch = epochs ? std::max<std::size_t>(1, cfg.checkpoint_every) : n;

  while (done < n) {
    const std::size_t k_end = std::min<std::size_t>(n, done + epoch);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
      for (std::size_t c; (c = next.fetch_add(1)) < N;) {
        try {
          run_segment(ctx, states[c], accs[c], k_end);
        } catch (...) {
          std::lock_guard lock(failure_mu);
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
    done = k_end;
    if (checkpointing && done < n) {
      auto h = header;
      h.steps_done = done;
      detail::save_checkpoint(cfg.checkpoint_file, h, states, accs);
    }
    if (cfg.stop_after && done >= *cfg.stop_after && done < n) {
      res.complete = false;
      break;
    }
  }
  if (checkpointing && res.complete) std::filesystem::remove(cfg.checkpoint_file);
  res.chains = std::move(accs);
  return res;
}

void bridge_increments(double dw, double h, std::size_t m, const RandomStream& stream,
                       std::uint64_t offset, std::span<double> out) {
  if (m < 1 || out.size() != m) throw std::invalid_argument("bridge needs m >= 1 outputs");
  const double delta = h / static_cast<double>(m);
  double rest = dw;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double left = static_cast<double>(m - j);
    const double mean = rest / left;
    const double var = delta * (left - 1.0) / left;
    out[j] = mean + std::sqrt(var) * stream.normal(offset + j);
    rest -= out[j];
  }
  out[m - 1] = rest;
}

std::vector<double> fine_reference(const SDEModel& model, double t_start,
                                   std::span<const double> x_start, double t_end, std::size_t m,
                                   std::span<const double> coarse_increment,
                                   const RandomStream& stream, std::uint64_t offset) {
  if (m < 1) throw std::invalid_argument("substep count must be >= 1");
  if (!(t_end > t_start)) throw std::invalid_argument("t_end must exceed t_start");
  const std::size_t d = model.dim();
  if (x_start.size() != d) throw UnsupportedDimension("fine_reference dimension mismatch");
  if (!coarse_increment.empty() && coarse_increment.size() != d)
    throw UnsupportedDimension("coarse increment dimension mismatch");
  const double H = t_end - t_start;
  const double delta = H / static_cast<double>(m);
  const double sq = std::sqrt(delta);

  std::vector<double> dw(d * m);
  if (!coarse_increment.empty()) {
    for (std::size_t i = 0; i < d; ++i)
      bridge_increments(coarse_increment[i], H, m, stream, offset + i * m,
                        std::span<double>(dw.data() + i * m, m));
  } else {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < m; ++j) dw[i * m + j] = sq * stream.normal(offset + j * d + i);
  }

  std::vector<double> x(x_start.begin(), x_start.end()), b(d), nx(d);
  const auto& S = model.sigma();
  for (std::size_t j = 0; j < m; ++j) {
    model.drift(x, b);
    for (std::size_t i = 0; i < d; ++i) {
      double noise_i = 0.0;
      for (std::size_t l = 0; l < d; ++l) noise_i += S(i, l) * dw[l * m + j];
      nx[i] = x[i] + delta * b[i] + noise_i;
      if (!std::isfinite(nx[i]) || std::abs(nx[i]) > kDivergenceBound)
        throw ChainDiverged(0, j + 1, nx[i]);
    }
    x.swap(nx);
  }
  return x;
}

void write_ensemble_csv(const EnsembleResult& r, const std::filesystem::path& path) {
  std::vector<std::string> header{"chain_id", "diverged"};
  for (const auto& h : r.test_functions) header.push_back("sum_" + h);
  for (const auto& h : r.test_functions)
    for (double t : r.snapshot_grid) header.push_back(fmt::format("snap_{}_{}", h, fmt_num(t)));
  const bool terminal = !r.chains.empty() && !r.chains.front().terminal.empty();
  if (terminal)
    for (std::size_t i = 0; i < r.dim; ++i) header.push_back(fmt::format("terminal_{}", i));
  CsvTable t(header);
  for (const auto& c : r.chains) {
    std::vector<std::string> row{fmt::format("{}", c.chain_id), c.diverged ? "1" : "0"};
    for (double v : c.sum_h) row.push_back(fmt_num(v));
    for (double v : c.snapshots) row.push_back(fmt_num(v));
    if (terminal)
      for (std::size_t i = 0; i < r.dim; ++i)
        row.push_back(i < c.terminal.size() ? fmt_num(c.terminal[i]) : "nan");
    t.add_row(std::move(row));
  }
  t.write(path, {{"config_hash", r.config_hash},
                 {"seed", r.seed},
                 {"version", kVersion},
                 {"steps", r.steps},
                 {"test_functions", r.test_functions},
                 {"snapshot_grid", r.snapshot_grid},
                 {"snapshot_index", r.snapshot_index},
                 {"diverged_chains", r.diverged_chains()}});
}

}  // namespace emclt
