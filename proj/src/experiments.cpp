#include "emclt/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>
#include <variant>

#include <fmt/format.h>

#include "emclt/analysis.hpp"
#include "emclt/coupling.hpp"
#include "emclt/engine.hpp"
#include "emclt/io.hpp"
#include "emclt/poisson.hpp"

namespace emclt {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"schedule-audit", "clt",        "fclt",
                                                 "poisson",        "w2",         "coupling",
                                                 "repro-fig1",     "repro-fig2"};
  return names;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& label) {
  const auto hex = sha256_hex(fmt::format("{}:{}", seed, label));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::vector<double> fclt_time_change(const StepSchedule& schedule, std::size_t n,
                                     std::span<const double> t_grid, bool limit) {
  if (limit) {
    std::optional<double> beta;
    if (const auto* p = std::get_if<PowerSteps>(&schedule.kind())) beta = p->beta;
    if (const auto* p = std::get_if<ScaledPowerSteps>(&schedule.kind())) beta = p->beta;
    if (beta) {
      std::vector<double> a;
      for (double t : t_grid) a.push_back(std::pow(t, 1.0 + *beta));
      return a;
    }
  }
  return time_change(build_prefix(schedule, n), n, t_grid);
}

std::vector<std::size_t> decade_checkpoints(std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t p = 1; p <= n; p *= 10)
    for (std::size_t m : {1, 2, 5})
      if (m * p < n) out.push_back(m * p);
  out.push_back(n);
  return out;
}

namespace {

struct Context {
  const RunConfig& cfg;
  std::ostream& log;
  fs::path out;
  json meta;
};

std::string file_label(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

GridSpec grid_from(const RunConfig& cfg) {
  GridSpec g;
  g.points = cfg.get_u64("poisson.points", g.points);
  g.x_max = cfg.get_optional_double("poisson.x_max");
  return g;
}

struct Oracle {
  double pi_h = 0.0, v = 0.0, residual = 0.0;
};

Oracle poisson_oracle(const SDEModel& model, const TestFunction& h, const GridSpec& grid) {
  const auto density = stationary_density(model, grid);
  const auto sol = solve_poisson(model, h, density);
  return {sol.pi_h(), sol.variance(), sol.residual_max()};
}

EnsembleConfig ensemble_from(const Context& ctx, const SDEModel& model, const StepSchedule& sched,
                             std::vector<TestFunction> hs, std::size_t N, std::size_t n,
                             std::uint64_t seed) {
  EnsembleConfig ec(model, sched);
  ec.test_functions = std::move(hs);
  ec.chains = N;
  ec.steps = n;
  ec.seed = seed;
  ec.init = init_from(ctx.cfg);
  ec.burn_in = ctx.cfg.get_u64("ensemble.burn_in", 0);
  ec.workers = ctx.cfg.workers();
  ec.step_budget = ctx.cfg.get_u64("budget.steps", ec.step_budget);
  return ec;
}

int run_audit(Context& ctx) {
  const auto sched = schedule_from(ctx.cfg);
  const auto n_max = ctx.cfg.get_u64("audit.n_max", 1'000'000);
  const double eps = ctx.cfg.get_double("audit.epsilon", 0.4);
  const auto rep = audit_assumptions(sched, n_max, eps);

  CsvTable t({"k", "eta_k", "t_k", "T_k", "critical", "inverse_eta_sqrt_T"});
  for (const auto& r : rep.checkpoints)
    t.add_row({fmt::format("{}", r.k), fmt_num(r.eta), fmt_num(r.t), fmt_num(r.T), fmt_num(r.critical),
               fmt_num(r.inverse_eta_sqrt_T)});
  json verdicts = json::array();
  for (const auto& v : rep.verdicts) {
    json j = {{"condition", v.condition}, {"verdict", to_string(v.verdict)}, {"note", v.note}};
    if (v.witness) j["witness"] = *v.witness;
    verdicts.push_back(j);
    ctx.log << fmt::format("  {:<26} {}{}\n", v.condition, to_string(v.verdict),
                           v.witness ? fmt::format(" (k = {})", *v.witness) : "");
  }
  json m = ctx.meta;
  m.update({{"schedule", rep.schedule},
            {"n_max", rep.n_max},
            {"epsilon", rep.epsilon},
            {"divergence_block_ratio", rep.divergence_block_ratio},
            {"c_fit", rep.c_fit},
            {"tail_partial_sum", rep.tail_partial_sum},
            {"tail_estimate", rep.tail_estimate},
            {"tail_block_ratio", rep.tail_block_ratio},
            {"critical_trend", rep.critical_trend},
            {"verdicts", verdicts}});
  t.write(ctx.out / "audit.csv", m);
  return rep.any_violation() ? kExitAuditViolation : kExitOk;
}

int run_poisson(Context& ctx) {
  const auto model = model_from(ctx.cfg);
  const auto h = test_functions_from(ctx.cfg, "poisson.h", {"witch"}).front();
  const auto density = stationary_density(model, grid_from(ctx.cfg));
  const auto sol = solve_poisson(model, h, density);
  const auto reg = regularity_fit(sol);
  json m = ctx.meta;
  m.update({{"model", model.name()},
            {"h", h.name()},
            {"pi_h", sol.pi_h()},
            {"variance", sol.variance()},
            {"residual_max", sol.residual_max()},
            {"pi_phi", sol.pi_phi()},
            {"x_max", sol.grid().x_max},
            {"points", sol.grid().points},
            {"tail_mass", density.tail_mass},
            {"regularity_ratio", {reg.ratio[0], reg.ratio[1], reg.ratio[2]}},
            {"regularity_range", reg.range}});
  sol.write_csv(ctx.out / "poisson.csv", m);
  ctx.log << fmt::format("  pi(h) = {:.10g}  v = {:.10g}  residual = {:.3g}\n", sol.pi_h(),
                         sol.variance(), sol.residual_max());
  return kExitOk;
}

int run_clt(Context& ctx) {
  const auto model = model_from(ctx.cfg);
  const auto sched = schedule_from(ctx.cfg);
  const auto hs = test_functions_from(ctx.cfg, "ensemble.h", {"witch"});
  const std::size_t N = ctx.cfg.get_u64("ensemble.N", 500), n = ctx.cfg.get_u64("ensemble.n", 20000);
  const auto grid = grid_from(ctx.cfg);
  const auto res = run_ensemble(ensemble_from(ctx, model, sched, hs, N, n, ctx.cfg.seed()));
  const double T = step_totals(sched, n).T;
  for (std::size_t j = 0; j < hs.size(); ++j) {
    const auto o = poisson_oracle(model, hs[j], grid);
    const auto rep = clt_report(res, j, T, o.pi_h, o.v);
    json m = ctx.meta;
    m.update({{"model", model.name()}, {"schedule", sched.name()}, {"ensemble_hash", res.config_hash}});
    rep.write_csv(ctx.out / fmt::format("clt_{}.csv", hs[j].name()), m);
    ctx.log << fmt::format("  {}: N = {}, v = {:.6g}, sample var = {:.6g}, KS D = {:.4f}, p = {:.4g}\n",
                           hs[j].name(), rep.samples.size(), o.v, rep.moments.variance,
                           rep.ks.statistic, rep.ks.p_value);
  }
  return kExitOk;
}

int run_fclt(Context& ctx) {
  const auto model = model_from(ctx.cfg);
  const auto sched = schedule_from(ctx.cfg);
  const auto hs = test_functions_from(ctx.cfg, "ensemble.h", {"witch"});
  const std::size_t N = ctx.cfg.get_u64("ensemble.N", 2000), n = ctx.cfg.get_u64("ensemble.n", 20000);
  const auto t_grid = ctx.cfg.get_doubles("fclt.grid", {0.25, 0.5, 0.75, 1.0});
  const auto target = ctx.cfg.get_string("fclt.target", "limit");
  if (target != "limit" && target != "finite")
    throw ConfigError("fclt.target", ctx.cfg.line_of("fclt.target"), "expected limit or finite");
  const auto a = fclt_time_change(sched, n, t_grid, target == "limit");

  auto ec = ensemble_from(ctx, model, sched, hs, N, n, ctx.cfg.seed());
  ec.recorders.snapshot_grid = t_grid;
  const auto res = run_ensemble(ec);
  const double T = step_totals(sched, n).T;
  const auto grid = grid_from(ctx.cfg);
  for (std::size_t j = 0; j < hs.size(); ++j) {
    const auto o = poisson_oracle(model, hs[j], grid);
    std::vector<std::uint64_t> ids;
    const auto paths = fclt_paths(res, j, T, o.pi_h, &ids);
    const auto rep = fclt_covariance_test(paths, t_grid, a, o.v);
    json m = ctx.meta;
    m.update({{"model", model.name()}, {"schedule", sched.name()}, {"h", hs[j].name()},
              {"n", n}, {"T_n", T}, {"pi_h", o.pi_h}, {"ensemble_hash", res.config_hash}});
    std::vector<std::string> header = {"chain_id"};
    for (double t : t_grid) header.push_back("W_" + fmt_num(t));
    CsvTable pt(header);
    const std::size_t G = t_grid.size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::vector<std::string> row = {fmt::format("{}", ids[i])};
      for (std::size_t g = 0; g < G; ++g) row.push_back(fmt_num(paths[i * G + g]));
      pt.add_row(std::move(row));
    }
    json pm = m;
    pm.update({{"v", o.v}, {"a", a}, {"t_grid", t_grid}});
    pt.write(ctx.out / fmt::format("fclt_paths_{}.csv", hs[j].name()), pm);
    rep.write_covariance_csv(ctx.out / fmt::format("fclt_cov_{}.csv", hs[j].name()), m);
    ctx.log << fmt::format("  {}: max |dev| = {:.3f} SE, increments {:.3f} SE, {}\n", hs[j].name(),
                           rep.max_abs_deviation, rep.max_increment_deviation,
                           rep.pass ? "pass" : "fail");
  }
  return kExitOk;
}

int run_w2(Context& ctx) {
  const auto model = model_from(ctx.cfg);
  const auto sched = schedule_from(ctx.cfg);
  const double z = ctx.cfg.get_double("w2.z", 2.0);
  auto cps64 = ctx.cfg.get_u64s("w2.checkpoints", {1000, 10000, 100000});
  std::vector<std::size_t> cps(cps64.begin(), cps64.end());
  W2Params p;
  p.substeps = ctx.cfg.get_u64("w2.substeps", p.substeps);
  p.seed = ctx.cfg.seed();
  p.workers = ctx.cfg.workers();
  const std::size_t pairs = ctx.cfg.get_u64("w2.pairs", 4000);
  const double steps = static_cast<double>(pairs) * static_cast<double>(cps.empty() ? 0 : cps.back()) *
                       static_cast<double>(p.substeps + 1);
  const auto budget = ctx.cfg.get_u64("budget.steps", 5'000'000'000ull);
  if (steps > static_cast<double>(budget))
    throw BudgetExceeded(static_cast<std::uint64_t>(steps), budget);
  const auto rep = w2_rate_study(model, sched, z, cps, pairs, p);
  json m = ctx.meta;
  m.update({{"model", model.name()}, {"schedule", sched.name()}, {"z", z}, {"pairs", pairs},
            {"substeps", p.substeps}, {"slope", rep.slope}, {"ratio_spread", rep.ratio_spread},
            {"ratio_bounded", rep.ratio_bounded}, {"verdict", to_string(rep.verdict)}});
  write_study_csv(rep.rows, ctx.out / "w2.csv", m);
  ctx.log << fmt::format("  slope = {:.3f}, ratio spread = {:.3f}\n", rep.slope, rep.ratio_spread);
  return kExitOk;
}

int run_coupling(Context& ctx) {
  const auto model = model_from(ctx.cfg);
  auto c = model.constants();
  c.k1 = ctx.cfg.get_double("coupling.K1", c.k1);
  c.k2 = ctx.cfg.get_double("coupling.K2", c.k2);
  c.k3 = ctx.cfg.get_double("coupling.K3", c.k3);
  c.lipschitz = ctx.cfg.get_double("coupling.L", c.lipschitz);
  CurveGridSpec gs;
  gs.points = ctx.cfg.get_u64("coupling.points", gs.points);
  const auto curve = build_curve(c, gs);
  const auto fi = check_f_inequalities(curve);
  json cm = ctx.meta;
  cm.update({{"local_violation", fi.local_violation}, {"c1_prime", fi.c1_prime},
             {"max_f_second", fi.max_f_second}, {"g_min_to_R1", fi.g_min_to_R1}});
  curve.write_csv(ctx.out / "curve.csv", cm);
  ctx.log << fmt::format("  R0 = {:.6g}, R1 = {:.6g}, c1 = {:.6g}, c2 = {:.6g}\n", curve.R0,
                         curve.R1, curve.c1, curve.c2);

  const std::size_t n = ctx.cfg.get_u64("coupling.n", 10000);
  const std::size_t pairs = ctx.cfg.get_u64("coupling.pairs", 2000);
  if (n == 0 || pairs == 0) return kExitOk;
  ContractionParams p;
  p.substeps = ctx.cfg.get_u64("coupling.substeps", p.substeps);
  p.delta_stick = ctx.cfg.get_double("coupling.delta_stick", p.delta_stick);
  p.c = ctx.cfg.get_optional_double("coupling.c");
  p.epsilon = ctx.cfg.get_optional_double("coupling.epsilon");
  const auto cps = ctx.cfg.get_u64s("coupling.checkpoints", {});
  p.checkpoints = cps.empty() ? decade_checkpoints(n) : std::vector<std::size_t>(cps.begin(), cps.end());
  p.seed = ctx.cfg.seed();
  p.workers = ctx.cfg.workers();
  p.grid = gs;
  const auto policy = ctx.cfg.get_string("coupling.policy", "re-reflect");
  if (policy == "synchronous") p.policy = ReseparationPolicy::ForceSynchronous;
  else if (policy != "re-reflect")
    throw ConfigError("coupling.policy", ctx.cfg.line_of("coupling.policy"), "expected re-reflect or synchronous");
  const double steps = static_cast<double>(pairs) * static_cast<double>(n) * static_cast<double>(p.substeps);
  const auto budget = ctx.cfg.get_u64("budget.steps", 5'000'000'000ull);
  if (steps > static_cast<double>(budget)) throw BudgetExceeded(static_cast<std::uint64_t>(steps), budget);

  const auto sched = schedule_from(ctx.cfg);
  const double z = ctx.cfg.get_double("coupling.z", 2.0);
  const auto rep = contraction_study(model, sched, z, n, pairs, p);
  json m = ctx.meta;
  m.update({{"model", model.name()}, {"schedule", sched.name()}, {"z", z}, {"pairs", pairs},
            {"c", rep.c}, {"epsilon", rep.epsilon}, {"reseparations", rep.reseparations},
            {"policy", policy}, {"ratio_trend", rep.ratio_trend}, {"verdict", to_string(rep.verdict)}});
  json frac = json::array();
  for (const auto& r : rep.rows) frac.push_back(r.coalesced_fraction);
  m["coalesced_fraction"] = frac;
  write_study_csv(rep.rows, ctx.out / "contraction.csv", m);
  ctx.log << fmt::format("  contraction trend = {:.3f} ({}), re-separations = {}\n", rep.ratio_trend,
                         to_string(rep.verdict), rep.reseparations);
  return kExitOk;
}

std::size_t scaled(double base, double scale, double floor) {
  return static_cast<std::size_t>(std::max(floor, std::round(base * scale)));
}

int run_fig1(Context& ctx) {
  const auto model = SDEModel::shifted_sine();
  const auto h = TestFunction::witch();
  const double s = ctx.cfg.scale();
  if (!(s > 0.0)) throw ConfigError("scale", ctx.cfg.line_of("scale"), "must be positive");
  const std::size_t N = ctx.cfg.get_u64("ensemble.N", scaled(3000, s, 100));
  const std::size_t n = ctx.cfg.get_u64("ensemble.n", scaled(1e5, s, 1e3));
  const auto density = stationary_density(model, grid_from(ctx.cfg));
  const auto sol = solve_poisson(model, h, density);
  json pm = ctx.meta;
  pm.update({{"model", model.name()}, {"h", h.name()}, {"pi_h", sol.pi_h()}, {"variance", sol.variance()},
             {"residual_max", sol.residual_max()}});
  sol.write_csv(ctx.out / "poisson_witch.csv", pm);

  const std::pair<const char*, StepSchedule> panels[] = {
      {"power", StepSchedule::power(0.75)},
      {"log_over_k", StepSchedule::log_over_k()},
      {"harmonic", StepSchedule::harmonic()}};
  for (const auto& [label, sched] : panels) {
    const auto res = run_ensemble(
        ensemble_from(ctx, model, sched, {h}, N, n, derive_seed(ctx.cfg.seed(), fmt::format("fig1/{}", label))));
    const auto rep = clt_report(res, 0, step_totals(sched, n).T, sol.pi_h(), sol.variance());
    json m = ctx.meta;
    m.update({{"model", model.name()}, {"schedule", sched.name()}, {"ensemble_hash", res.config_hash}});
    rep.write_csv(ctx.out / fmt::format("fig1_{}.csv", label), m);
    ctx.log << fmt::format("  {}: N = {}, n = {}, sample var = {:.4g} (v = {:.4g}), KS p = {:.4g}\n",
                           sched.name(), rep.samples.size(), n, rep.moments.variance, sol.variance(),
                           rep.ks.p_value);
  }
  return kExitOk;
}

int run_fig2(Context& ctx) {
  const auto model = SDEModel::shifted_sine();
  const auto sched = StepSchedule::harmonic();
  const double s = ctx.cfg.scale();
  if (!(s > 0.0)) throw ConfigError("scale", ctx.cfg.line_of("scale"), "must be positive");
  const std::size_t N = ctx.cfg.get_u64("ensemble.N", scaled(3000, s, 100));
  const std::size_t n = ctx.cfg.get_u64("ensemble.n", scaled(1e9, s, 1e3));
  const auto hs = test_functions_from(ctx.cfg, "ensemble.h", {"witch", "sine", "identity"});
  const auto grid = grid_from(ctx.cfg);
  const double T = step_totals(sched, n).T;

  std::vector<std::vector<double>> standardized;
  for (const auto& h : hs) {
    const auto o = poisson_oracle(model, h, grid);
    const auto res = run_ensemble(
        ensemble_from(ctx, model, sched, {h}, N, n, derive_seed(ctx.cfg.seed(), "fig2/" + h.name())));
    const auto rep = clt_report(res, 0, T, o.pi_h, o.v);
    CsvTable t({"chain_id", "statistic", "standardized"});
    std::vector<double> z;
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
      z.push_back(rep.samples[i] / std::sqrt(o.v));
      t.add_row({fmt::format("{}", rep.chain_ids[i]), fmt_num(rep.samples[i]), fmt_num(z.back())});
    }
    json m = ctx.meta;
    m.update({{"model", model.name()}, {"schedule", sched.name()}, {"ensemble_hash", res.config_hash}});
    m.update(rep.summary());
    t.write(ctx.out / fmt::format("fig2_{}.csv", file_label(h.name())), m);
    ctx.log << fmt::format("  {}: N = {}, standardized var = {:.4g}, KS vs N(0,v) p = {:.4g}\n", h.name(),
                           z.size(), sample_moments(z).variance, rep.ks.p_value);
    standardized.push_back(std::move(z));
  }
  json pairs = json::array();
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (std::size_t j = i + 1; j < hs.size(); ++j) {
      const auto ks = ks_two_sample(standardized[i], standardized[j]);
      pairs.push_back({{"a", hs[i].name()}, {"b", hs[j].name()}, {"D", ks.statistic}, {"p", ks.p_value}});
      ctx.log << fmt::format("  {} vs {}: D = {:.4f}, p = {:.4g}\n", hs[i].name(), hs[j].name(),
                             ks.statistic, ks.p_value);
    }
  json doc = ctx.meta;
  doc.update({{"n", n}, {"N", N}, {"T_n", T}, {"pairwise_ks", pairs}});
  write_json(ctx.out / "fig2_ks.json", doc);
  return kExitOk;
}

}  // namespace

int run_experiment(const RunConfig& cfg, std::ostream& log) {
  const auto name = cfg.experiment();
  Context ctx{cfg, log, cfg.out_dir(), {}};
  ctx.meta = {{"config_hash", cfg.hash()}, {"seed", cfg.seed()}, {"experiment", name}, {"version", kVersion}};
  int (*fn)(Context&) = nullptr;
  if (name == "schedule-audit") fn = run_audit;
  else if (name == "clt") fn = run_clt;
  else if (name == "fclt") fn = run_fclt;
  else if (name == "poisson") fn = run_poisson;
  else if (name == "w2") fn = run_w2;
  else if (name == "coupling") fn = run_coupling;
  else if (name == "repro-fig1") fn = run_fig1;
  else if (name == "repro-fig2") fn = run_fig2;
  else
    throw ConfigError("experiment", cfg.line_of("experiment"),
                      fmt::format("unknown experiment '{}'", name));
  fs::create_directories(ctx.out);
  write_json(ctx.out / "config.json", {{"canonical", cfg.canonical_text()}, {"config_hash", cfg.hash()}});
  log << fmt::format("{} -> {}\n", name, ctx.out.string());
  const int code = fn(ctx);
  write_manifest(ctx.out);
  return code;
}

}  // namespace emclt
