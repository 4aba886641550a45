#include "emclt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "emclt/io.hpp"

namespace emclt {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment", "out", "seed", "scale", "workers",
      "model.name", "model.sigma",
      "schedule.name", "schedule.beta", "schedule.c0", "schedule.values",
      "ensemble.N", "ensemble.n", "ensemble.init", "ensemble.burn_in", "ensemble.h",
      "budget.steps",
      "audit.n_max", "audit.epsilon",
      "fclt.grid", "fclt.target",
      "poisson.h", "poisson.points", "poisson.x_max",
      "w2.z", "w2.checkpoints", "w2.pairs", "w2.substeps",
      "coupling.z", "coupling.n", "coupling.pairs", "coupling.substeps", "coupling.c",
      "coupling.epsilon", "coupling.delta_stick", "coupling.policy", "coupling.points",
      "coupling.checkpoints", "coupling.K1", "coupling.K2", "coupling.K3", "coupling.L",
  };
  return keys;
}

// Keys that only change where or how fast results are produced.
bool hashed(const std::string& key) { return key != "workers" && key != "out"; }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  if constexpr (std::is_floating_point_v<T>) {
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
  } else {
    // Accept 1e6-style integers as long as they are exact.
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec == std::errc() && p == e) return true;
    double d = 0;
    auto [p2, ec2] = std::from_chars(b, e, d);
    if (ec2 != std::errc() || p2 != e || d < 0 || d > 1.8e19 || d != std::floor(d)) return false;
    out = static_cast<T>(d);
    return true;
  }
}

}  // namespace

ConfigError::ConfigError(std::string k, std::size_t l, const std::string& what)
    : std::runtime_error(l ? fmt::format("config line {}: key '{}': {}", l, k, what)
                           : fmt::format("option '{}': {}", k, what)),
      key(std::move(k)),
      line(l) {}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line, line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(key, line_no, "empty key");
    if (!known_keys().count(key)) throw ConfigError(key, line_no, "unknown key");
    if (cfg.entries_.count(key))
      throw ConfigError(key, line_no,
                        fmt::format("duplicate (first set on line {})", cfg.entries_[key].line));
    cfg.entries_[key] = {value, line_no};
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::set(const std::string& key, std::string value) {
  if (!known_keys().count(key)) throw ConfigError(key, 0, "unknown key");
  entries_[key] = {std::move(value), 0};
}

const RunConfig::Entry* RunConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t RunConfig::line_of(const std::string& key) const {
  const auto* e = find(key);
  return e ? e->line : 0;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto* e = find(key);
  return e ? e->value : fallback;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  return get_optional_double(key).value_or(fallback);
}

std::optional<double> RunConfig::get_optional_double(const std::string& key) const {
  const auto* e = find(key);
  if (!e) return std::nullopt;
  double v = 0;
  if (!parse_number(e->value, v) || !std::isfinite(v))
    throw ConfigError(key, e->line, fmt::format("'{}' is not a number", e->value));
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  if (!parse_number(e->value, v))
    throw ConfigError(key, e->line, fmt::format("'{}' is not a non-negative integer", e->value));
  return v;
}

std::vector<double> RunConfig::get_doubles(const std::string& key, std::vector<double> fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(e->value)) {
    double v = 0;
    if (!parse_number(item, v)) throw ConfigError(key, e->line, fmt::format("'{}' is not a number", item));
    out.push_back(v);
  }
  return out;
}

std::vector<std::uint64_t> RunConfig::get_u64s(const std::string& key,
                                               std::vector<std::uint64_t> fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(e->value)) {
    std::uint64_t v = 0;
    if (!parse_number(item, v))
      throw ConfigError(key, e->line, fmt::format("'{}' is not a non-negative integer", item));
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> RunConfig::get_strings(const std::string& key,
                                                std::vector<std::string> fallback) const {
  const auto* e = find(key);
  return e ? split_list(e->value) : fallback;
}

std::string RunConfig::canonical_text() const {
  std::string s;
  for (const auto& [k, e] : entries_)
    if (hashed(k)) s += k + "=" + e.value + "\n";
  return s;
}

std::string RunConfig::hash() const { return sha256_hex(canonical_text()); }

SDEModel model_from(const RunConfig& cfg) {
  const auto name = cfg.get_string("model.name", "shifted-sine");
  if (name == "shifted-sine") return SDEModel::shifted_sine();
  if (name == "ou") {
    const double s = cfg.get_double("model.sigma", 1.0);
    if (!(s > 0.0)) throw ConfigError("model.sigma", cfg.line_of("model.sigma"), "must be positive");
    return SDEModel::ornstein_uhlenbeck(s);
  }
  throw ConfigError("model.name", cfg.line_of("model.name"), fmt::format("unknown model '{}' (shifted-sine, ou)", name));
}

StepSchedule schedule_from(const RunConfig& cfg, const std::string& prefix) {
  const auto name = cfg.get_string(prefix + ".name", "power");
  if (name == "power") return StepSchedule::power(cfg.get_double(prefix + ".beta", 0.75));
  if (name == "log-over-k") return StepSchedule::log_over_k();
  if (name == "harmonic") return StepSchedule::harmonic();
  if (name == "scaled-power")
    return StepSchedule::scaled_power(cfg.get_double(prefix + ".c0", 1.0),
                                      cfg.get_double(prefix + ".beta", 0.75));
  if (name == "table") {
    auto v = cfg.get_doubles(prefix + ".values", {});
    if (v.empty()) throw ConfigError(prefix + ".values", cfg.line_of(prefix + ".values"), "table schedule needs values");
    return StepSchedule::table(std::move(v));
  }
  throw ConfigError(prefix + ".name", cfg.line_of(prefix + ".name"),
                    fmt::format("unknown schedule '{}' (power, log-over-k, harmonic, scaled-power, table)", name));
}

InitSpec init_from(const RunConfig& cfg) {
  const auto spec = cfg.get_string("ensemble.init", "paper");
  if (spec == "paper") return paper_init();
  const auto colon = spec.find(':');
  const auto kind = spec.substr(0, colon);
  std::vector<double> vals;
  if (colon != std::string::npos)
    for (const auto& item : split_list(spec.substr(colon + 1))) {
      double v = 0;
      if (!parse_number(item, v)) throw ConfigError("ensemble.init", cfg.line_of("ensemble.init"), fmt::format("bad value '{}'", item));
      vals.push_back(v);
    }
  if (kind == "fixed" && vals.size() == 1) return FixedInit{vals};
  if (kind == "choice" && !vals.empty()) return UniformChoiceInit{vals};
  throw ConfigError("ensemble.init", cfg.line_of("ensemble.init"), "expected paper, fixed:<x> or choice:<a,b,...>");
}

std::vector<TestFunction> test_functions_from(const RunConfig& cfg, const std::string& key,
                                              std::vector<std::string> fallback) {
  std::vector<TestFunction> out;
  for (const auto& n : cfg.get_strings(key, std::move(fallback))) {
    try {
      out.push_back(TestFunction::by_name(n));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, cfg.line_of(key), e.what());
    }
  }
  if (out.empty()) throw ConfigError(key, cfg.line_of(key), "no test functions");
  return out;
}

}  // namespace emclt
