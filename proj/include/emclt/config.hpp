#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emclt/engine.hpp"
#include "emclt/model.hpp"
#include "emclt/schedules.hpp"

namespace emclt {

struct ConfigError : std::runtime_error {
  ConfigError(std::string key, std::size_t line, const std::string& what);
  std::string key;
  std::size_t line;  // 0 for values set on the command line
};

/// Flat `section.key = value` configuration; `#` starts a comment.
class RunConfig {
 public:
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  /// Source line of a key, 0 when set programmatically or absent.
  std::size_t line_of(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::uint64_t> get_u64s(const std::string& key, std::vector<std::uint64_t> fallback) const;
  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const;

  /// Sorted `key=value` lines, excluding keys that do not affect results.
  std::string canonical_text() const;
  std::string hash() const;

  std::string experiment() const { return get_string("experiment", ""); }
  std::filesystem::path out_dir() const { return get_string("out", "out"); }
  std::uint64_t seed() const { return get_u64("seed", 20240501); }
  double scale() const { return get_double("scale", 1.0); }
  std::size_t workers() const { return get_u64("workers", 0); }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  std::map<std::string, Entry> entries_;
  const Entry* find(const std::string& key) const;
};

SDEModel model_from(const RunConfig& cfg);
StepSchedule schedule_from(const RunConfig& cfg, const std::string& prefix = "schedule");
InitSpec init_from(const RunConfig& cfg);
std::vector<TestFunction> test_functions_from(const RunConfig& cfg, const std::string& key,
                                              std::vector<std::string> fallback);

}  // namespace emclt
