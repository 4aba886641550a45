#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emclt {

struct ScheduleInvalid : std::invalid_argument {
  ScheduleInvalid(std::uint64_t k, const std::string& what)
      : std::invalid_argument(what), index(k) {}
  std::uint64_t index;
};

struct UnsupportedDimension : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetExceeded : std::runtime_error {
  BudgetExceeded(std::uint64_t steps, std::uint64_t budget);
  std::uint64_t requested;
  std::uint64_t allowed;
};

/// Three-valued outcome of a finite-range check of an asymptotic property.
enum class Verdict { SatisfiedOnRange, ViolatedAt, Inconclusive };

std::string_view to_string(Verdict v);

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }
  double raw_sum() const noexcept { return sum_; }
  double raw_comp() const noexcept { return comp_; }
  void restore(double s, double c) noexcept { sum_ = s; comp_ = c; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace emclt
