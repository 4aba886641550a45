#include "emclt/common.hpp"

#include <string>

namespace emclt {

BudgetExceeded::BudgetExceeded(std::uint64_t steps, std::uint64_t budget)
    : std::runtime_error("run needs " + std::to_string(steps) +
                         " steps, budget is " + std::to_string(budget)),
      requested(steps),
      allowed(budget) {}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::SatisfiedOnRange: return "satisfied-on-range";
    case Verdict::ViolatedAt: return "violated-at-k";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

}  // namespace emclt
