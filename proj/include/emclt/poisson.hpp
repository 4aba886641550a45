#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "emclt/engine.hpp"
#include "emclt/model.hpp"

namespace emclt {

struct GridSpec {
  /// Odd; the grid is symmetric about 0 with a node at 0.
  std::size_t points = (1u << 14) + 1;
  /// Half-width; chosen from the tail criterion when absent.
  std::optional<double> x_max;
  double tail_mass = 1e-10;
};

/// Uniform symmetric grid x_i = (i - c) dx.
struct UniformGrid {
  std::size_t points = 0;
  double dx = 0.0;
  double x_max = 0.0;
  double x(std::size_t i) const;
  double midpoint(std::size_t i) const;  // of cell [x_i, x_{i+1}]
};

struct StationaryDensity {
  UniformGrid grid;
  double sigma = 1.0;
  std::vector<double> log_unnormalized;      // U(x_i) = int_0^{x_i} 2b/sigma^2
  std::vector<double> log_unnormalized_mid;  // U at cell midpoints
  double log_shift = 0.0;                    // max U, subtracted before exponentiating
  double normalizer = 0.0;                   // Z of exp(U - log_shift)
  std::vector<double> density;
  std::vector<double> density_mid;
  double tail_mass = 0.0;

  /// Simpson quadrature of f * pi over the grid, pairing mirrored cells.
  template <class F>
  double expect(F&& f) const;
};

StationaryDensity stationary_density(const SDEModel& model, const GridSpec& spec = {});

class PoissonSolution {
 public:
  const UniformGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<double>& dphi() const noexcept { return dphi_; }
  const std::vector<double>& d2phi() const noexcept { return d2phi_; }
  const std::vector<double>& density() const noexcept { return density_; }
  double pi_h() const noexcept { return pi_h_; }
  double variance() const noexcept { return variance_; }
  double residual_max() const noexcept { return residual_max_; }
  double pi_phi() const noexcept { return pi_phi_; }
  double junction_mismatch() const noexcept { return junction_mismatch_; }

  /// Cubic Hermite interpolation on the grid; quadratic Taylor extension outside.
  double phi_at(double x) const;
  double dphi_at(double x) const;
  /// From the equation: (2/sigma^2)(h - pi_h - b phi').
  double d2phi_at(double x) const;

  PhiHooks hooks() const;
  void write_csv(const std::filesystem::path& path, const nlohmann::json& meta) const;

 private:
  friend PoissonSolution solve_poisson(const SDEModel&, const TestFunction&,
                                       const StationaryDensity&);
  PoissonSolution(SDEModel model, TestFunction h) : model_(std::move(model)), h_(std::move(h)) {}
  SDEModel model_;
  TestFunction h_;
  UniformGrid grid_;
  double sigma_ = 1.0;
  std::vector<double> phi_, dphi_, d2phi_, density_;
  double pi_h_ = 0.0, variance_ = 0.0, residual_max_ = 0.0, pi_phi_ = 0.0;
  double junction_mismatch_ = 0.0;
};

PoissonSolution solve_poisson(const SDEModel& model, const TestFunction& h,
                              const StationaryDensity& density);

struct RegularityReport {
  double ratio[3] = {0.0, 0.0, 0.0};  // max |phi^{(k)}| / (1 + |x|^{k+2})
  double range = 0.0;
  bool bounded = true;
};

RegularityReport regularity_fit(const PoissonSolution& solution,
                                std::optional<double> range = std::nullopt);

// ---------------------------------------------------------------------------

template <class F>
double StationaryDensity::expect(F&& f) const {
  // Cell Simpson rule; mirrored cells are added first so odd integrands
  // cancel exactly on symmetric densities.
  const std::size_t cells = grid.points - 1;
  auto cell = [&](std::size_t i) {
    return grid.dx / 6.0 *
           (f(grid.x(i)) * density[i] + 4.0 * f(grid.midpoint(i)) * density_mid[i] +
            f(grid.x(i + 1)) * density[i + 1]);
  };
  double total = 0.0;
  for (std::size_t j = 0; j < cells / 2; ++j) total += cell(j) + cell(cells - 1 - j);
  return total;
}

}  // namespace emclt
