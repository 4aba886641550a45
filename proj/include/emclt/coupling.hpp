#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "emclt/model.hpp"
#include "emclt/rng.hpp"
#include "emclt/schedules.hpp"

namespace emclt {

struct CurveConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CurveGridSpec {
  std::size_t points = 10001;
  /// Defaults to 2 R1 (at least R1 + 1).
  std::optional<double> r_max;
};

struct CouplingCurve {
  DissipativityConstants constants;
  double R0 = 0.0, R1 = 0.0, c1 = 0.0, c2 = 0.0;
  std::size_t r1_index = 0;
  /// int_0^{R1} Phi/phi and int_0^{R1} 1/phi.
  double int_Phi_over_phi = 0.0, int_inv_phi = 0.0;
  std::vector<double> r, kappa, phi, Phi, g, f, df, d2f;

  /// Cubic Hermite lookup; linear beyond the grid (f' is constant past R1).
  double f_at(double r) const;
  void write_csv(const std::filesystem::path& path, const nlohmann::json& meta) const;
};

double coupling_R0(const DissipativityConstants& c);
double coupling_R1(const DissipativityConstants& c, double R0);
/// (K3/2) int_0^r s max(kappa(s), 0) ds in closed form.
double phi_exponent(const DissipativityConstants& c, double r);

CouplingCurve build_curve(const DissipativityConstants& c, const CurveGridSpec& spec = {});
CouplingCurve build_curve(const SDEModel& model, const CurveGridSpec& spec = {});

struct FInequalityReport {
  double local_violation = 0.0;  // max over (0, R1] of lhs + (c1/2) f + c2
  double c1_prime = 0.0;         // min over r > 0 of -2 lhs / f
  double max_f_second = 0.0;
  double max_lower_gap = 0.0;    // max of phi(R0) r / 2 - f
  double max_upper_gap = 0.0;    // max of f - r
  double df_min = 0.0, df_max = 0.0;
  double g_min_to_R1 = 0.0;
  bool g_non_increasing = true;
};

FInequalityReport check_f_inequalities(const CouplingCurve& curve);

struct Rho1Params {
  std::shared_ptr<const CouplingCurve> curve;
  double epsilon = 1.0;
};

/// 1{x != y} [f(|x - y|) + eps (V(x) + V(y))], V(x) = 1 + |x|^2.
double rho1(const Rho1Params& params, std::span<const double> x, std::span<const double> y);

enum class ReseparationPolicy { ReReflect, ForceSynchronous };

struct CoupledPair {
  std::vector<double> x, y;
  bool coalesced = false;
  bool ever_coalesced = false;
  std::size_t reseparations = 0;
};

struct CouplingNoise {
  CouplingNoise(std::uint64_t seed, std::uint64_t pair)
      : b1(seed, pair, StreamTag::CouplingA), b2(seed, pair, StreamTag::CouplingB) {}
  RandomStream b1, b2;
};

/// Advances the pair over [t0, t1]: x with the true drift on m substeps, y with
/// the drift frozen at the interval start. Noise indices start at `offset`.
void coupled_step(CoupledPair& pair, const SDEModel& model, double t0, double t1, std::size_t m,
                  double delta_stick, const CouplingNoise& noise, std::uint64_t offset,
                  ReseparationPolicy policy = ReseparationPolicy::ReReflect);

struct ContractionParams {
  std::size_t substeps = 50;
  double delta_stick = 1e-6;
  std::optional<double> c;
  std::optional<double> epsilon;
  std::vector<std::size_t> checkpoints;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  ReseparationPolicy policy = ReseparationPolicy::ReReflect;
  CurveGridSpec grid;
};

struct StudyRow {
  std::size_t n = 0;
  double t = 0.0, eta = 0.0, estimate = 0.0, bound_proxy = 0.0, ratio = 0.0;
  double coalesced_fraction = 0.0;
};

struct ContractionReport {
  std::vector<StudyRow> rows;
  double c = 0.0, epsilon = 0.0;
  std::size_t reseparations = 0;
  std::size_t pairs = 0;
  Verdict verdict = Verdict::Inconclusive;
  double ratio_trend = 0.0;
};

/// Sum_{k<=n} exp(-c (t_n - t_k)) eta_k^{3/2} for n = 1..n_max (index 0 is 0).
std::vector<double> bound_proxy(const SchedulePrefix& prefix, double c);

ContractionReport contraction_study(const SDEModel& model, const StepSchedule& schedule, double z,
                                    std::size_t n_end, std::size_t pairs,
                                    const ContractionParams& params);

struct W2Params {
  std::size_t substeps = 50;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
};

struct W2Report {
  std::vector<StudyRow> rows;  // estimate = W2, bound_proxy = eta^{1/4}
  double slope = 0.0;          // d log W2 / d log eta
  double ratio_spread = 0.0;   // max over last half / median
  bool ratio_bounded = false;
  Verdict verdict = Verdict::Inconclusive;
};

W2Report w2_rate_study(const SDEModel& model, const StepSchedule& schedule, double z,
                       std::span<const std::size_t> checkpoints, std::size_t pairs,
                       const W2Params& params = {});

void write_study_csv(const std::vector<StudyRow>& rows, const std::filesystem::path& path,
                     const nlohmann::json& meta);

}  // namespace emclt
