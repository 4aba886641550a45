#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

// Independent oracle for the curve integrals with (K1, K2, L, K3) = (1, 4, 2, 1.01): kappa written out by hand, the
// phi exponent, Phi and the two outer integrals all by composite Simpson in
// long double on a grid unrelated to the library's.
struct CurveOracle {
  long double A = 0, B = 0;
};

inline CurveOracle oracle_integrals(double R1, int cells) {
  const long double K3 = 1.01L;
  auto kplus = [](long double r) {
    if (r <= 0) return 2.0L;
    const long double k = std::min(-1.0L + 4.0L / (r * r), 2.0L);
    return k > 0 ? k : 0.0L;
  };
  const long double h = static_cast<long double>(R1) / cells;
  const long double hh = h / 2;
  // Exponent E(r) = K3/2 int_0^r s kappa+(s) ds, tracked at half-cell resolution.
  std::vector<long double> E(2 * cells + 1, 0.0L), phi(2 * cells + 1), Phi(2 * cells + 1, 0.0L);
  auto integrand = [&](long double s) { return s * kplus(s); };
  for (int i = 0; i < 2 * cells; ++i) {
    const long double a = i * hh, b = a + hh;
    E[i + 1] = E[i] + K3 / 2 * hh / 6 * (integrand(a) + 4 * integrand((a + b) / 2) + integrand(b));
  }
  for (int i = 0; i <= 2 * cells; ++i) phi[i] = std::exp(-E[i]);
  // Phi on the half grid: Simpson over pairs of half cells.
  for (int i = 0; i + 2 <= 2 * cells; i += 2) {
    Phi[i + 2] = Phi[i] + hh / 3 * (phi[i] + 4 * phi[i + 1] + phi[i + 2]);
    // Midpoint via quadratic interpolation through (i, i+1, i+2).
    Phi[i + 1] = Phi[i] + hh / 12 * (5 * phi[i] + 8 * phi[i + 1] - phi[i + 2]);
  }
  CurveOracle o;
  for (int i = 0; i < cells; ++i) {
    const int a = 2 * i, m = a + 1, b = a + 2;
    o.A += h / 6 * (Phi[a] / phi[a] + 4 * Phi[m] / phi[m] + Phi[b] / phi[b]);
    o.B += h / 6 * (1 / phi[a] + 4 / phi[m] + 1 / phi[b]);
  }
  return o;
}
