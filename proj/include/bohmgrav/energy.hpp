#pragma once

// Energy functionals of the stationary system and the uniqueness-threshold
// constants.  The total energy splits as eps^2 * (Fisher information) plus a
// free energy, and that decomposition is kept exact here by computing the
// total from its parts.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "bohmgrav/errors.hpp"
#include "bohmgrav/fem.hpp"
#include "bohmgrav/mesh.hpp"
#include "bohmgrav/quantum.hpp"

namespace bohmgrav {

struct EnergyReport {
  double fisher = 0.0;
  double free_energy = 0.0;
  double total_energy = 0.0;
  double moser_g = 0.0;
  double mass = 0.0;
};

// Threshold constants from the uniqueness bound |sigma| < mu_d sqrt(c0^2 +
// 2 eps^2 c1^2).  The constants c0 and c1 are ratios of embedding constants
// with no known numeric values; callers supply them (default 1 at the CLI
// layer) and should treat derived thresholds as shape, not certified bounds.
struct ThresholdReport {
  int d = 2;
  double mu_d = 0.0;
  double gamma_d = 0.0;  // zero in two dimensions, where mu_2 = 8*pi directly
  double epsilon = 0.0;
  double c0 = 1.0;
  double c1 = 1.0;
  double sigma_max = 0.0;
};

// Fisher information of a nonnegative density: with s = sqrt(n) nodally, the
// stiffness form s^T K s, a direct discretization of the integral of
// |grad sqrt(n)|^2.
inline double fisher_information(const Mesh& mesh, const ScalarField& n) {
  validate_field(mesh, n, "fisher_information");
  std::vector<double> s(n.size());
  for (std::size_t a = 0; a < n.size(); ++a) {
    if (n[a] < 0.0) throw NumericalError("fisher_information: negative density value");
    s[a] = std::sqrt(n[a]);
  }
  const SparseMatrix K = assemble_stiffness(mesh);
  const std::vector<double> Ks = K.multiply(s);
  long double acc = 0.0L;
  for (std::size_t a = 0; a < s.size(); ++a)
    acc += static_cast<long double>(s[a]) * Ks[a];
  return static_cast<double>(acc);
}

// Free energy: lumped quadrature of n (log n - 1) - (sigma/2) n phi.  The
// entropy term uses the convention 0 log 0 = 0, and densities below 1e-300
// are floored before the log so that underflowing radial tails do not poison
// the sum with infinities.
inline double free_energy(const Mesh& mesh, const ScalarField& n, const ScalarField& phi,
                          double sigma) {
  validate_field(mesh, n, "free_energy density");
  validate_field(mesh, phi, "free_energy potential");
  if (!std::isfinite(sigma)) throw ConfigError("free_energy: sigma must be finite");

  const std::vector<double> m = lumped_mass_vector(mesh);
  long double acc = 0.0L;
  for (std::size_t a = 0; a < n.size(); ++a) {
    if (n[a] < 0.0) throw NumericalError("free_energy: negative density value");
    const double entropy =
        (n[a] == 0.0) ? 0.0 : n[a] * (std::log(std::max(n[a], 1e-300)) - 1.0);
    acc += static_cast<long double>(m[a]) *
           (entropy - 0.5 * sigma * n[a] * phi[a]);
  }
  return static_cast<double>(acc);
}

// All energy diagnostics of a (density, potential) pair.  moser_g is the
// functional (sigma/2) |grad phi|^2 - log integral(e^{sigma phi}) - 1, with
// the exponential integral shifted by its max to stay finite for large
// sigma phi.
inline EnergyReport total_energy(const Mesh& mesh, const ScalarField& n, const ScalarField& phi,
                                 const ModelParams& params) {
  EnergyReport report;
  report.fisher = fisher_information(mesh, n);
  report.free_energy = free_energy(mesh, n, phi, params.sigma);
  report.total_energy = params.epsilon * params.epsilon * report.fisher + report.free_energy;
  report.mass = integrate(mesh, n);

  const SparseMatrix K = assemble_stiffness(mesh);
  const std::vector<double> Kphi = K.multiply(phi.values);
  long double quad = 0.0L;
  for (std::size_t a = 0; a < phi.size(); ++a)
    quad += static_cast<long double>(phi[a]) * Kphi[a];

  const std::vector<double> m = lumped_mass_vector(mesh);
  double shift = params.sigma * phi[0];
  for (std::size_t a = 1; a < phi.size(); ++a)
    shift = std::max(shift, params.sigma * phi[a]);
  long double z = 0.0L;
  for (std::size_t a = 0; a < phi.size(); ++a)
    z += static_cast<long double>(m[a]) * std::exp(params.sigma * phi[a] - shift);
  report.moser_g = 0.5 * params.sigma * static_cast<double>(quad) -
                   (shift + static_cast<double>(std::log(z))) - 1.0;
  return report;
}

// Uniqueness threshold for the coupling strength in dimension 2 or 3.  In 2D
// the sharp constant mu_2 = 8*pi enters directly; in 3D mu_3 = 2*gamma_3 with
// gamma_3 = (4 pi)^{2/3} (d-2) d^{(d-2)/d} evaluated at d = 3.
inline ThresholdReport uniqueness_threshold(int d, double epsilon, double c0, double c1) {
  constexpr double pi = std::numbers::pi;
  if (d != 2 && d != 3)
    throw ConfigError("uniqueness_threshold: dimension must be 2 or 3");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("uniqueness_threshold: epsilon must be nonnegative");
  if (!(c0 > 0.0) || !(c1 > 0.0))
    throw ConfigError("uniqueness_threshold: c0 and c1 must be positive");

  ThresholdReport report;
  report.d = d;
  report.epsilon = epsilon;
  report.c0 = c0;
  report.c1 = c1;
  if (d == 2) {
    report.mu_d = 8 * pi;
  } else {
    report.gamma_d = std::pow(4 * pi, 2.0 / 3.0) * std::pow(3.0, 1.0 / 3.0);
    report.mu_d = 2 * report.gamma_d;
  }
  report.sigma_max =
      report.mu_d * std::sqrt(c0 * c0 + 2 * epsilon * epsilon * c1 * c1);
  return report;
}

}  // namespace bohmgrav
