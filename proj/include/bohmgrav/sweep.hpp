#pragma once

// Semi-classical limit sweeps: solve the classical problem once as the
// reference, then walk a descending list of epsilon values and record how the
// quantum state approaches it.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bohmgrav/classical.hpp"
#include "bohmgrav/energy.hpp"
#include "bohmgrav/errors.hpp"
#include "bohmgrav/quantum.hpp"

namespace bohmgrav {

struct SweepEntry {
  double epsilon = 0.0;
  bool converged = false;
  double fermi_level = 0.0;
  double u_phi_gap = 0.0;  // L2 distance between u and sigma * classical phi
  double phi_gap = 0.0;    // H1 seminorm distance between the potentials
  double fisher = 0.0;
  double free_energy = 0.0;
  double total_energy = 0.0;
};

struct SweepRecord {
  double sigma = 0.0;
  double classical_fermi = 0.0;   // F* of the reference state
  double classical_fisher = 0.0;  // Fisher information of the reference density
  double classical_free_energy = 0.0;
  std::vector<SweepEntry> entries;  // ordered by decreasing epsilon
};

// Sweep the quantum solver over descending epsilon at fixed coupling.  Gaps
// are measured against the discrete classical state on the same mesh, so they
// isolate the epsilon effect from discretization error.  Solves are
// warm-started from the previous epsilon unless warm_start is false; a solve
// that fails to converge is recorded with converged = false and the sweep
// moves on (cold-starting the next entry, since the failed state is not a
// trustworthy seed).
inline SweepRecord epsilon_sweep(const Mesh& mesh, double sigma,
                                 const std::vector<double>& epsilons,
                                 const IterationConfig& config, bool warm_start = true) {
  constexpr double pi = std::numbers::pi;
  if (!(sigma < 8 * pi))
    throw ConfigError("epsilon_sweep: requires sigma < 8*pi for a classical reference");
  if (epsilons.empty()) throw ConfigError("epsilon_sweep: no epsilon values");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw ConfigError("epsilon_sweep: epsilon values must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
      throw ConfigError("epsilon_sweep: epsilon values must be strictly descending");
  }

  const ClassicalState classical = classical_solve(mesh, sigma, config);
  if (!classical.converged)
    throw NonConvergenceError("epsilon_sweep: classical reference did not converge",
                              classical.residual_history);

  SweepRecord record;
  record.sigma = sigma;
  record.classical_fermi = classical.fermi_star;
  record.classical_fisher = fisher_information(mesh, classical.n0);
  record.classical_free_energy = free_energy(mesh, classical.n0, classical.phi0, sigma);

  const std::vector<double> m = lumped_mass_vector(mesh);
  const SparseMatrix K = assemble_stiffness(mesh);

  SolutionState previous;
  bool have_previous = false;
  for (double eps : epsilons) {
    ModelParams params;
    params.epsilon = eps;
    params.sigma = sigma;
    params.domain_kind = mesh.domain;

    SweepEntry entry;
    entry.epsilon = eps;
    SolutionState st;
    try {
      st = picard_fixed_point(mesh, params, config,
                              (warm_start && have_previous) ? &previous : nullptr);
      entry.converged = true;
    } catch (const NonConvergenceError&) {
      have_previous = false;
      record.entries.push_back(entry);
      continue;
    }

    entry.fermi_level = st.fermi_level;
    long double gap2 = 0.0L;
    for (std::size_t a = 0; a < st.u.size(); ++a) {
      const double d = st.u[a] - sigma * classical.phi0[a];
      gap2 += static_cast<long double>(m[a]) * d * d;
    }
    entry.u_phi_gap = static_cast<double>(std::sqrt(gap2));

    std::vector<double> diff(st.phi.size());
    for (std::size_t a = 0; a < diff.size(); ++a) diff[a] = st.phi[a] - classical.phi0[a];
    const std::vector<double> Kd = K.multiply(diff);
    long double h1 = 0.0L;
    for (std::size_t a = 0; a < diff.size(); ++a)
      h1 += static_cast<long double>(diff[a]) * Kd[a];
    entry.phi_gap = static_cast<double>(std::sqrt(std::max(0.0L, h1)));

    const EnergyReport energy = total_energy(mesh, st.n, st.phi, params);
    entry.fisher = energy.fisher;
    entry.free_energy = energy.free_energy;
    entry.total_energy = energy.total_energy;

    record.entries.push_back(entry);
    previous = std::move(st);
    have_previous = true;
  }
  return record;
}

}  // namespace bohmgrav
