#pragma once

// Classical comparison solver.  Dropping the quantum term from the stationary
// system collapses it to a single semilinear problem for the potential,
//
//   -Delta Phi = alpha exp(sigma Phi),   Phi = 0 on the boundary,
//
// where alpha normalizes the density alpha exp(sigma Phi) to unit mass.  On
// the unit disk this problem has a unique solution for sigma < 8 pi given in
// closed form by the Liouville family, and no solution at all beyond that
// threshold.  The solver below detects the threshold by failing honestly:
// above 8 pi a monotone residual descent cannot reach a solution, and the
// resulting stagnation is reported, not raised.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "bohmgrav/errors.hpp"
#include "bohmgrav/fem.hpp"
#include "bohmgrav/mesh.hpp"
#include "bohmgrav/quantum.hpp"
#include "bohmgrav/sparse.hpp"

namespace bohmgrav {

// Converged classical state, or the last iterate with diagnostics when the
// iteration failed.  Fields mirror the quantum SolutionState where they
// overlap: n0 integrates to one and fermi_star = log of its normalization.
struct ClassicalState {
  ScalarField phi0;
  ScalarField n0;
  double fermi_star = 0.0;
  bool converged = false;
  double sigma = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;  // free-row residual norm per step
  std::string stop_reason;               // "converged", "stagnated", ...
};

// One row of a threshold scan.
struct ThresholdRecord {
  double sigma = 0.0;
  bool converged = false;
  double max_phi = 0.0;
  double fermi = 0.0;
};

struct LiouvillePoint {
  double phi = 0.0;
  double fermi = 0.0;
};

// Exact radial solution of the classical problem on the unit disk.  With
// mu = sigma/(8 pi - sigma) the scaled potential is
// sigma Phi = 2 log((1+mu)/(1+mu r^2)) and the normalization constant is
// pi (1+mu).  The formula degenerates smoothly to the uniform-load Poisson
// solution (1-r^2)/(4 pi) as sigma -> 0; log1p keeps that limit accurate for
// tiny sigma.
inline LiouvillePoint liouville_exact(double sigma, double r) {
  constexpr double pi = std::numbers::pi;
  if (!(sigma >= 0.0) || !(sigma < 8 * pi))
    throw ConfigError("liouville_exact: requires 0 <= sigma < 8*pi");
  if (!(r >= 0.0 && r <= 1.0))
    throw ConfigError("liouville_exact: radius must lie in [0, 1]");

  LiouvillePoint out;
  if (sigma == 0.0) {
    out.phi = (1.0 - r * r) / (4 * pi);
    out.fermi = -std::log(pi);
    return out;
  }
  const double mu = sigma / (8 * pi - sigma);
  out.phi = (2.0 / sigma) * (std::log1p(mu) - std::log1p(mu * r * r));
  out.fermi = -std::log(pi) - std::log1p(mu);
  return out;
}

namespace detail {

// Free-row residual of the normalized problem: K Phi - M n(Phi) on interior
// nodes, zero on boundary rows.  The density (with its normalization) comes
// from the same shifted exponential used by the quantum solver, so the pair
// (n0, fermi_star) always satisfies the nodal identity n0 = alpha e^{sigma
// Phi} exactly.
inline std::vector<double> classical_residual(const Mesh& mesh, const SparseMatrix& K,
                                              const std::vector<double>& mass,
                                              const ScalarField& phi, double sigma,
                                              DensityResult& density) {
  ScalarField u = phi;
  for (double& v : u.values) v *= sigma;
  density = density_from_u(mesh, u);

  std::vector<double> g = K.multiply(phi.values);
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    if (mesh.node_on_boundary[a])
      g[a] = 0.0;
    else
      g[a] -= mass[a] * density.n[a];
  }
  return g;
}

// Newton step for the normalized problem.  The derivative of the residual is
// K - sigma M diag(n) plus the rank-one term sigma (m n)(m n)^T coming from
// the normalization; the rank-one part is kept sparse by bordering the system
// with one auxiliary unknown s = (m n)^T delta:
//
//   [ K - sigma M diag(n)   sigma m n ] [delta]   [-g]
//   [ (m n)^T                   -1    ] [  s  ] = [ 0].
//
// The bordered matrix stays well conditioned through the fold of the
// unnormalized problem (which the solution path crosses at sigma = 4 pi), and
// boundary rows are replaced by identity since Phi is pinned there.
inline std::vector<double> classical_newton_step(const Mesh& mesh, const SparseMatrix& K,
                                                 const std::vector<double>& mass,
                                                 const DensityResult& density, double sigma,
                                                 const std::vector<double>& g) {
  const std::size_t N = mesh.node_count();
  CooBuilder coo(N + 1, N + 1);
  for (std::size_t i = 0; i < N; ++i) {
    if (mesh.node_on_boundary[i]) {
      coo.add(i, i, 1.0);
      continue;
    }
    for (std::size_t k = K.row_offsets[i]; k < K.row_offsets[i + 1]; ++k) {
      const std::size_t j = K.col_indices[k];
      if (!mesh.node_on_boundary[j]) coo.add(i, j, K.values[k]);
    }
    const double w = mass[i] * density.n[i];
    coo.add(i, i, -sigma * w);
    coo.add(i, N, sigma * w);
  }
  for (std::size_t j = 0; j < N; ++j)
    if (!mesh.node_on_boundary[j]) coo.add(N, j, mass[j] * density.n[j]);
  coo.add(N, N, -1.0);
  const SparseMatrix bordered = coo.compress();

  std::vector<double> rhs(N + 1, 0.0);
  for (std::size_t a = 0; a < N; ++a) rhs[a] = -g[a];
  std::vector<double> sol = solve_linear(bordered, rhs, /*symmetric=*/false, 1e-8);
  sol.resize(N);
  return sol;
}

}  // namespace detail

// Solve the classical problem by damped Newton on the normalized map.  Below
// the threshold the iteration converges in a handful of steps from the zero
// start; above it the residual landscape has no critical point to descend to
// and the backtracking line search stagnates, which is reported through
// converged = false rather than an exception, because threshold scans rely on
// observing exactly that failure.  A blow-up guard (max |Phi| > 1e3) and the
// iteration cap are kept as secondary stops.  An optional initial iterate
// serves warm starts during scans.
inline ClassicalState classical_solve(const Mesh& mesh, double sigma,
                                      const IterationConfig& config,
                                      const ScalarField* initial = nullptr) {
  detail::validate_iteration(config);
  if (!std::isfinite(sigma)) throw ConfigError("classical_solve: sigma must be finite");
  if (initial) validate_field(mesh, *initial, "classical_solve initial");

  const std::size_t N = mesh.node_count();
  const SparseMatrix K = assemble_stiffness(mesh);
  const std::vector<double> mass = lumped_mass_vector(mesh);

  ClassicalState state;
  state.sigma = sigma;
  state.phi0 = initial ? *initial : ScalarField::zeros(mesh);

  DensityResult density;
  std::vector<double> g =
      detail::classical_residual(mesh, K, mass, state.phi0, sigma, density);
  double gnorm = detail::norm2(g);
  state.stop_reason = "iteration-cap";

  for (int it = 1; it <= config.max_picard; ++it) {
    state.iterations = it;

    std::vector<double> step;
    try {
      step = detail::classical_newton_step(mesh, K, mass, density, sigma, g);
    } catch (const NumericalError&) {
      // A Jacobian that stops being invertible is the discrete signature of
      // leaving the solvable range, so it counts as divergence.
      state.stop_reason = "linear-solve";
      break;
    }

    // Backtracking halving on the residual norm.  A step that cannot produce
    // any decrease would repeat identically forever, so stagnation here is an
    // early form of the iteration cap.
    double scale = 1.0;
    bool accepted = false;
    ScalarField trial = state.phi0;
    for (int h = 0; h < config.line_search_max_halvings; ++h) {
      for (std::size_t a = 0; a < N; ++a) trial.values[a] = state.phi0[a] + scale * step[a];
      DensityResult trial_density;
      std::vector<double> trial_g =
          detail::classical_residual(mesh, K, mass, trial, sigma, trial_density);
      const double trial_norm = detail::norm2(trial_g);
      if (trial_norm < gnorm) {
        state.phi0 = trial;
        g = std::move(trial_g);
        gnorm = trial_norm;
        density = std::move(trial_density);
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    state.residual_history.push_back(gnorm);
    if (!accepted) {
      state.stop_reason = "stagnated";
      break;
    }

    double linf = 0.0;
    for (double v : state.phi0.values) linf = std::max(linf, std::abs(v));
    if (linf > 1e3) {
      state.stop_reason = "blow-up";
      break;
    }

    const double phi_norm = detail::norm2(state.phi0.values);
    const double change = scale * detail::norm2(step);
    const double rel = (phi_norm > 1e-14) ? change / phi_norm : change;
    if (rel <= config.picard_tol) {
      state.converged = true;
      state.stop_reason = "converged";
      break;
    }
  }

  state.n0 = density.n;
  state.fermi_star = density.fermi_level;
  return state;
}

// Classical solve over an ascending list of coupling strengths, warm-starting
// each solve from the last converged potential.  Failures are recorded in the
// output rows; the scan itself never throws on them.
inline std::vector<ThresholdRecord> threshold_scan(const Mesh& mesh,
                                                   const std::vector<double>& sigma_values,
                                                   const IterationConfig& config) {
  for (std::size_t i = 0; i + 1 < sigma_values.size(); ++i)
    if (!(sigma_values[i] < sigma_values[i + 1]))
      throw ConfigError("threshold_scan: sigma values must be strictly ascending");

  std::vector<ThresholdRecord> records;
  records.reserve(sigma_values.size());
  ScalarField warm;
  bool have_warm = false;
  for (double sigma : sigma_values) {
    const ClassicalState st =
        classical_solve(mesh, sigma, config, have_warm ? &warm : nullptr);
    ThresholdRecord rec;
    rec.sigma = sigma;
    rec.converged = st.converged;
    rec.fermi = st.fermi_star;
    for (double v : st.phi0.values) rec.max_phi = std::max(rec.max_phi, v);
    records.push_back(rec);
    if (st.converged) {
      warm = st.phi0;
      have_warm = true;
    }
  }
  return records;
}

}  // namespace bohmgrav
