#pragma once

// Stationary solver for the coupled quasi-potential system on a triangulated
// domain:
//
//   -(eps^2/2) lap u + u = (eps^2/4) |grad u|^2 + sigma * phi   (Neumann)
//   -lap phi = n,  phi = 0 on the boundary
//   n = alpha * exp(u),  alpha chosen so that the total mass is one.
//
// The outer driver is a damped Picard iteration on the potential: given the
// current iterate w, solve the u-equation by Newton's method, rebuild the
// normalized density, solve the Poisson problem for a fresh potential, and
// blend it into w.  For coupling strengths beyond the classical existence
// threshold the driver ramps sigma up linearly over a number of continuation
// stages, warm-starting each stage from the previous one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bohmgrav/errors.hpp"
#include "bohmgrav/fem.hpp"
#include "bohmgrav/mesh.hpp"
#include "bohmgrav/sparse.hpp"

namespace bohmgrav {

enum class InitKind { zero, bump };

// Physical parameters of one solve.
struct ModelParams {
  double epsilon = 1e-3;
  double sigma = 0.0;
  DomainKind domain_kind = DomainKind::disk;
};

// Iteration controls shared by the 2D and radial drivers.  `damping` is the
// Picard blend weight in (0, 1].  `continuation_steps` = 0 solves at the
// target sigma directly; a positive value ramps sigma linearly from zero over
// that many stages.  `newton_warm_start` exists so the warm-start invariance
// of the final state can be exercised; leaving it on is always faster.
struct IterationConfig {
  double newton_tol = 1e-10;
  double picard_tol = 1e-8;
  int max_newton = 50;
  int max_picard = 500;
  double damping = 0.5;
  int line_search_max_halvings = 30;
  InitKind init_kind = InitKind::zero;
  std::array<double, 2> bump_center{0.0, 0.0};
  double bump_amplitude = 1.0;
  double bump_width = 0.1;
  int continuation_steps = 0;
  bool newton_warm_start = true;
};

// Per-stage iteration record (one entry per continuation stage).
struct StageInfo {
  double sigma = 0.0;
  int picard_iterations = 0;
  int newton_iterations = 0;
  double final_picard_residual = 0.0;
};

// Converged solve result.  For radial solves the fields hold nodal profiles
// over the radii in `radial_r`; for 2D solves `radial_r` is empty and fields
// are nodal over the mesh.  `theta_lower`/`theta_upper` are the extreme nodal
// densities, recorded as the discrete counterpart of the analytic two-sided
// density bounds.
struct SolutionState {
  ScalarField u;
  ScalarField phi;
  ScalarField n;
  double fermi_level = 0.0;
  double alpha = 1.0;
  int picard_iterations = 0;
  int newton_iterations_total = 0;
  double final_picard_residual = 0.0;
  double theta_lower = 0.0;
  double theta_upper = 0.0;
  std::vector<StageInfo> stages;
  std::vector<double> residual_history;
  std::vector<double> radial_r;

  bool is_radial() const { return !radial_r.empty(); }
};

struct DensityResult {
  ScalarField n;
  double fermi_level = 0.0;
  double alpha = 1.0;
};

struct QuasiResult {
  ScalarField u;
  int iterations = 0;
  std::vector<double> residual_history;
};

// Residuals of the original-variable system evaluated on a converged state:
// r_a is the relative residual of the square-root-density equation, r_b the
// flux condition on the Fermi level (identically zero because the level is a
// single scalar), r_c the relative residual of the Poisson equation on the
// free rows.
struct ResidualTriple {
  double r_a = 0.0;
  double r_b = 0.0;
  double r_c = 0.0;
};

namespace detail {

inline void validate_params(const ModelParams& params) {
  if (!(params.epsilon > 0.0) || !std::isfinite(params.epsilon))
    throw ConfigError("model parameters: epsilon must be positive and finite");
  if (!std::isfinite(params.sigma)) throw ConfigError("model parameters: sigma must be finite");
}

inline void validate_iteration(const IterationConfig& config) {
  if (!(config.newton_tol > 0.0) || !(config.picard_tol > 0.0))
    throw ConfigError("iteration config: tolerances must be positive");
  if (config.max_newton < 1 || config.max_picard < 1)
    throw ConfigError("iteration config: iteration limits must be at least 1");
  if (!(config.damping > 0.0) || config.damping > 1.0)
    throw ConfigError("iteration config: damping must lie in (0, 1]");
  if (config.line_search_max_halvings < 0)
    throw ConfigError("iteration config: line_search_max_halvings must be nonnegative");
  if (!(config.bump_width > 0.0)) throw ConfigError("iteration config: bump_width must be positive");
  if (config.continuation_steps < 0)
    throw ConfigError("iteration config: continuation_steps must be nonnegative");
}

}  // namespace detail

// Normalized density, Fermi level, and normalization constant from a quasi
// potential.  The exponential is shifted by max(u) before summation, so the
// result is finite for any finite u even when exp(u) itself would overflow.
inline DensityResult density_from_u(const Mesh& mesh, const ScalarField& u) {
  validate_field(mesh, u, "density_from_u");
  const std::vector<double> w = lumped_mass_vector(mesh);

  double shift = u.values[0];
  for (double v : u.values) shift = std::max(shift, v);

  long double z = 0.0L;
  for (std::size_t a = 0; a < u.size(); ++a)
    z += static_cast<long double>(w[a]) * std::exp(u.values[a] - shift);
  if (!(z > 0.0L))
    throw NumericalError("density_from_u: exponential mass vanished");

  DensityResult out;
  const double zd = static_cast<double>(z);
  out.fermi_level = -shift - static_cast<double>(std::log(z));
  out.alpha = std::exp(out.fermi_level);
  out.n.values.resize(u.size());
  for (std::size_t a = 0; a < u.size(); ++a) out.n.values[a] = std::exp(u.values[a] - shift) / zd;
  return out;
}

namespace detail {

// Weak residual of the u-equation with lumped lower-order terms:
//   R(u) = (eps^2/2) K u + w.*u - (eps^2/4) g(u) - sigma * w.*phi
// where g collects the element-wise |grad u|^2 against lumped test functions.
inline std::vector<double> quasi_residual(const Mesh& mesh, const SparseMatrix& K,
                                          const std::vector<double>& w, const ScalarField& u,
                                          const ScalarField& phi, double epsilon, double sigma) {
  const double eps2 = epsilon * epsilon;
  std::vector<double> r = K.multiply(u.values);
  const std::vector<double> g = assemble_gradsq_load(mesh, u);
  for (std::size_t a = 0; a < r.size(); ++a) {
    r[a] = 0.5 * eps2 * r[a] + w[a] * u.values[a] - 0.25 * eps2 * g[a] -
           sigma * w[a] * phi.values[a];
  }
  return r;
}

// Newton matrix J = (eps^2/2) K + diag(w) - (eps^2/2) B(u).  The last term
// linearizes the gradient square: B[a][b] = sum over elements containing both
// nodes of (area/3) * grad u . grad lambda_b.  It is not symmetric, so the
// linear solves below take the general path.
inline SparseMatrix quasi_jacobian(const Mesh& mesh, const std::vector<double>& w,
                                   const ScalarField& u, double epsilon) {
  const double eps2 = epsilon * epsilon;
  CooBuilder coo(mesh.node_count(), mesh.node_count());
  coo.reserve(9 * mesh.triangle_count() + mesh.node_count());

  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto geom = tri_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    const double inv4a = 1.0 / (4.0 * geom.area);

    double gux = 0.0, guy = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double s = u.values[tri[c]] / (2.0 * geom.area);
      gux += s * geom.b[c];
      guy += s * geom.c[c];
    }

    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double ke = (geom.b[i] * geom.b[j] + geom.c[i] * geom.c[j]) * inv4a;
        const double be =
            (geom.area / 3.0) * (gux * geom.b[j] + guy * geom.c[j]) / (2.0 * geom.area);
        coo.add(tri[i], tri[j], 0.5 * eps2 * (ke - be));
      }
    }
  }
  for (std::size_t a = 0; a < mesh.node_count(); ++a) coo.add(a, a, w[a]);
  return coo.compress();
}

}  // namespace detail

// Newton solve of the u-equation for a fixed potential.  Convergence is
// declared when the residual norm falls below newton_tol times the larger of
// the initial residual and the load scale ||sigma * w .* phi||; the two
// coincide for a zero start, and the load scale keeps the target meaningful
// when the start is already nearly converged.  When both scales are below
// 1e-14 the tolerance is absolute.  Steps are halved until the residual norm
// decreases.
inline QuasiResult solve_quasi_potential(const Mesh& mesh, const ScalarField& phi,
                                         const ModelParams& params, const IterationConfig& config,
                                         const ScalarField& u_init) {
  detail::validate_params(params);
  detail::validate_iteration(config);
  validate_field(mesh, phi, "solve_quasi_potential phi");
  validate_field(mesh, u_init, "solve_quasi_potential u_init");

  const SparseMatrix K = assemble_stiffness(mesh);
  const std::vector<double> w = lumped_mass_vector(mesh);

  QuasiResult out;
  out.u = u_init;

  std::vector<double> r =
      detail::quasi_residual(mesh, K, w, out.u, phi, params.epsilon, params.sigma);
  double rnorm = detail::norm2(r);

  std::vector<double> load(phi.size());
  for (std::size_t a = 0; a < phi.size(); ++a) load[a] = params.sigma * w[a] * phi.values[a];
  const double scale = std::max(rnorm, detail::norm2(load));
  const double target = (scale < 1e-14) ? config.newton_tol : config.newton_tol * scale;

  out.residual_history.push_back(rnorm);

  while (rnorm > target) {
    if (!std::isfinite(rnorm))
      throw NumericalError("solve_quasi_potential: residual became non-finite");
    if (out.iterations >= config.max_newton)
      throw NonConvergenceError("solve_quasi_potential: Newton limit reached",
                                out.residual_history);

    const SparseMatrix J = detail::quasi_jacobian(mesh, w, out.u, params.epsilon);
    std::vector<double> rhs(r.size());
    for (std::size_t a = 0; a < r.size(); ++a) rhs[a] = -r[a];
    const std::vector<double> delta = solve_linear(J, rhs, /*symmetric=*/false, 1e-10);

    // Backtracking line search on the residual norm.
    double step = 1.0;
    bool accepted = false;
    ScalarField u_try;
    for (int h = 0; h <= config.line_search_max_halvings; ++h) {
      u_try.values.assign(out.u.size(), 0.0);
      for (std::size_t a = 0; a < out.u.size(); ++a)
        u_try.values[a] = out.u.values[a] + step * delta[a];
      std::vector<double> r_try =
          detail::quasi_residual(mesh, K, w, u_try, phi, params.epsilon, params.sigma);
      const double rn_try = detail::norm2(r_try);
      if (std::isfinite(rn_try) && rn_try < rnorm) {
        out.u = std::move(u_try);
        r = std::move(r_try);
        rnorm = rn_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      throw NonConvergenceError("solve_quasi_potential: line search stagnated",
                                out.residual_history);

    ++out.iterations;
    out.residual_history.push_back(rnorm);
  }
  return out;
}

namespace detail {

// One shared context for the Picard loop: assembled operators and the
// Dirichlet-eliminated Poisson matrix (assembled once, reused every solve).
struct PicardWorkspace {
  SparseMatrix K;
  SparseMatrix K_dirichlet;
  std::vector<double> w;
  std::vector<std::size_t> bnodes;

  explicit PicardWorkspace(const Mesh& mesh)
      : K(assemble_stiffness(mesh)), w(lumped_mass_vector(mesh)), bnodes(boundary_nodes(mesh)) {
    K_dirichlet = K;
    std::vector<double> dummy(mesh.node_count(), 0.0);
    apply_dirichlet(K_dirichlet, dummy, bnodes, 0.0);
  }

  // Poisson solve K phi = w .* n with zero boundary values.  CG, warm-started
  // from the previous potential when available.
  ScalarField poisson(const ScalarField& n, const ScalarField* guess) const {
    std::vector<double> rhs(n.size());
    for (std::size_t a = 0; a < n.size(); ++a) rhs[a] = w[a] * n.values[a];
    for (std::size_t b : bnodes) rhs[b] = 0.0;
    const std::vector<double>* g = guess ? &guess->values : nullptr;
    return ScalarField(solve_linear(K_dirichlet, rhs, /*symmetric=*/true, 1e-12, g));
  }
};

// Initial potential per init_kind: the zero kind starts from the potential of
// the uniform density, the bump kind from the potential of a normalized
// Gaussian at bump_center scaled by bump_amplitude.
inline ScalarField initial_potential(const Mesh& mesh, const PicardWorkspace& ws,
                                     const IterationConfig& config) {
  if (config.init_kind == InitKind::zero) {
    const double inv_area = 1.0 / mesh_area(mesh);
    return ws.poisson(ScalarField::constant(mesh, inv_area), nullptr);
  }
  const double cx = config.bump_center[0];
  const double cy = config.bump_center[1];
  const double s2 = config.bump_width * config.bump_width;
  ScalarField g = ScalarField::sample(mesh, [&](double x, double y) {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
  });
  const double mass = integrate(mesh, g);
  if (!(mass > 0.0)) throw NumericalError("initial_potential: bump mass vanished");
  for (double& v : g.values) v *= config.bump_amplitude / mass;
  return ws.poisson(g, nullptr);
}

}  // namespace detail

// Damped Picard iteration for the coupled system.  Each outer step solves the
// u-equation against the current potential iterate, renormalizes the density,
// solves the Poisson problem, and blends the fresh potential into the iterate
// with weight `damping`.  Convergence is measured by the relative change of
// the potential iterate (absolute when its norm is below 1e-14, as happens
// for sigma = 0 only in degenerate geometries).  With continuation_steps > 0
// the target sigma is approached through equally spaced stages, each started
// from the previous stage's state.
//
// Intermediate stages exist only to seed the next stage, so they stop at the
// relaxed tolerance sqrt(picard_tol) and may exhaust their iteration budget
// without failing the solve.  That matters because a ramp to sigma > 8*pi
// passes through the classical existence threshold, where the fixed-point map
// is barely contractive (measured change ratios ~0.997 per step); demanding
// full tolerance there stalls the whole ramp even though the target-sigma
// stage converges quickly.  Only the final stage enforces picard_tol.
//
// The returned potential is the last undamped Poisson solution, so the
// reported state satisfies the discrete Poisson equation to the tolerance of
// the linear solver rather than to the Picard tolerance.
// An optional previous state warm-starts both the potential iterate and the
// Newton start, which sweeps over nearby parameters use to chain solves.
inline SolutionState picard_fixed_point(const Mesh& mesh, const ModelParams& params,
                                        const IterationConfig& config,
                                        const SolutionState* warm = nullptr) {
  detail::validate_params(params);
  detail::validate_iteration(config);
  if (warm) {
    validate_field(mesh, warm->phi, "picard_fixed_point warm phi");
    validate_field(mesh, warm->u, "picard_fixed_point warm u");
  }

  const detail::PicardWorkspace ws(mesh);

  SolutionState state;
  state.u = warm ? warm->u : ScalarField::zeros(mesh);
  ScalarField w_iter = warm ? warm->phi : detail::initial_potential(mesh, ws, config);
  ScalarField phi_tilde = w_iter;

  const int stages = std::max(1, config.continuation_steps);
  for (int stage = 1; stage <= stages; ++stage) {
    const bool final_stage = (stage == stages);
    const double sigma_stage =
        (config.continuation_steps > 0) ? params.sigma * stage / stages : params.sigma;
    const double stage_tol =
        final_stage ? config.picard_tol : std::max(config.picard_tol, std::sqrt(config.picard_tol));
    ModelParams stage_params = params;
    stage_params.sigma = sigma_stage;

    StageInfo info;
    info.sigma = sigma_stage;

    bool converged = false;
    for (int k = 1; k <= config.max_picard; ++k) {
      const ScalarField u_start =
          config.newton_warm_start ? state.u : ScalarField::zeros(mesh);
      QuasiResult inner = solve_quasi_potential(mesh, w_iter, stage_params, config, u_start);
      state.u = std::move(inner.u);
      info.newton_iterations += inner.iterations;

      DensityResult dens = density_from_u(mesh, state.u);
      state.n = std::move(dens.n);
      state.fermi_level = dens.fermi_level;
      state.alpha = dens.alpha;

      phi_tilde = ws.poisson(state.n, &phi_tilde);

      long double diff2 = 0.0L, norm2 = 0.0L;
      for (std::size_t a = 0; a < w_iter.size(); ++a) {
        const double next = (1.0 - config.damping) * w_iter.values[a] +
                            config.damping * phi_tilde.values[a];
        const double d = next - w_iter.values[a];
        diff2 += static_cast<long double>(d) * d;
        norm2 += static_cast<long double>(next) * next;
        w_iter.values[a] = next;
      }
      const double diff = static_cast<double>(std::sqrt(diff2));
      const double wnorm = static_cast<double>(std::sqrt(norm2));
      const double res = (wnorm < 1e-14) ? diff : diff / wnorm;
      if (!std::isfinite(res))
        throw NumericalError("picard_fixed_point: iterate became non-finite");

      info.picard_iterations = k;
      info.final_picard_residual = res;
      state.residual_history.push_back(res);

      if (res <= stage_tol) {
        converged = true;
        break;
      }
    }

    state.picard_iterations += info.picard_iterations;
    state.newton_iterations_total += info.newton_iterations;
    state.final_picard_residual = info.final_picard_residual;
    state.stages.push_back(info);

    if (!converged && final_stage)
      throw NonConvergenceError("picard_fixed_point: Picard limit reached at sigma = " +
                                    std::to_string(sigma_stage),
                                state.residual_history);
  }

  state.phi = phi_tilde;
  state.theta_lower = *std::min_element(state.n.values.begin(), state.n.values.end());
  state.theta_upper = *std::max_element(state.n.values.begin(), state.n.values.end());
  return state;
}

namespace detail {

// Residual triple of a 2D state; see ResidualTriple.  The first equation is
// checked in its square-root-density form, whose nodal vector is
// eps^2 K s + w .* (log n - sigma phi - F) .* s with s = sqrt(n).
inline ResidualTriple residual_triple_fem2d(const SolutionState& state, const ModelParams& params,
                                            const Mesh& mesh) {
  const SparseMatrix K = assemble_stiffness(mesh);
  const std::vector<double> w = lumped_mass_vector(mesh);
  const double eps2 = params.epsilon * params.epsilon;

  std::vector<double> s(state.n.size());
  for (std::size_t a = 0; a < s.size(); ++a) s[a] = std::sqrt(state.n.values[a]);

  std::vector<double> ra_vec = K.multiply(s);
  for (std::size_t a = 0; a < s.size(); ++a) {
    const double coeff = std::log(state.n.values[a]) - params.sigma * state.phi.values[a] -
                         state.fermi_level;
    ra_vec[a] = eps2 * ra_vec[a] + w[a] * coeff * s[a];
  }

  ResidualTriple out;
  out.r_a = norm2(ra_vec) / norm2(s);

  std::vector<double> rc_vec = K.multiply(state.phi.values);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t a = 0; a < rc_vec.size(); ++a) {
    if (mesh.node_on_boundary[a]) continue;
    const double load = w[a] * state.n.values[a];
    const double d = rc_vec[a] - load;
    num += static_cast<long double>(d) * d;
    den += static_cast<long double>(load) * load;
  }
  out.r_c = (den > 0.0L) ? static_cast<double>(std::sqrt(num / den))
                         : static_cast<double>(std::sqrt(num));
  return out;
}

}  // namespace detail

}  // namespace bohmgrav
