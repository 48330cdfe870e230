#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "bohmgrav/cli.hpp"

namespace bohmgrav {

// Outcome of one verification criterion.  `detail` carries the measured
// numbers so a failure names what moved, and `seconds` is compared against
// the per-criterion runtime budget.
struct CriterionResult {
  int index = 0;
  std::string name;
  bool pass = false;
  bool skipped = false;
  double seconds = 0.0;
  std::string detail;
};

namespace detail {

// Collects labeled pass/fail observations into a single line.
struct CheckList {
  bool ok = true;
  std::string text;

  void note(const std::string& label, double value, bool cond) {
    ok = ok && cond;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    if (!text.empty()) text += ", ";
    text += label + "=" + buf + (cond ? "" : " FAIL");
  }
  void note_flag(const std::string& label, bool cond) {
    ok = ok && cond;
    if (!text.empty()) text += ", ";
    text += label + "=" + (cond ? "yes" : "no FAIL");
  }
};

template <typename Fn>
CriterionResult run_criterion(int index, const std::string& name, double budget_seconds,
                              Fn&& body) {
  CriterionResult r;
  r.index = index;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  CheckList checks;
  try {
    body(checks);
    r.pass = checks.ok;
    r.detail = checks.text;
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = checks.text + (checks.text.empty() ? "" : ", ") + "exception: " + e.what();
  }
  r.seconds = elapsed_seconds(t0);
  if (r.seconds > budget_seconds) r.pass = false;
  char buf[64];
  std::snprintf(buf, sizeof(buf), " [%.1fs/%.0fs]", r.seconds, budget_seconds);
  r.detail += buf;
  return r;
}

// Discrete L2 error of the lumped-load Poisson solve on the unit square for
// the exact solution sin(pi x) sin(pi y).
inline double verify_poisson_error(int n) {
  using std::numbers::pi;
  const Mesh mesh = build_square_mesh(n);
  SparseMatrix K = assemble_stiffness(mesh);
  const auto w = lumped_mass_vector(mesh);
  std::vector<double> rhs(mesh.node_count());
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    const double x = mesh.nodes[a][0], y = mesh.nodes[a][1];
    rhs[a] = w[a] * 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
  }
  apply_dirichlet(K, rhs, boundary_nodes(mesh), 0.0);
  const auto phi = solve_linear(K, rhs, true, 1e-12);
  ScalarField err = ScalarField::zeros(mesh);
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    const double x = mesh.nodes[a][0], y = mesh.nodes[a][1];
    err[a] = phi[a] - std::sin(pi * x) * std::sin(pi * y);
  }
  return norms(mesh, err).l2;
}

// Discrete L2 error of the quasi-potential Newton solve on the unit square
// against the manufactured solution cos(pi x) cos(pi y) at epsilon = sigma = 1.
inline double verify_quasi_error(int n) {
  using std::numbers::pi;
  const Mesh mesh = build_square_mesh(n);
  const ScalarField phi = ScalarField::sample(mesh, [](double x, double y) {
    const double cc = std::cos(pi * x) * std::cos(pi * y);
    const double sx = std::sin(pi * x), sy = std::sin(pi * y);
    const double cx = std::cos(pi * x), cy = std::cos(pi * y);
    const double grad2 = pi * pi * (sx * sx * cy * cy + cx * cx * sy * sy);
    return (pi * pi + 1.0) * cc - 0.25 * grad2;
  });
  ModelParams params;
  params.epsilon = 1.0;
  params.sigma = 1.0;
  const IterationConfig config;
  const auto result = solve_quasi_potential(mesh, phi, params, config, ScalarField::zeros(mesh));
  ScalarField err = result.u;
  for (std::size_t a = 0; a < mesh.node_count(); ++a)
    err.values[a] -= std::cos(pi * mesh.nodes[a][0]) * std::cos(pi * mesh.nodes[a][1]);
  return norms(mesh, err).l2;
}

inline void rate_window(CheckList& c, const std::string& label, const std::vector<double>& errors,
                        double lo, double hi) {
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    const double rate = std::log2(errors[i] / errors[i + 1]);
    c.note(label + std::to_string(i), rate, rate > lo && rate < hi);
  }
}

}  // namespace detail

// Runs the verification suite.  Every criterion is self-contained and pins
// its tolerances in code.  When `quick` is set the long radial run (criterion
// 5) is skipped and marked as such.
inline std::vector<CriterionResult> run_verification(bool quick) {
  using detail::CheckList;
  using detail::run_criterion;
  using std::numbers::pi;
  std::vector<CriterionResult> out;

  out.push_back(run_criterion(1, "uniform-coupling ground truth", 10.0, [](CheckList& c) {
    const Mesh mesh = build_disk_mesh(5);
    ModelParams params;
    params.epsilon = 1e-3;
    params.sigma = 0.0;
    const SolutionState st = picard_fixed_point(mesh, params, IterationConfig{});
    const double area = mesh_area(mesh);
    c.note("fermi_err", std::abs(st.fermi_level + std::log(area)),
           std::abs(st.fermi_level + std::log(area)) <= 1e-12);
    c.note("area_err", std::abs(area - pi), std::abs(area - pi) <= 1e-3);
    const double center = st.phi[nearest_node(mesh, 0.0, 0.0)];
    const double gap = std::abs(center - 1.0 / (4.0 * pi));
    c.note("center_err", gap, gap <= 1e-3);
  }));

  out.push_back(run_criterion(2, "manufactured convergence rates", 60.0, [](CheckList& c) {
    std::vector<double> pe, qe;
    for (int n : {8, 16, 32, 64}) {
      pe.push_back(detail::verify_poisson_error(n));
      qe.push_back(detail::verify_quasi_error(n));
    }
    detail::rate_window(c, "poisson_rate", pe, 1.8, 2.2);
    detail::rate_window(c, "quasi_rate", qe, 1.7, 2.2);
  }));

  out.push_back(run_criterion(3, "classical closed-form benchmark", 30.0, [](CheckList& c) {
    const Mesh mesh = build_disk_mesh(5);
    const ClassicalState cs = classical_solve(mesh, 4.0 * pi, IterationConfig{});
    c.note_flag("converged", cs.converged);
    const double exact_center = std::log(2.0) / (2.0 * pi);
    const double rel = std::abs(cs.phi0[nearest_node(mesh, 0.0, 0.0)] - exact_center) / exact_center;
    c.note("center_rel_err", rel, rel < 0.01);
    const double fermi_err = std::abs(cs.fermi_star + std::log(2.0 * pi));
    c.note("fermi_err", fermi_err, fermi_err < 0.02);
  }));

  out.push_back(run_criterion(4, "classical existence threshold scan", 120.0, [](CheckList& c) {
    const Mesh mesh = build_disk_mesh(4);
    const std::vector<double> sigmas{2.0 * pi, 4.0 * pi, 6.0 * pi, 7.5 * pi, 9.0 * pi};
    const auto records = threshold_scan(mesh, sigmas, IterationConfig{});
    for (std::size_t i = 0; i + 1 < records.size(); ++i)
      c.note_flag("sub_" + std::to_string(i), records[i].converged);
    c.note_flag("super_diverges", !records.back().converged);
  }));

  if (quick) {
    CriterionResult r;
    r.index = 5;
    r.name = "deep radial supercritical run";
    r.skipped = true;
    r.pass = true;
    r.detail = "skipped in quick mode";
    out.push_back(r);
  } else {
    out.push_back(run_criterion(5, "deep radial supercritical run", 600.0, [](CheckList& c) {
      ModelParams params;
      params.epsilon = 1e-3;
      params.sigma = 10.0 * pi;
      IterationConfig it;
      it.continuation_steps = 10;
      const SolutionState st = radial_solve(params, 100000, it);
      c.note_flag("converged", st.final_picard_residual <= it.picard_tol);
      const double gap = std::abs(st.fermi_level - (-20.188));
      c.note("fermi_gap", gap, gap <= 1.0);
    }));
  }

  out.push_back(run_criterion(6, "supercritical 2d continuation run", 300.0, [](CheckList& c) {
    const Mesh mesh = build_disk_mesh(5);
    ModelParams params;
    params.epsilon = 0.05;
    params.sigma = 10.0 * pi;
    IterationConfig it;
    it.continuation_steps = 10;
    const SolutionState st = picard_fixed_point(mesh, params, it);
    c.note_flag("converged", st.final_picard_residual <= it.picard_tol);
    const double mass_err = std::abs(integrate(mesh, st.n) - 1.0);
    c.note("mass_err", mass_err, mass_err <= 1e-10);
    double min_n = st.n[0];
    for (double v : st.n.values) min_n = std::min(min_n, v);
    c.note("min_density", min_n, min_n > 0.0);
    const ResidualTriple res = residual_original_system(st, params, mesh);
    c.note("r_a", res.r_a, res.r_a <= 1e-4);
    c.note("r_c", res.r_c, res.r_c <= 1e-8);
    const ClassicalState cs = classical_solve(mesh, params.sigma, IterationConfig{});
    c.note_flag("classical_fails", !cs.converged);
  }));

  out.push_back(run_criterion(7, "semiclassical sweep ordering", 300.0, [](CheckList& c) {
    const Mesh mesh = build_disk_mesh(5);
    const std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
    const SweepRecord rec = epsilon_sweep(mesh, 4.0 * pi, eps, IterationConfig{});
    bool all = true, decreasing = true, bounded = true;
    for (std::size_t i = 0; i < rec.entries.size(); ++i) {
      all = all && rec.entries[i].converged;
      bounded = bounded && rec.entries[i].fisher <= rec.classical_fisher + 1e-6;
      if (i + 1 < rec.entries.size())
        decreasing = decreasing && rec.entries[i + 1].u_phi_gap < rec.entries[i].u_phi_gap;
    }
    c.note_flag("all_converged", all);
    c.note_flag("gap_decreasing", decreasing);
    c.note_flag("fisher_bounded", bounded);
    const double fermi_err = std::abs(rec.entries.back().fermi_level + std::log(2.0 * pi));
    c.note("fermi_err", fermi_err, fermi_err < 0.05);
  }));

  out.push_back(run_criterion(8, "two-bump branch separation", 600.0, [](CheckList& c) {
    const Mesh mesh = build_disk_mesh(4);
    ModelParams params;
    params.epsilon = 0.05;
    params.sigma = 10.0 * pi;
    const auto pair =
        detail::run_branch_pair(mesh, params, IterationConfig{}, {0.3, 0.0}, {-0.3, 0.0});
    c.note_flag("both_converged", pair.first_ok && pair.second_ok);
    if (!pair.first_ok || !pair.second_ok) return;
    c.note("fermi_gap", pair.fermi_gap, pair.fermi_gap < 1e-3);
    c.note("density_l1_gap", pair.density_l1_gap, pair.density_l1_gap > 0.5);
    const double d1 = std::hypot(pair.peak_first[0] - 0.3, pair.peak_first[1]);
    const double d2 = std::hypot(pair.peak_second[0] + 0.3, pair.peak_second[1]);
    c.note("peak_offset_1", d1, d1 <= 0.15);
    c.note("peak_offset_2", d2, d2 <= 0.15);
  }));

  out.push_back(run_criterion(9, "uniqueness threshold constants", 1.0, [](CheckList& c) {
    const ThresholdReport t2 = uniqueness_threshold(2, 0.1, 1.0, 1.0);
    const double mu2_err = std::abs(t2.mu_d - 8.0 * pi);
    c.note("mu2_err", mu2_err, mu2_err <= 1e-12);
    // 2 (4 pi)^(2/3) 3^(1/3) = 15.591108...; the reference is that value
    // rounded to three decimals.
    const ThresholdReport t3 = uniqueness_threshold(3, 0.1, 1.0, 1.0);
    const double mu3_err = std::abs(t3.mu_d - 15.591);
    c.note("mu3_err", mu3_err, mu3_err <= 1e-3);
    const double smax_err = std::abs(t2.sigma_max - 25.3828);
    c.note("sigma_max_err", smax_err, smax_err <= 1e-3);
  }));

  out.push_back(run_criterion(10, "discrete invariant battery", 60.0, [](CheckList& c) {
    const Mesh mesh = build_disk_mesh(4);
    const SparseMatrix K = assemble_stiffness(mesh);
    const auto rowsums = K.multiply(std::vector<double>(mesh.node_count(), 1.0));
    double worst_row = 0.0;
    for (double v : rowsums) worst_row = std::max(worst_row, std::abs(v));
    c.note("stiffness_rowsum", worst_row, worst_row <= 1e-12);

    const auto w = lumped_mass_vector(mesh);
    long double trace = 0.0L;
    for (double v : w) trace += v;
    const double area = mesh_area(mesh);
    const double trace_err = std::abs(static_cast<double>(trace) - area);
    c.note("mass_trace_err", trace_err, trace_err <= 1e-12 * area);

    const ScalarField u = ScalarField::sample(
        mesh, [](double x, double y) { return std::sin(3.0 * x) + 0.5 * std::cos(2.0 * y); });
    ScalarField shifted = u;
    for (auto& v : shifted.values) v += 700.0;
    const DensityResult d1 = density_from_u(mesh, u);
    const DensityResult d2 = density_from_u(mesh, shifted);
    double gauge = 0.0;
    for (std::size_t a = 0; a < mesh.node_count(); ++a)
      gauge = std::max(gauge, std::abs(d1.n[a] - d2.n[a]));
    c.note("gauge_density", gauge, gauge <= 1e-11);
    const double fermi_shift = std::abs(d2.fermi_level - (d1.fermi_level - 700.0));
    c.note("gauge_fermi", fermi_shift, fermi_shift <= 1e-10 * 700.0);

    ModelParams params;
    params.epsilon = 0.3;
    params.sigma = 4.0 * pi;
    const ScalarField n_test = ScalarField::sample(
        mesh, [](double x, double y) { return 0.2 + x * x + 0.5 * y * y; });
    const ScalarField phi_test =
        ScalarField::sample(mesh, [](double x, double y) { return (1.0 - x * x - y * y) * 0.1; });
    const EnergyReport er = total_energy(mesh, n_test, phi_test, params);
    const double split = std::abs(
        er.total_energy - (params.epsilon * params.epsilon * er.fisher + er.free_energy));
    c.note("energy_split", split, split <= 1e-12 * std::max(1.0, std::abs(er.total_energy)));

    // A constant density has zero Fisher information; the assembled quadratic
    // form can land a rounding error below zero, so the gate allows that much.
    const double f_const = fisher_information(
        mesh, ScalarField::sample(mesh, [](double, double) { return 1.0 / 3.14; }));
    const double f_poly = fisher_information(mesh, n_test);
    const double f_bump = fisher_information(
        mesh, ScalarField::sample(
                  mesh, [](double x, double y) { return std::exp(-10.0 * (x * x + y * y)); }));
    c.note("fisher_const", f_const, f_const >= -1e-12);
    c.note("fisher_poly", f_poly, f_poly >= -1e-12);
    c.note("fisher_bump", f_bump, f_bump >= -1e-12);

    ModelParams run_params;
    run_params.epsilon = 0.1;
    run_params.sigma = 2.0 * pi;
    const Mesh m1 = build_disk_mesh(3);
    const Mesh m2 = build_disk_mesh(3);
    const SolutionState s1 = picard_fixed_point(m1, run_params, IterationConfig{});
    const SolutionState s2 = picard_fixed_point(m2, run_params, IterationConfig{});
    const std::vector<std::string> names{"u", "phi", "n"};
    const bool same_csv = csv_text(m1, names, {s1.u, s1.phi, s1.n}) ==
                          csv_text(m2, names, {s2.u, s2.phi, s2.n});
    const bool same_vtk = vtk_text(m1, names, {s1.u, s1.phi, s1.n}) ==
                          vtk_text(m2, names, {s2.u, s2.phi, s2.n});
    c.note_flag("csv_deterministic", same_csv);
    c.note_flag("vtk_deterministic", same_vtk);
  }));

  return out;
}

// Prints one line per criterion and returns the process exit code: 0 when
// every executed criterion passed, 1 otherwise.
inline int cmd_verify(bool quick, std::ostream& out) {
  const auto results = run_verification(quick);
  bool all = true;
  std::string failed;
  for (const auto& r : results) {
    char head[80];
    std::snprintf(head, sizeof(head), "criterion %2d %-36s", r.index, r.name.c_str());
    out << head << (r.skipped ? "SKIP" : r.pass ? "PASS" : "FAIL") << "  " << r.detail << "\n";
    if (!r.skipped && !r.pass) {
      all = false;
      if (!failed.empty()) failed += ", ";
      failed += std::to_string(r.index) + " (" + r.name + ")";
    }
  }
  if (!all) out << "FAILED criteria: " << failed << "\n";
  return all ? 0 : 1;
}

}  // namespace bohmgrav
