#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "bohmgrav/classical.hpp"
#include "bohmgrav/config.hpp"
#include "bohmgrav/energy.hpp"
#include "bohmgrav/errors.hpp"
#include "bohmgrav/export.hpp"
#include "bohmgrav/manifest.hpp"
#include "bohmgrav/quantum.hpp"
#include "bohmgrav/radial.hpp"
#include "bohmgrav/sweep.hpp"

namespace bohmgrav {

enum class SweepKind { epsilon, sigma };

namespace detail {

// Claims a fresh run directory <output_dir>/<command>-NNN.  create_directory
// only succeeds for the caller that makes the directory, so two concurrent
// runs can never share one.
inline std::filesystem::path make_run_dir(const std::string& output_dir,
                                          const std::string& command) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + output_dir + "': " + ec.message());
  for (int i = 1; i < 100000; ++i) {
    char suffix[8];
    std::snprintf(suffix, sizeof(suffix), "-%03d", i);
    const fs::path dir = fs::path(output_dir) / (command + suffix);
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw IoError("cannot create run directory '" + dir.string() + "': " + ec.message());
  }
  throw IoError("run directory namespace exhausted under '" + output_dir + "'");
}

inline Mesh build_run_mesh(DomainKind domain, int level) {
  if (domain == DomainKind::disk) return build_disk_mesh(level);
  return build_square_mesh(1 << level);
}

// Accumulates manifest result entries with consistent number formatting.
struct ResultBuilder {
  ResultEntries entries;

  void add(std::string key, const std::string& value) {
    entries.emplace_back(std::move(key), value);
  }
  void add(std::string key, double value) { entries.emplace_back(std::move(key), format_g17(value)); }
  void add(std::string key, int value) { entries.emplace_back(std::move(key), std::to_string(value)); }
  void add(std::string key, std::size_t value) {
    entries.emplace_back(std::move(key), std::to_string(value));
  }
  void add_flag(std::string key, bool value) {
    entries.emplace_back(std::move(key), value ? "true" : "false");
  }
  void add_history(std::string key, const std::vector<double>& history) {
    std::string joined;
    for (std::size_t i = 0; i < history.size(); ++i) {
      if (i) joined += ',';
      joined += format_g17(history[i]);
    }
    entries.emplace_back(std::move(key), joined);
  }
};

inline void add_environment_entries(ResultBuilder& rb, double wall_seconds) {
  rb.add("wall_seconds", wall_seconds);
  const char* seed = std::getenv("BOHMGRAV_SEED");
  // The solver is deterministic; the seed is recorded for provenance only.
  rb.add("seed", seed ? std::string(seed) : std::string("unset"));
}

inline void add_stage_entries(ResultBuilder& rb, const std::vector<StageInfo>& stages) {
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const std::string p = "stage." + std::to_string(k + 1) + ".";
    rb.add(p + "sigma", stages[k].sigma);
    rb.add(p + "picard_iterations", stages[k].picard_iterations);
    rb.add(p + "newton_iterations", stages[k].newton_iterations);
    rb.add(p + "final_residual", stages[k].final_picard_residual);
  }
}

// Energy diagnostics on the radial grid, mirroring total_energy on meshes.
// Gradient terms use face fluxes, integrals use the trapezoid weights.
inline EnergyReport radial_energy(const SolutionState& state, const ModelParams& params) {
  const RadialGrid grid = make_radial_grid(state.radial_r);
  const std::size_t n = grid.size();
  constexpr double two_pi = 6.283185307179586476925286766559;

  long double fisher = 0.0L, phi_h1 = 0.0L;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = grid.r[i + 1] - grid.r[i];
    const double a = state.n.values[i], b = state.n.values[i + 1];
    if (a < 0.0 || b < 0.0) throw NumericalError("radial_energy: negative density");
    const double ds = std::sqrt(b) - std::sqrt(a);
    const double dphi = state.phi.values[i + 1] - state.phi.values[i];
    fisher += static_cast<long double>(two_pi * grid.face[i]) * ds * ds / h;
    phi_h1 += static_cast<long double>(two_pi * grid.face[i]) * dphi * dphi / h;
  }

  long double free = 0.0L, mass = 0.0L;
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    shift = std::max(shift, params.sigma * state.phi.values[i]);
  long double z = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const double ni = state.n.values[i];
    const double entropy = ni > 0.0 ? ni * (std::log(std::max(ni, 1e-300)) - 1.0) : 0.0;
    free += static_cast<long double>(grid.trap[i]) *
            (entropy - 0.5 * params.sigma * ni * state.phi.values[i]);
    mass += static_cast<long double>(grid.trap[i]) * ni;
    z += static_cast<long double>(grid.trap[i]) *
         std::exp(params.sigma * state.phi.values[i] - shift);
  }

  EnergyReport report;
  report.fisher = static_cast<double>(fisher);
  report.free_energy = static_cast<double>(free);
  report.total_energy = params.epsilon * params.epsilon * report.fisher + report.free_energy;
  report.moser_g = 0.5 * params.sigma * static_cast<double>(phi_h1) -
                   (shift + std::log(static_cast<double>(z))) - 1.0;
  report.mass = static_cast<double>(mass);
  return report;
}

inline void add_energy_entries(ResultBuilder& rb, const EnergyReport& er) {
  rb.add("energy.fisher", er.fisher);
  rb.add("energy.free", er.free_energy);
  rb.add("energy.total", er.total_energy);
  rb.add("energy.moser_g", er.moser_g);
  rb.add("energy.mass", er.mass);
}

// The invariant checks every successful solve must satisfy, recorded with
// their measured values so a manifest documents the evidence.
inline bool add_invariant_entries(ResultBuilder& rb, const SolutionState& state,
                                  const EnergyReport& er, double epsilon) {
  const double mass_err = std::abs(er.mass - 1.0);
  const bool mass_ok = mass_err <= 1e-10;
  double min_n = state.n.values.empty() ? 0.0 : state.n.values[0];
  for (double v : state.n.values) min_n = std::min(min_n, v);
  const bool positive = min_n > 0.0;
  const double decomposition =
      std::abs(er.total_energy - (epsilon * epsilon * er.fisher + er.free_energy));
  const bool decomposition_ok = decomposition <= 1e-12 * std::max(1.0, std::abs(er.total_energy));

  rb.add("check.mass.value", mass_err);
  rb.add_flag("check.mass.pass", mass_ok);
  rb.add("check.positivity.value", min_n);
  rb.add_flag("check.positivity.pass", positive);
  rb.add("check.energy_identity.value", decomposition);
  rb.add_flag("check.energy_identity.pass", decomposition_ok);
  return mass_ok && positive && decomposition_ok;
}

// One bump-seeded solve at fixed coupling.  Continuation is disabled because
// its early stages flatten the seed back toward the symmetric branch.
inline SolutionState solve_from_bump(const Mesh& mesh, const ModelParams& params,
                                     IterationConfig iteration, std::array<double, 2> center) {
  iteration.init_kind = InitKind::bump;
  iteration.bump_center = center;
  iteration.continuation_steps = 0;
  return picard_fixed_point(mesh, params, iteration);
}

struct BranchPair {
  SolutionState first, second;
  bool first_ok = false, second_ok = false;
  double fermi_gap = 0.0;
  double density_l1_gap = 0.0;
  std::array<double, 2> peak_first{}, peak_second{};
};

inline std::array<double, 2> density_peak(const Mesh& mesh, const ScalarField& n) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < n.size(); ++a)
    if (n[a] > n[best]) best = a;
  return mesh.nodes[best];
}

// Runs the two bump-seeded solves that probe branch multiplicity and measures
// how far apart the resulting states are.
inline BranchPair run_branch_pair(const Mesh& mesh, const ModelParams& params,
                                  const IterationConfig& iteration, std::array<double, 2> c1,
                                  std::array<double, 2> c2) {
  BranchPair pair;
  try {
    pair.first = solve_from_bump(mesh, params, iteration, c1);
    pair.first_ok = true;
  } catch (const NonConvergenceError&) {
  }
  try {
    pair.second = solve_from_bump(mesh, params, iteration, c2);
    pair.second_ok = true;
  } catch (const NonConvergenceError&) {
  }
  if (!pair.first_ok || !pair.second_ok) return pair;

  pair.fermi_gap = std::abs(pair.first.fermi_level - pair.second.fermi_level);
  const auto w = lumped_mass_vector(mesh);
  long double l1 = 0.0L;
  for (std::size_t a = 0; a < mesh.node_count(); ++a)
    l1 += static_cast<long double>(w[a]) * std::abs(pair.first.n[a] - pair.second.n[a]);
  pair.density_l1_gap = static_cast<double>(l1);
  pair.peak_first = density_peak(mesh, pair.first.n);
  pair.peak_second = density_peak(mesh, pair.second.n);
  return pair;
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// Solve the coupled system per the configuration and write fields plus a run
// manifest into a fresh run directory.  Returns the process exit code: 0 on
// success, 2 when the iteration hits its budget (the manifest then carries
// the residual history).
inline int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.mode == RunMode::radial && cfg.export_vtk)
    throw ConfigError("vtk export requires mode = fem2d (it writes the triangulation)");

  const auto dir = detail::make_run_dir(cfg.output_dir, "solve");
  out << "run directory: " << dir.string() << "\n";

  Mesh mesh;
  if (cfg.mode == RunMode::fem2d)
    mesh = detail::build_run_mesh(cfg.params.domain_kind, cfg.mesh_level);

  SolutionState state;
  try {
    state = cfg.mode == RunMode::fem2d
                ? picard_fixed_point(mesh, cfg.params, cfg.iteration)
                : radial_solve(cfg.params, cfg.radial_points, cfg.iteration);
  } catch (const NonConvergenceError& e) {
    detail::ResultBuilder rb;
    rb.add_flag("converged", false);
    rb.add("error", std::string(e.what()));
    rb.add("residual_count", e.residual_history.size());
    rb.add_history("residual_history", e.residual_history);
    detail::add_environment_entries(rb, detail::elapsed_seconds(t0));
    write_manifest((dir / "manifest.txt").string(), "solve", cfg, rb.entries);
    out << "solve did not converge: " << e.what() << "\n";
    return 2;
  }

  const ResidualTriple res = residual_original_system(state, cfg.params, mesh);
  const EnergyReport er = cfg.mode == RunMode::fem2d
                              ? total_energy(mesh, state.n, state.phi, cfg.params)
                              : detail::radial_energy(state, cfg.params);

  const std::vector<std::string> names{"u", "phi", "n"};
  const std::vector<ScalarField> fields{state.u, state.phi, state.n};
  if (cfg.mode == RunMode::radial) {
    if (cfg.export_csv)
      export_radial_csv((dir / "fields.csv").string(), state.radial_r, names, fields);
  } else {
    if (cfg.export_csv) export_fields_csv((dir / "fields.csv").string(), mesh, names, fields);
    if (cfg.export_vtk) export_fields_vtk((dir / "fields.vtk").string(), mesh, names, fields);
  }

  detail::ResultBuilder rb;
  rb.add_flag("converged", true);
  rb.add("fermi_level", state.fermi_level);
  rb.add("alpha", state.alpha);
  rb.add("theta_lower", state.theta_lower);
  rb.add("theta_upper", state.theta_upper);
  rb.add("picard_iterations", state.picard_iterations);
  rb.add("newton_iterations", state.newton_iterations_total);
  rb.add("final_picard_residual", state.final_picard_residual);
  rb.add("residual.r_a", res.r_a);
  rb.add("residual.r_b", res.r_b);
  rb.add("residual.r_c", res.r_c);
  detail::add_energy_entries(rb, er);
  const bool invariants = detail::add_invariant_entries(rb, state, er, cfg.params.epsilon);
  detail::add_stage_entries(rb, state.stages);
  detail::add_environment_entries(rb, detail::elapsed_seconds(t0));
  write_manifest((dir / "manifest.txt").string(), "solve", cfg, rb.entries);

  out << "fermi level F = " << format_g17(state.fermi_level) << "\n";
  out << "total energy  = " << format_g17(er.total_energy) << "\n";
  out << "residuals     = " << format_g17(res.r_a) << " / " << format_g17(res.r_b) << " / "
      << format_g17(res.r_c) << "\n";
  if (!invariants) out << "warning: an invariant check failed; see the manifest\n";
  return 0;
}

// Solve the zero-dispersion classical problem.  Non-convergence is reported
// through the exit code rather than an exception because above the existence
// threshold it is the expected physical answer.
inline int cmd_classical(const RunConfig& cfg, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.mode != RunMode::fem2d)
    throw ConfigError("classical: only mode = fem2d is supported");

  const auto dir = detail::make_run_dir(cfg.output_dir, "classical");
  out << "run directory: " << dir.string() << "\n";

  const Mesh mesh = detail::build_run_mesh(cfg.params.domain_kind, cfg.mesh_level);
  const ClassicalState cs = classical_solve(mesh, cfg.params.sigma, cfg.iteration);

  const std::vector<std::string> names{"phi", "n"};
  const std::vector<ScalarField> fields{cs.phi0, cs.n0};
  if (cfg.export_csv) export_fields_csv((dir / "fields.csv").string(), mesh, names, fields);
  if (cfg.export_vtk) export_fields_vtk((dir / "fields.vtk").string(), mesh, names, fields);

  double max_phi = 0.0;
  for (double v : cs.phi0.values) max_phi = std::max(max_phi, std::abs(v));

  detail::ResultBuilder rb;
  rb.add_flag("converged", cs.converged);
  rb.add("stop_reason", cs.stop_reason);
  rb.add("iterations", cs.iterations);
  rb.add("fermi_star", cs.fermi_star);
  rb.add("max_phi", max_phi);
  if (!cs.residual_history.empty()) {
    rb.add("final_residual", cs.residual_history.back());
    rb.add_history("residual_history", cs.residual_history);
  }
  detail::add_environment_entries(rb, detail::elapsed_seconds(t0));
  write_manifest((dir / "manifest.txt").string(), "classical", cfg, rb.entries);

  out << (cs.converged ? "converged" : "did not converge (" + cs.stop_reason + ")") << "\n";
  out << "fermi level F* = " << format_g17(cs.fermi_star) << "\n";
  return cs.converged ? 0 : 2;
}

// Solve twice from bump seeds at mirrored centers and report how far apart
// the two states land.  Distinct density profiles with matching Fermi levels
// are the multiplicity signature this command exists to expose.
inline int cmd_nonuniq(const RunConfig& cfg, std::array<double, 2> c1, std::array<double, 2> c2,
                       std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.mode != RunMode::fem2d || cfg.params.domain_kind != DomainKind::disk)
    throw ConfigError("nonuniq: requires mode = fem2d on the disk");
  for (const auto& c : {c1, c2})
    if (!(std::hypot(c[0], c[1]) < 1.0))
      throw ConfigError("nonuniq: bump centers must lie strictly inside the unit disk");

  const auto dir = detail::make_run_dir(cfg.output_dir, "nonuniq");
  out << "run directory: " << dir.string() << "\n";

  const Mesh mesh = detail::build_run_mesh(cfg.params.domain_kind, cfg.mesh_level);
  const auto pair = detail::run_branch_pair(mesh, cfg.params, cfg.iteration, c1, c2);

  detail::ResultBuilder rb;
  rb.add("center_1.x", c1[0]);
  rb.add("center_1.y", c1[1]);
  rb.add("center_2.x", c2[0]);
  rb.add("center_2.y", c2[1]);
  rb.add_flag("converged_1", pair.first_ok);
  rb.add_flag("converged_2", pair.second_ok);

  if (!pair.first_ok || !pair.second_ok) {
    detail::add_environment_entries(rb, detail::elapsed_seconds(t0));
    write_manifest((dir / "manifest.txt").string(), "nonuniq", cfg, rb.entries);
    out << "a bump-seeded solve did not converge\n";
    return 2;
  }

  const std::vector<std::string> names{"u", "phi", "n"};
  if (cfg.export_csv) {
    export_fields_csv((dir / "fields1.csv").string(), mesh, names,
                      {pair.first.u, pair.first.phi, pair.first.n});
    export_fields_csv((dir / "fields2.csv").string(), mesh, names,
                      {pair.second.u, pair.second.phi, pair.second.n});
  }
  if (cfg.export_vtk) {
    export_fields_vtk((dir / "fields1.vtk").string(), mesh, names,
                      {pair.first.u, pair.first.phi, pair.first.n});
    export_fields_vtk((dir / "fields2.vtk").string(), mesh, names,
                      {pair.second.u, pair.second.phi, pair.second.n});
  }

  rb.add("fermi_1", pair.first.fermi_level);
  rb.add("fermi_2", pair.second.fermi_level);
  rb.add("fermi_gap", pair.fermi_gap);
  rb.add("density_l1_gap", pair.density_l1_gap);
  rb.add("peak_1.x", pair.peak_first[0]);
  rb.add("peak_1.y", pair.peak_first[1]);
  rb.add("peak_2.x", pair.peak_second[0]);
  rb.add("peak_2.y", pair.peak_second[1]);
  rb.add("iterations_1", pair.first.picard_iterations);
  rb.add("iterations_2", pair.second.picard_iterations);
  detail::add_environment_entries(rb, detail::elapsed_seconds(t0));
  write_manifest((dir / "manifest.txt").string(), "nonuniq", cfg, rb.entries);

  out << "fermi gap      = " << format_g17(pair.fermi_gap) << "\n";
  out << "density L1 gap = " << format_g17(pair.density_l1_gap) << "\n";
  return 0;
}

// Parameter sweep: either the semiclassical limit over descending epsilon or
// a classical threshold scan over ascending sigma.  Each row of sweep.csv is
// one solve; the command succeeds if at least one converged.
inline int cmd_sweep(const RunConfig& cfg, SweepKind kind, const std::vector<double>& values,
                     std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (values.empty()) throw ConfigError("sweep: need at least one value");
  if (cfg.mode != RunMode::fem2d)
    throw ConfigError("sweep: only mode = fem2d is supported");

  const auto dir = detail::make_run_dir(cfg.output_dir, "sweep");
  out << "run directory: " << dir.string() << "\n";

  const Mesh mesh = detail::build_run_mesh(cfg.params.domain_kind, cfg.mesh_level);
  detail::ResultBuilder rb;
  std::string csv;
  std::size_t converged_count = 0;

  if (kind == SweepKind::epsilon) {
    const SweepRecord rec = epsilon_sweep(mesh, cfg.params.sigma, values, cfg.iteration);
    csv = "epsilon,converged,fermi_level,u_phi_gap,phi_gap,fisher,free_energy,total_energy\n";
    for (const auto& e : rec.entries) {
      converged_count += e.converged ? 1 : 0;
      csv += format_g17(e.epsilon);
      csv += e.converged ? ",1," : ",0,";
      csv += format_g17(e.fermi_level) + "," + format_g17(e.u_phi_gap) + "," +
             format_g17(e.phi_gap) + "," + format_g17(e.fisher) + "," +
             format_g17(e.free_energy) + "," + format_g17(e.total_energy) + "\n";
    }
    rb.add("kind", std::string("epsilon"));
    rb.add("classical.fermi", rec.classical_fermi);
    rb.add("classical.fisher", rec.classical_fisher);
    rb.add("classical.free", rec.classical_free_energy);
  } else {
    const auto records = threshold_scan(mesh, values, cfg.iteration);
    csv = "sigma,converged,max_phi,fermi\n";
    for (const auto& r : records) {
      converged_count += r.converged ? 1 : 0;
      csv += format_g17(r.sigma);
      csv += r.converged ? ",1," : ",0,";
      csv += format_g17(r.max_phi) + "," + format_g17(r.fermi) + "\n";
    }
    rb.add("kind", std::string("sigma"));
  }

  detail::write_text_file((dir / "sweep.csv").string(), csv);
  rb.add("entries", values.size());
  rb.add("converged_count", converged_count);
  detail::add_environment_entries(rb, detail::elapsed_seconds(t0));
  write_manifest((dir / "manifest.txt").string(), "sweep", cfg, rb.entries);

  out << "converged " << converged_count << " of " << values.size() << " runs\n";
  return converged_count > 0 ? 0 : 2;
}

// Maps exceptions from a command body to the documented process exit codes.
template <typename Fn>
int guarded_command(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  } catch (const NonConvergenceError& e) {
    err << "no convergence: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return 4;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace bohmgrav
