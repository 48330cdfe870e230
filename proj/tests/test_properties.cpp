#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "bohmgrav/energy.hpp"
#include "bohmgrav/export.hpp"
#include "bohmgrav/fem.hpp"
#include "bohmgrav/mesh.hpp"
#include "bohmgrav/quantum.hpp"

namespace bg = bohmgrav;
using std::numbers::pi;

// Structural invariants of the discretization and its outputs.  Each test
// states a property that must hold on every mesh, not a frozen benchmark.

TEST_CASE("stiffness matrix rows sum to zero", "[properties]") {
  for (int level : {2, 3, 4}) {
    for (const bg::Mesh mesh :
         {bg::build_disk_mesh(level), bg::build_square_mesh(1 << level)}) {
      const bg::SparseMatrix K = bg::assemble_stiffness(mesh);
      const auto rowsums = K.multiply(std::vector<double>(mesh.node_count(), 1.0));
      double worst = 0.0;
      for (double v : rowsums) worst = std::max(worst, std::abs(v));
      INFO("level " << level);
      CHECK(worst <= 1e-12);
    }
  }
}

TEST_CASE("lumped mass weights sum to the mesh area", "[properties]") {
  for (int level : {2, 3, 4, 5}) {
    const bg::Mesh mesh = bg::build_disk_mesh(level);
    const auto w = bg::lumped_mass_vector(mesh);
    long double trace = 0.0L;
    for (double v : w) trace += v;
    const double area = bg::mesh_area(mesh);
    CHECK(std::abs(static_cast<double>(trace) - area) <= 1e-12 * area);
  }
  const bg::Mesh square = bg::build_square_mesh(16);
  const auto w = bg::lumped_mass_vector(square);
  long double trace = 0.0L;
  for (double v : w) trace += v;
  CHECK(std::abs(static_cast<double>(trace) - 1.0) <= 1e-12);
}

TEST_CASE("density construction is invariant under constant shifts", "[properties]") {
  const bg::Mesh mesh = bg::build_disk_mesh(3);
  const bg::ScalarField u = bg::ScalarField::sample(
      mesh, [](double x, double y) { return std::sin(2.0 * x) - 0.7 * y * y; });
  const bg::DensityResult base = bg::density_from_u(mesh, u);

  for (double shift : {5.0, 700.0, -400.0}) {
    bg::ScalarField moved = u;
    for (auto& v : moved.values) v += shift;
    const bg::DensityResult d = bg::density_from_u(mesh, moved);
    double worst = 0.0;
    for (std::size_t a = 0; a < mesh.node_count(); ++a)
      worst = std::max(worst, std::abs(d.n[a] - base.n[a]));
    INFO("shift " << shift);
    CHECK(worst <= 1e-11);
    CHECK(std::abs(d.fermi_level - (base.fermi_level - shift)) <=
          1e-10 * std::max(1.0, std::abs(shift)));
  }
}

TEST_CASE("total energy splits into its quantum and classical parts", "[properties]") {
  const bg::Mesh mesh = bg::build_disk_mesh(3);
  bg::ModelParams params;
  params.sigma = 4.0 * pi;
  const bg::ScalarField n = bg::ScalarField::sample(
      mesh, [](double x, double y) { return 0.2 + x * x + 0.5 * y * y; });
  const bg::ScalarField phi = bg::ScalarField::sample(
      mesh, [](double x, double y) { return 0.1 * (1.0 - x * x - y * y); });

  for (double eps : {1e-3, 0.05, 0.3, 1.0}) {
    params.epsilon = eps;
    const bg::EnergyReport er = bg::total_energy(mesh, n, phi, params);
    const double split = std::abs(er.total_energy - (eps * eps * er.fisher + er.free_energy));
    CHECK(split <= 1e-12 * std::max(1.0, std::abs(er.total_energy)));
  }
}

TEST_CASE("fisher information is never negative beyond rounding", "[properties]") {
  const bg::Mesh mesh = bg::build_disk_mesh(4);
  const std::vector<bg::ScalarField> densities = {
      bg::ScalarField::constant(mesh, 1.0 / pi),
      bg::ScalarField::sample(mesh, [](double x, double y) { return 0.2 + x * x + 0.5 * y * y; }),
      bg::ScalarField::sample(mesh,
                              [](double x, double y) {
                                return std::exp(-10.0 * (x * x + y * y));
                              }),
      bg::ScalarField::sample(mesh,
                              [](double x, double y) {
                                const double v = std::sin(5.0 * x) * std::cos(4.0 * y);
                                return v * v;
                              }),
  };
  for (std::size_t i = 0; i < densities.size(); ++i) {
    INFO("density " << i);
    CHECK(bg::fisher_information(mesh, densities[i]) >= -1e-12);
  }
}

TEST_CASE("exports are deterministic across independent runs", "[properties]") {
  bg::ModelParams params;
  params.epsilon = 0.1;
  params.sigma = 2.0 * pi;

  // Rebuild everything from scratch twice; all bytes must match.
  const bg::Mesh m1 = bg::build_disk_mesh(3);
  const bg::Mesh m2 = bg::build_disk_mesh(3);
  const bg::SolutionState s1 = bg::picard_fixed_point(m1, params, bg::IterationConfig{});
  const bg::SolutionState s2 = bg::picard_fixed_point(m2, params, bg::IterationConfig{});

  const std::vector<std::string> names{"u", "phi", "n"};
  CHECK(bg::csv_text(m1, names, {s1.u, s1.phi, s1.n}) ==
        bg::csv_text(m2, names, {s2.u, s2.phi, s2.n}));
  CHECK(bg::vtk_text(m1, names, {s1.u, s1.phi, s1.n}) ==
        bg::vtk_text(m2, names, {s2.u, s2.phi, s2.n}));
}
