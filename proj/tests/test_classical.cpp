// Classical solver tests.  The closed-form Liouville solution is first
// validated by substituting it into the PDE with finite differences; only
// then is it trusted as the oracle for the discrete solver.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "bohmgrav/classical.hpp"

namespace bg = bohmgrav;
using std::numbers::pi;

TEST_CASE("closed form satisfies the classical PDE", "[classical]") {
  // Radial Laplacian phi'' + phi'/r by central differences, compared with
  // -alpha exp(sigma phi).  Step 1e-4 balances truncation against rounding;
  // both sit far below the 1e-6 gate.
  const double h = 1e-4;
  for (double sigma : {2 * pi, 4 * pi, 6 * pi, 7.9 * pi}) {
    const double alpha = std::exp(bg::liouville_exact(sigma, 0.0).fermi);
    double worst = 0.0;
    for (int i = 1; i <= 17; ++i) {
      const double r = 0.05 * i + 0.05;
      const double fm = bg::liouville_exact(sigma, r - h).phi;
      const double f0 = bg::liouville_exact(sigma, r).phi;
      const double fp = bg::liouville_exact(sigma, r + h).phi;
      const double lap = (fp - 2 * f0 + fm) / (h * h) + (fp - fm) / (2 * h * r);
      worst = std::max(worst, std::abs(lap + alpha * std::exp(sigma * f0)));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("closed form limits and fixed values", "[classical]") {
  // sigma -> 0 degenerates to the uniform-load Poisson solution.
  CHECK(bg::liouville_exact(0.0, 0.0).phi == Catch::Approx(1.0 / (4 * pi)).margin(1e-15));
  CHECK(bg::liouville_exact(1e-12, 0.0).phi ==
        Catch::Approx(1.0 / (4 * pi)).epsilon(1e-9));
  CHECK(bg::liouville_exact(1e-12, 0.5).phi ==
        Catch::Approx(0.75 / (4 * pi)).epsilon(1e-9));

  // sigma = 4 pi: mu = 1, center value log2/(2 pi), normalization -log(2 pi).
  const auto p = bg::liouville_exact(4 * pi, 0.0);
  CHECK(p.phi == Catch::Approx(std::log(2.0) / (2 * pi)).margin(1e-14));
  CHECK(p.fermi == Catch::Approx(-std::log(2 * pi)).margin(1e-14));
  CHECK(bg::liouville_exact(4 * pi, 1.0).phi == Catch::Approx(0.0).margin(1e-14));

  CHECK_THROWS_AS(bg::liouville_exact(8 * pi, 0.5), bg::ConfigError);
  CHECK_THROWS_AS(bg::liouville_exact(9 * pi, 0.5), bg::ConfigError);
  CHECK_THROWS_AS(bg::liouville_exact(-1.0, 0.5), bg::ConfigError);
  CHECK_THROWS_AS(bg::liouville_exact(pi, 1.5), bg::ConfigError);
}

TEST_CASE("uncoupled classical solve is the uniform-load Poisson problem", "[classical]") {
  const bg::Mesh mesh = bg::build_disk_mesh(4);
  const bg::IterationConfig config;
  const bg::ClassicalState st = bg::classical_solve(mesh, 0.0, config);

  REQUIRE(st.converged);
  CHECK(st.iterations <= 3);
  const double area = bg::mesh_area(mesh);
  CHECK(st.fermi_star == Catch::Approx(-std::log(area)).margin(1e-12));
  for (double v : st.n0.values) CHECK(v == Catch::Approx(1.0 / area).epsilon(1e-12));
  CHECK(bg::integrate(mesh, st.n0) == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("classical solve matches the closed form at sigma 4 pi", "[classical]") {
  const bg::Mesh mesh = bg::build_disk_mesh(5);
  const bg::IterationConfig config;
  const bg::ClassicalState st = bg::classical_solve(mesh, 4 * pi, config);

  REQUIRE(st.converged);
  const std::size_t center = bg::nearest_node(mesh, 0.0, 0.0);
  const double exact = std::log(2.0) / (2 * pi);
  CHECK(std::abs(st.phi0[center] - exact) / exact < 0.01);
  CHECK(std::abs(st.fermi_star + std::log(2 * pi)) < 0.02);

  // State invariants: unit mass, nodal density identity, self-consistency of
  // the discrete Poisson relation on free rows.
  CHECK(bg::integrate(mesh, st.n0) == Catch::Approx(1.0).margin(1e-10));
  const double alpha = std::exp(st.fermi_star);
  for (std::size_t a = 0; a < mesh.node_count(); ++a)
    CHECK(st.n0[a] == Catch::Approx(alpha * std::exp(4 * pi * st.phi0[a])).epsilon(1e-10));

  const bg::SparseMatrix K = bg::assemble_stiffness(mesh);
  const std::vector<double> m = bg::lumped_mass_vector(mesh);
  const std::vector<double> Kphi = K.multiply(st.phi0.values);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    if (mesh.node_on_boundary[a]) continue;
    const double r = Kphi[a] - m[a] * st.n0[a];
    num += static_cast<long double>(r) * r;
    den += static_cast<long double>(m[a] * st.n0[a]) * (m[a] * st.n0[a]);
  }
  CHECK(std::sqrt(static_cast<double>(num / den)) < 1e-8);
}

TEST_CASE("classical solve converges at second order to the closed form", "[classical]") {
  // Relative max-norm error of the potential against the exact radial
  // solution, halving the mesh size per level.
  for (double sigma : {2 * pi, 4 * pi, 6 * pi}) {
    double prev = 0.0;
    for (int level : {3, 4, 5, 6}) {
      const bg::Mesh mesh = bg::build_disk_mesh(level);
      const bg::ClassicalState st = bg::classical_solve(mesh, sigma, bg::IterationConfig{});
      REQUIRE(st.converged);
      double err = 0.0, scale = 0.0;
      for (std::size_t a = 0; a < mesh.node_count(); ++a) {
        const double r = std::hypot(mesh.nodes[a][0], mesh.nodes[a][1]);
        const double exact = bg::liouville_exact(sigma, std::min(r, 1.0)).phi;
        err = std::max(err, std::abs(st.phi0[a] - exact));
        scale = std::max(scale, std::abs(exact));
      }
      err /= scale;
      if (prev > 0.0) {
        const double rate = std::log2(prev / err);
        CHECK(rate > 1.5);
        CHECK(rate < 2.5);
      }
      prev = err;
    }
  }
}

TEST_CASE("supercritical classical solve reports failure", "[classical]") {
  const bg::Mesh mesh = bg::build_disk_mesh(4);
  const bg::IterationConfig config;
  const bg::ClassicalState st = bg::classical_solve(mesh, 9 * pi, config);
  CHECK_FALSE(st.converged);
  CHECK_FALSE(st.residual_history.empty());
  CHECK(st.stop_reason != "converged");
}

TEST_CASE("threshold scan brackets the critical coupling", "[classical]") {
  const bg::Mesh mesh = bg::build_disk_mesh(4);
  const bg::IterationConfig config;

  const auto rows = bg::threshold_scan(mesh, {0.0, 2 * pi, 4 * pi, 6 * pi, 7.5 * pi, 9 * pi},
                                       config);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(rows[i].converged);
    if (i > 0) CHECK(rows[i].max_phi > rows[i - 1].max_phi);
  }
  CHECK_FALSE(rows[5].converged);

  // The sigma = 0 row is the Poisson solution with peak near 1/(4 pi).
  CHECK(std::abs(rows[0].max_phi - 1.0 / (4 * pi)) < 1e-3);

  CHECK_THROWS_AS(bg::threshold_scan(mesh, {4 * pi, 2 * pi}, config), bg::ConfigError);
}
