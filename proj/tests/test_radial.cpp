// Radial reduction tests: the pivoting tridiagonal solver, finite-volume grid
// geometry, exactness of the radial Poisson discretization, and agreement of
// the radial driver with both closed-form limits and the 2D solver.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "bohmgrav/quantum.hpp"
#include "bohmgrav/radial.hpp"

namespace bg = bohmgrav;
using std::numbers::pi;

TEST_CASE("tridiagonal solver matches a dense factorization", "[radial]") {
  std::mt19937 rng(20240811u);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);

  for (int n : {1, 2, 3, 5, 17, 40}) {
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n);
      Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        diag[i] = coef(rng);
        // Force row swaps on some rows by shrinking the pivot candidate.
        if (trial % 2 == 1 && i % 3 == 0) diag[i] *= 1e-12;
        dense(i, i) = diag[i];
        if (i > 0) {
          lower[i] = coef(rng);
          dense(i, i - 1) = lower[i];
        }
        if (i + 1 < n) {
          upper[i] = coef(rng);
          dense(i, i + 1) = upper[i];
        }
        rhs[i] = coef(rng);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
      if (lu.rank() < n) continue;
      const Eigen::VectorXd expect =
          lu.solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), n));

      const std::vector<double> got = bg::detail::solve_tridiag(lower, diag, upper, rhs);
      const double scale = expect.lpNorm<Eigen::Infinity>();
      for (int i = 0; i < n; ++i)
        CHECK(std::abs(got[static_cast<std::size_t>(i)] - expect(i)) <=
              1e-9 * std::max(1.0, scale));
    }
  }

  // Structurally singular system: second row is zero.
  CHECK_THROWS_AS(bg::detail::solve_tridiag({0.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}),
                  bg::NumericalError);
}

TEST_CASE("radial grid geometry", "[radial]") {
  for (double power : {1.0, 2.0}) {
    const bg::RadialGrid g = bg::make_radial_grid(129, power);
    REQUIRE(g.size() == 129);
    CHECK(g.r.front() == 0.0);
    CHECK(g.r.back() == 1.0);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      CHECK(g.r[i] < g.r[i + 1]);
      CHECK(g.face[i] == Catch::Approx(0.5 * (g.r[i] + g.r[i + 1])).margin(1e-15));
    }
    // Cell volumes telescope to the half-squared radius of the disk and the
    // trapezoid weights to its area, independent of grading.
    long double vsum = 0.0L, tsum = 0.0L;
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(g.vol[i] > 0.0);
      vsum += g.vol[i];
      tsum += g.trap[i];
    }
    CHECK(static_cast<double>(vsum) == Catch::Approx(0.5).margin(1e-14));
    CHECK(static_cast<double>(tsum) == Catch::Approx(pi).margin(1e-13));
  }

  CHECK_THROWS_AS(bg::make_radial_grid(1), bg::ConfigError);
  CHECK_THROWS_AS(bg::make_radial_grid(std::vector<double>{0.0, 0.3, 0.2, 1.0}),
                  bg::ConfigError);
  CHECK_THROWS_AS(bg::make_radial_grid(std::vector<double>{0.1, 0.5, 1.0}), bg::ConfigError);
}

TEST_CASE("uncoupled radial solve reproduces the parabolic potential", "[radial]") {
  // With sigma = 0 the density is uniform and the potential is exactly
  // (1 - r^2)/(4 pi); the flux form integrates quadratics without error, so
  // the discrete solution matches to rounding on uniform and graded grids.
  for (double eps : {0.1, 1e-3}) {
    bg::ModelParams params;
    params.epsilon = eps;
    params.sigma = 0.0;
    const bg::IterationConfig config;

    const bg::SolutionState st = bg::radial_solve(params, 512, config);
    REQUIRE(st.is_radial());
    REQUIRE(st.radial_r.size() == 512);
    CHECK(st.picard_iterations <= 2);
    CHECK(std::abs(st.fermi_level + std::log(pi)) < 1e-12);
    for (double v : st.u.values) CHECK(std::abs(v) < 1e-12);
    for (std::size_t i = 0; i < st.radial_r.size(); ++i) {
      const double exact = (1.0 - st.radial_r[i] * st.radial_r[i]) / (4 * pi);
      CHECK(std::abs(st.phi[i] - exact) < 1e-11);
    }

    const bg::RadialGrid g = bg::make_radial_grid(
        std::vector<double>(st.radial_r.begin(), st.radial_r.end()));
    long double mass = 0.0L;
    for (std::size_t i = 0; i < g.size(); ++i) mass += g.trap[i] * st.n[i];
    CHECK(static_cast<double>(mass) == Catch::Approx(1.0).margin(1e-12));

    const auto rt = bg::residual_original_system(st, params, bg::Mesh{});
    CHECK(rt.r_a < 1e-8);
    CHECK(rt.r_c < 1e-8);
  }
}

TEST_CASE("radial state at sigma 4 pi approaches the classical level", "[radial]") {
  bg::ModelParams params;
  params.epsilon = 0.01;
  params.sigma = 4 * pi;
  const bg::IterationConfig config;

  const bg::SolutionState st = bg::radial_solve(params, 4096, config);
  CHECK(std::abs(st.fermi_level + std::log(2 * pi)) < 0.02);
  CHECK(st.theta_lower > 0.0);
  CHECK(st.theta_upper > st.theta_lower);

  const auto rt = bg::residual_original_system(st, params, bg::Mesh{});
  CHECK(rt.r_a < 1e-6);
  CHECK(rt.r_c < 1e-8);
}

TEST_CASE("radial and 2D solvers agree on the disk", "[radial]") {
  bg::ModelParams params;
  params.epsilon = 0.1;
  params.sigma = 4 * pi;
  const bg::IterationConfig config;

  const bg::SolutionState rad = bg::radial_solve(params, 1024, config);
  const bg::Mesh mesh = bg::build_disk_mesh(5);
  const bg::SolutionState two_d = bg::picard_fixed_point(mesh, params, config);

  CHECK(std::abs(rad.fermi_level - two_d.fermi_level) < 0.05);

  // The center density is the upper bound in both discretizations.
  const std::size_t center = bg::nearest_node(mesh, 0.0, 0.0);
  CHECK(std::abs(rad.n[0] - two_d.n[center]) < 0.05 * rad.n[0]);
}

TEST_CASE("supercritical radial solve with continuation", "[radial]") {
  bg::ModelParams params;
  params.epsilon = 1e-3;
  params.sigma = 10 * pi;
  bg::IterationConfig config;
  config.continuation_steps = 10;

  const bg::SolutionState st = bg::radial_solve(params, 20000, config);
  CHECK(st.stages.size() == 10);
  CHECK(st.stages.back().sigma == Catch::Approx(10 * pi).margin(1e-12));
  CHECK(std::abs(st.fermi_level + 20.188) < 1.0);
  CHECK(st.theta_lower > 0.0);
  CHECK(st.final_picard_residual <= config.picard_tol);
}

TEST_CASE("radial solver input validation", "[radial]") {
  bg::ModelParams params;
  const bg::IterationConfig config;

  CHECK_THROWS_AS(bg::radial_solve(params, 63, config), bg::ConfigError);
  params.domain_kind = bg::DomainKind::square;
  CHECK_THROWS_AS(bg::radial_solve(params, 512, config), bg::ConfigError);
}
