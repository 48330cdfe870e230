#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bohmgrav/fem.hpp"
#include "bohmgrav/mesh.hpp"

using namespace bohmgrav;
using Catch::Approx;

namespace {

Mesh reference_triangle() {
  Mesh m;
  m.domain = DomainKind::square;
  m.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  m.triangles = {{0, 1, 2}};
  m.node_on_boundary = {1, 1, 1};
  validate_mesh(m);
  return m;
}

SparseMatrix tiny_matrix(const std::vector<std::vector<double>>& dense) {
  CooBuilder coo(dense.size(), dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i)
    for (std::size_t j = 0; j < dense.size(); ++j)
      if (dense[i][j] != 0.0) coo.add(i, j, dense[i][j]);
  return coo.compress();
}

double relative_residual(const SparseMatrix& A, const std::vector<double>& x,
                         const std::vector<double>& b) {
  const auto ax = A.multiply(x);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < b.size(); ++i) {
    num += (b[i] - ax[i]) * (b[i] - ax[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(static_cast<double>(num / den));
}

// Discrete L2 error of the lumped-load Poisson solve against sin(pi x)sin(pi y).
double poisson_manufactured_error(int n) {
  const Mesh mesh = build_square_mesh(n);
  SparseMatrix K = assemble_stiffness(mesh);
  const auto w = lumped_mass_vector(mesh);

  std::vector<double> rhs(mesh.node_count());
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    const double x = mesh.nodes[a][0], y = mesh.nodes[a][1];
    rhs[a] = w[a] * 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
  }
  apply_dirichlet(K, rhs, boundary_nodes(mesh), 0.0);
  const auto phi = solve_linear(K, rhs, true, 1e-12);

  ScalarField err = ScalarField::zeros(mesh);
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    const double x = mesh.nodes[a][0], y = mesh.nodes[a][1];
    err[a] = phi[a] - std::sin(M_PI * x) * std::sin(M_PI * y);
  }
  return norms(mesh, err).l2;
}

}  // namespace

TEST_CASE("reference triangle stiffness and mass matrices", "[fem]") {
  const Mesh m = reference_triangle();

  const SparseMatrix K = assemble_stiffness(m);
  const double expected_K[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      REQUIRE(K.entry(i, j) == Approx(expected_K[i][j]).margin(1e-14));

  const SparseMatrix Ml = assemble_mass(m, true);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(Ml.entry(i, i) == Approx(1.0 / 6.0).margin(1e-15));
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) REQUIRE(Ml.entry(i, j) == 0.0);
  }

  // Consistent mass: (area/12) * [[2,1,1],[1,2,1],[1,1,2]] with area 1/2.
  const SparseMatrix Mc = assemble_mass(m, false);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      REQUIRE(Mc.entry(i, j) == Approx((i == j ? 2.0 : 1.0) / 24.0).margin(1e-15));
}

TEST_CASE("stiffness rows sum to zero and the matrix is symmetric", "[fem]") {
  for (const Mesh& mesh :
       {build_disk_mesh(3), build_square_mesh(8), refine_marked(build_disk_mesh(2), {1, 2, 8})}) {
    const SparseMatrix K = assemble_stiffness(mesh);
    const auto ones = std::vector<double>(mesh.node_count(), 1.0);
    for (double rs : K.multiply(ones)) REQUIRE(std::abs(rs) < 1e-12);
    for (std::size_t i = 0; i < K.rows; ++i)
      for (std::size_t k = K.row_offsets[i]; k < K.row_offsets[i + 1]; ++k)
        REQUIRE(std::abs(K.values[k] - K.entry(K.col_indices[k], i)) < 1e-14);
  }
}

TEST_CASE("mass matrices integrate the constant function to the mesh area", "[fem]") {
  for (const Mesh& mesh : {build_disk_mesh(3), build_square_mesh(6)}) {
    const double area = mesh_area(mesh);
    for (bool lumped : {true, false}) {
      const SparseMatrix M = assemble_mass(mesh, lumped);
      long double total = 0.0L;
      for (double v : M.values) total += v;
      REQUIRE(std::abs(static_cast<double>(total) - area) < 1e-12);
    }
  }
}

TEST_CASE("gradient-square load vanishes for constants and is exact for linears", "[fem]") {
  const Mesh mesh = build_square_mesh(2);

  const auto zero_load = assemble_gradsq_load(mesh, ScalarField::constant(mesh, 3.7));
  for (double v : zero_load) REQUIRE(std::abs(v) < 1e-15);

  // |grad x|^2 = 1, so the load equals the lumped quadrature weights.
  const auto linear_load =
      assemble_gradsq_load(mesh, ScalarField::sample(mesh, [](double x, double) { return x; }));
  const auto w = lumped_mass_vector(mesh);
  for (std::size_t a = 0; a < mesh.node_count(); ++a)
    REQUIRE(linear_load[a] == Approx(w[a]).margin(1e-14));
}

TEST_CASE("gradient-square load of x^2 converges to 4/3", "[fem]") {
  double prev_err = -1.0;
  for (int n : {4, 8, 16, 32}) {
    const Mesh mesh = build_square_mesh(n);
    const auto load =
        assemble_gradsq_load(mesh, ScalarField::sample(mesh, [](double x, double) { return x * x; }));
    long double total = 0.0L;
    for (double v : load) total += v;
    const double err = std::abs(static_cast<double>(total) - 4.0 / 3.0);
    if (prev_err > 0.0) REQUIRE(err < prev_err / 2.5);
    prev_err = err;
  }
  REQUIRE(prev_err < 2e-3);
}

TEST_CASE("Dirichlet elimination is symmetric and exact on a hand example", "[fem]") {
  // Path-graph stiffness; constrain the endpoints to zero.  The surviving
  // interior equation is 2u = 1, so u = 1/2 (hand Schur complement).
  SparseMatrix A = tiny_matrix({{1, -1, 0}, {-1, 2, -1}, {0, -1, 1}});
  std::vector<double> rhs = {0.0, 1.0, 0.0};
  apply_dirichlet(A, rhs, {0, 2}, 0.0);

  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      REQUIRE(std::abs(A.entry(i, j) - A.entry(j, i)) < 1e-15);

  const auto x = solve_linear(A, rhs, true, 1e-12);
  REQUIRE(x[0] == Approx(0.0).margin(1e-13));
  REQUIRE(x[1] == Approx(0.5).margin(1e-13));
  REQUIRE(x[2] == Approx(0.0).margin(1e-13));
}

TEST_CASE("Dirichlet elimination with nonzero value moves data to the rhs", "[fem]") {
  SparseMatrix A = tiny_matrix({{2, -1, 0}, {-1, 2, -1}, {0, -1, 2}});
  std::vector<double> rhs = {0.0, 0.0, 0.0};
  apply_dirichlet(A, rhs, {0}, 3.0);
  REQUIRE(rhs[0] == 3.0);
  REQUIRE(rhs[1] == Approx(3.0).margin(1e-15));  // -(-1)*3
  const auto x = solve_linear(A, rhs, true, 1e-12);
  REQUIRE(x[0] == Approx(3.0).margin(1e-12));
}

TEST_CASE("empty constraint set leaves the system untouched", "[fem]") {
  SparseMatrix A = tiny_matrix({{2, 1}, {1, 3}});
  const SparseMatrix before = A;
  std::vector<double> rhs = {1.0, 2.0};
  apply_dirichlet(A, rhs, {}, 0.0);
  REQUIRE(A.values == before.values);
  REQUIRE(A.col_indices == before.col_indices);
  REQUIRE(rhs == std::vector<double>{1.0, 2.0});
}

TEST_CASE("solve_linear solves the 2x2 example on both paths", "[fem]") {
  const SparseMatrix A = tiny_matrix({{2, 1}, {1, 3}});
  const std::vector<double> b = {1.0, 2.0};
  for (bool symmetric : {true, false}) {
    const auto x = solve_linear(A, b, symmetric, 1e-12);
    REQUIRE(x[0] == Approx(0.2).margin(1e-12));
    REQUIRE(x[1] == Approx(0.6).margin(1e-12));
  }
}

TEST_CASE("solve_linear returns zero for zero rhs and rejects singular systems", "[fem]") {
  const SparseMatrix A = tiny_matrix({{2, 1}, {1, 3}});
  for (bool symmetric : {true, false}) {
    const auto x = solve_linear(A, std::vector<double>{0.0, 0.0}, symmetric);
    REQUIRE(x == std::vector<double>{0.0, 0.0});
  }

  const SparseMatrix S = tiny_matrix({{1, 1}, {1, 1}});
  const std::vector<double> b = {1.0, 0.0};
  for (bool symmetric : {true, false})
    REQUIRE_THROWS_AS(solve_linear(S, b, symmetric), NumericalError);
}

TEST_CASE("Poisson solve on the square meets the requested residual", "[fem]") {
  const Mesh mesh = build_square_mesh(16);
  SparseMatrix K = assemble_stiffness(mesh);
  std::vector<double> rhs = lumped_mass_vector(mesh);  // f = 1 tested with lumped quadrature
  apply_dirichlet(K, rhs, boundary_nodes(mesh), 0.0);
  const auto phi = solve_linear(K, rhs, true, 1e-10);
  REQUIRE(relative_residual(K, phi, rhs) <= 1e-10);
  for (std::size_t a = 0; a < mesh.node_count(); ++a)
    if (!mesh.node_on_boundary[a]) REQUIRE(phi[a] > 0.0);
}

TEST_CASE("integrate uses lumped quadrature", "[fem]") {
  REQUIRE(integrate(build_disk_mesh(0), ScalarField::constant(build_disk_mesh(0), 1.0)) ==
          Approx(2.598076211353316).margin(1e-13));

  const Mesh sq = build_square_mesh(4);
  REQUIRE(integrate(sq, ScalarField::constant(sq, 1.0)) == Approx(1.0).margin(1e-15));
  REQUIRE(integrate(sq, ScalarField::sample(sq, [](double x, double) { return x; })) ==
          Approx(0.5).margin(1e-14));
}

TEST_CASE("norms of simple fields", "[fem]") {
  const Mesh sq = build_square_mesh(8);

  const auto c = norms(sq, ScalarField::constant(sq, -2.0));
  REQUIRE(c.l1 == Approx(2.0).margin(1e-13));
  REQUIRE(c.l2 == Approx(2.0).margin(1e-13));
  REQUIRE(c.linf == 2.0);
  REQUIRE(c.h1_semi < 1e-12);

  const auto fx = norms(sq, ScalarField::sample(sq, [](double x, double) { return x; }));
  REQUIRE(fx.h1_semi == Approx(1.0).margin(1e-13));
  REQUIRE(fx.linf == 1.0);

  // Lumped-quadrature L2 of x tends to 1/sqrt(3).
  double prev_err = -1.0;
  for (int n : {4, 8, 16, 32}) {
    const Mesh m = build_square_mesh(n);
    const double l2 = norms(m, ScalarField::sample(m, [](double x, double) { return x; })).l2;
    const double err = std::abs(l2 - 1.0 / std::sqrt(3.0));
    if (prev_err > 0.0) REQUIRE(err < prev_err / 2.5);
    prev_err = err;
  }
}

TEST_CASE("manufactured Poisson problem converges at second order", "[fem]") {
  std::vector<double> errs;
  for (int n : {8, 16, 32, 64}) errs.push_back(poisson_manufactured_error(n));
  for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
    const double rate = std::log2(errs[k] / errs[k + 1]);
    REQUIRE(rate >= 1.8);
    REQUIRE(rate <= 2.2);
  }
}

TEST_CASE("fields are validated", "[fem]") {
  const Mesh mesh = build_square_mesh(2);
  ScalarField f = ScalarField::zeros(mesh);
  f.values.pop_back();
  REQUIRE_THROWS_AS(integrate(mesh, f), NumericalError);

  ScalarField g = ScalarField::zeros(mesh);
  g[0] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(assemble_gradsq_load(mesh, g), NumericalError);
}
