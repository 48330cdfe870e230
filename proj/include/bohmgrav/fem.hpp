#pragma once

// P1 finite element kernels: stiffness/mass assembly, lumped-quadrature
// integration, Dirichlet elimination, and the linear solver front end.
//
// All nonlinear integrands in this project are evaluated with vertex-lumped
// quadrature, so the lumped mass vector doubles as the quadrature rule.  That
// choice keeps densities normalized exactly at the discrete level.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "bohmgrav/errors.hpp"
#include "bohmgrav/mesh.hpp"
#include "bohmgrav/sparse.hpp"

namespace bohmgrav {

// Nodal scalar values over a mesh (or a radial grid).
struct ScalarField {
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(std::vector<double> v) : values(std::move(v)) {}

  static ScalarField zeros(std::size_t n) { return ScalarField(std::vector<double>(n, 0.0)); }
  static ScalarField zeros(const Mesh& mesh) { return zeros(mesh.node_count()); }
  static ScalarField constant(const Mesh& mesh, double c) {
    return ScalarField(std::vector<double>(mesh.node_count(), c));
  }
  template <class F>
  static ScalarField sample(const Mesh& mesh, F&& f) {
    ScalarField out;
    out.values.reserve(mesh.node_count());
    for (const auto& p : mesh.nodes) out.values.push_back(f(p[0], p[1]));
    return out;
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

inline void validate_field(const Mesh& mesh, const ScalarField& f, const char* what) {
  if (f.size() != mesh.node_count())
    throw NumericalError(std::string(what) + ": field size does not match mesh");
  for (double v : f.values)
    if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite field value");
}

namespace detail {

// Geometry of one P1 element: area and the constant basis gradients,
// grad(lambda_i) = (b_i, c_i) / (2A).
struct TriGeometry {
  double area;
  std::array<double, 3> b;
  std::array<double, 3> c;
};

inline TriGeometry tri_geometry(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const auto& p0 = mesh.nodes[tri[0]];
  const auto& p1 = mesh.nodes[tri[1]];
  const auto& p2 = mesh.nodes[tri[2]];
  TriGeometry g;
  g.b = {p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]};
  g.c = {p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]};
  g.area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]));
  const double d = triangle_diameter(mesh, t);
  if (!(g.area > 1e-14 * std::max(1.0, d * d)))
    throw NumericalError("assembly: degenerate triangle " + std::to_string(t));
  return g;
}

}  // namespace detail

inline SparseMatrix assemble_stiffness(const Mesh& mesh) {
  CooBuilder coo(mesh.node_count(), mesh.node_count());
  coo.reserve(mesh.triangle_count() * 9);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = detail::tri_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    const double w = 1.0 / (4.0 * g.area);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        coo.add(tri[i], tri[j], (g.b[i] * g.b[j] + g.c[i] * g.c[j]) * w);
  }
  return coo.compress();
}

// Vertex weights of the lumped quadrature rule, w_a = sum of area/3 over the
// triangles touching node a.
inline std::vector<double> lumped_mass_vector(const Mesh& mesh) {
  std::vector<double> w(mesh.node_count(), 0.0);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const double third = detail::tri_geometry(mesh, t).area / 3.0;
    for (std::size_t a : mesh.triangles[t]) w[a] += third;
  }
  return w;
}

inline SparseMatrix assemble_mass(const Mesh& mesh, bool lumped) {
  CooBuilder coo(mesh.node_count(), mesh.node_count());
  if (lumped) {
    const auto w = lumped_mass_vector(mesh);
    for (std::size_t a = 0; a < w.size(); ++a) coo.add(a, a, w[a]);
    return coo.compress();
  }
  coo.reserve(mesh.triangle_count() * 9);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const double s = detail::tri_geometry(mesh, t).area / 12.0;
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        coo.add(tri[i], tri[j], s * (i == j ? 2.0 : 1.0));
  }
  return coo.compress();
}

// Load vector of |grad u_h|^2 tested against lumped hat functions:
// entry a = sum over triangles at a of |grad u_h|^2_T * area_T / 3.
inline std::vector<double> assemble_gradsq_load(const Mesh& mesh, const ScalarField& u) {
  validate_field(mesh, u, "assemble_gradsq_load");
  std::vector<double> load(mesh.node_count(), 0.0);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = detail::tri_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    double gx = 0.0, gy = 0.0;
    for (int i = 0; i < 3; ++i) {
      gx += u[tri[i]] * g.b[i];
      gy += u[tri[i]] * g.c[i];
    }
    gx /= 2.0 * g.area;
    gy /= 2.0 * g.area;
    const double contrib = (gx * gx + gy * gy) * g.area / 3.0;
    for (std::size_t a : tri) load[a] += contrib;
  }
  return load;
}

// Symmetric elimination of Dirichlet nodes: constrained columns are moved to
// the right-hand side, constrained rows become identity rows with rhs = value.
inline void apply_dirichlet(SparseMatrix& A, std::vector<double>& rhs,
                            const std::vector<std::size_t>& nodes, double value) {
  if (A.rows != A.cols || rhs.size() != A.rows)
    throw NumericalError("apply_dirichlet: shape mismatch");
  if (nodes.empty()) return;

  std::vector<char> constrained(A.rows, 0);
  for (std::size_t n : nodes) {
    if (n >= A.rows) throw NumericalError("apply_dirichlet: node index out of range");
    constrained[n] = 1;
  }

  CooBuilder coo(A.rows, A.cols);
  coo.reserve(A.nnz());
  for (std::size_t i = 0; i < A.rows; ++i) {
    if (constrained[i]) {
      coo.add(i, i, 1.0);
      rhs[i] = value;
      continue;
    }
    for (std::size_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k) {
      const std::size_t j = A.col_indices[k];
      if (constrained[j])
        rhs[i] -= A.values[k] * value;
      else
        coo.add(i, j, A.values[k]);
    }
  }
  A = coo.compress();
}

inline std::vector<std::size_t> boundary_nodes(const Mesh& mesh) {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < mesh.node_count(); ++a)
    if (mesh.node_on_boundary[a]) out.push_back(a);
  return out;
}

namespace detail {

inline double norm2(const std::vector<double>& v) {
  long double acc = 0.0L;
  for (double x : v) acc += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(acc));
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(acc);
}

inline double true_residual(const SparseMatrix& A, const std::vector<double>& x,
                            const std::vector<double>& b) {
  std::vector<double> r = A.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return norm2(r);
}

// Jacobi-preconditioned conjugate gradients.  Deterministic: fixed sweep
// order, no data-dependent reordering.
inline std::vector<double> solve_cg(const SparseMatrix& A, const std::vector<double>& b,
                                    double tol, const std::vector<double>* x0) {
  const std::size_t n = A.rows;
  const double bnorm = norm2(b);
  std::vector<double> x = x0 ? *x0 : std::vector<double>(n, 0.0);

  std::vector<double> d = A.diagonal();
  for (double& v : d)
    if (v == 0.0) v = 1.0;

  std::vector<double> r = A.multiply(x);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  std::vector<double> z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / d[i];
  p = z;
  double rz = dot(r, z);

  const std::size_t max_iter = std::min<std::size_t>(10 * n + 1000, 400000);
  for (std::size_t it = 0; it <= max_iter; ++it) {
    if (norm2(r) <= tol * bnorm) {
      const double res = true_residual(A, x, b);
      if (res <= tol * bnorm * (1.0 + 1e-3) || res <= 1e-300) return x;
    }
    if (it == max_iter) break;
    A.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) throw NumericalError("solve_linear(cg): matrix is not positive definite");
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / d[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericalError("solve_linear(cg): no convergence, residual " +
                       std::to_string(true_residual(A, x, b) / bnorm) + " (relative)");
}

// Direct sparse factorization for the nonsymmetric systems (Newton Jacobians
// can be indefinite near turning points, where Krylov methods stall).
inline std::vector<double> solve_lu(const SparseMatrix& A, const std::vector<double>& b,
                                    double tol) {
  const std::size_t n = A.rows;
  if (n > static_cast<std::size_t>(std::numeric_limits<int>::max()))
    throw NumericalError("solve_linear(lu): system too large for direct factorization");

  Eigen::SparseMatrix<double> M(static_cast<int>(n), static_cast<int>(n));
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(A.nnz());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k)
        trips.emplace_back(static_cast<int>(i), static_cast<int>(A.col_indices[k]), A.values[k]);
    M.setFromTriplets(trips.begin(), trips.end());
  }
  M.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.analyzePattern(M);
  solver.factorize(M);
  if (solver.info() != Eigen::Success)
    throw NumericalError("solve_linear(lu): factorization failed (singular matrix?)");

  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) rhs[static_cast<Eigen::Index>(i)] = b[i];
  const Eigen::VectorXd sol = solver.solve(rhs);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = sol[static_cast<Eigen::Index>(i)];

  const double bnorm = norm2(b);
  const double res = true_residual(A, x, b);
  if (!(res <= std::max(tol * bnorm, 1e-280)))
    throw NumericalError("solve_linear(lu): residual " + std::to_string(res / bnorm) +
                         " exceeds tolerance (relative)");
  return x;
}

}  // namespace detail

// Solve A x = b to relative residual <= tol.  The symmetric path runs
// preconditioned CG; the general path uses a direct factorization.  A zero
// right-hand side returns the zero vector.  The returned solution always
// satisfies the residual bound, otherwise an error is raised.
inline std::vector<double> solve_linear(const SparseMatrix& A, const std::vector<double>& b,
                                        bool symmetric, double tol = 1e-10,
                                        const std::vector<double>* initial_guess = nullptr) {
  if (A.rows != A.cols) throw NumericalError("solve_linear: matrix must be square");
  if (b.size() != A.rows) throw NumericalError("solve_linear: rhs size mismatch");
  for (double v : b)
    if (!std::isfinite(v)) throw NumericalError("solve_linear: non-finite rhs");

  if (detail::norm2(b) == 0.0) return std::vector<double>(A.rows, 0.0);
  return symmetric ? detail::solve_cg(A, b, tol, initial_guess) : detail::solve_lu(A, b, tol);
}

// Lumped-quadrature integral of a nodal field.
inline double integrate(const Mesh& mesh, const ScalarField& f) {
  validate_field(mesh, f, "integrate");
  const auto w = lumped_mass_vector(mesh);
  long double acc = 0.0L;
  for (std::size_t a = 0; a < w.size(); ++a) acc += static_cast<long double>(w[a]) * f[a];
  return static_cast<double>(acc);
}

struct NormReport {
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  double h1_semi = 0.0;
};

inline NormReport norms(const Mesh& mesh, const ScalarField& f) {
  validate_field(mesh, f, "norms");
  const auto w = lumped_mass_vector(mesh);
  long double l1 = 0.0L, l2 = 0.0L;
  double linf = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    l1 += static_cast<long double>(w[a]) * std::abs(f[a]);
    l2 += static_cast<long double>(w[a]) * f[a] * f[a];
    linf = std::max(linf, std::abs(f[a]));
  }
  const SparseMatrix K = assemble_stiffness(mesh);
  const double kf = detail::dot(K.multiply(f.values), f.values);

  NormReport rep;
  rep.l1 = static_cast<double>(l1);
  rep.l2 = static_cast<double>(std::sqrt(l2));
  rep.linf = linf;
  rep.h1_semi = std::sqrt(std::max(0.0, kf));
  return rep;
}

}  // namespace bohmgrav
