#pragma once

// Conforming triangle meshes for the unit disk and the unit square.
//
// The disk starts as a fan of six equilateral triangles around the origin and
// is refined uniformly (each triangle into four) with new boundary midpoints
// projected onto the unit circle.  The square is an n-by-n grid with each cell
// split along one diagonal.  Adaptive refinement bisects marked triangles
// across their longest edge and recursively closes neighbours so the mesh
// stays conforming.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bohmgrav/errors.hpp"

namespace bohmgrav {

enum class DomainKind { disk, square };

struct Mesh {
  DomainKind domain = DomainKind::disk;
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<std::size_t, 3>> triangles;  // CCW node indices
  std::vector<char> node_on_boundary;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
};

inline double triangle_signed_area(const Mesh& mesh, std::size_t t) {
  const auto& [a, b, c] = mesh.triangles[t];
  const auto& pa = mesh.nodes[a];
  const auto& pb = mesh.nodes[b];
  const auto& pc = mesh.nodes[c];
  return 0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]));
}

inline double mesh_area(const Mesh& mesh) {
  long double acc = 0.0L;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) acc += triangle_signed_area(mesh, t);
  return static_cast<double>(acc);
}

inline double triangle_diameter(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto& p = mesh.nodes[tri[i]];
    const auto& q = mesh.nodes[tri[(i + 1) % 3]];
    const double dx = p[0] - q[0], dy = p[1] - q[1];
    d2 = std::max(d2, dx * dx + dy * dy);
  }
  return std::sqrt(d2);
}

inline double max_element_diameter(const Mesh& mesh) {
  double d = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) d = std::max(d, triangle_diameter(mesh, t));
  return d;
}

inline bool has_obtuse_triangle(const Mesh& mesh) {
  for (const auto& tri : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const auto& p = mesh.nodes[tri[i]];
      const auto& q = mesh.nodes[tri[(i + 1) % 3]];
      const auto& r = mesh.nodes[tri[(i + 2) % 3]];
      const double ux = q[0] - p[0], uy = q[1] - p[1];
      const double vx = r[0] - p[0], vy = r[1] - p[1];
      if (ux * vx + uy * vy < 0.0) return true;
    }
  }
  return false;
}

inline std::size_t nearest_node(const Mesh& mesh, double x, double y) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    const double dx = mesh.nodes[a][0] - x, dy = mesh.nodes[a][1] - y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = a;
    }
  }
  return best;
}

namespace detail {

inline std::uint64_t edge_key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

// Count of adjacent triangles per undirected edge.
inline std::unordered_map<std::uint64_t, int> edge_use_counts(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, int> counts;
  counts.reserve(mesh.triangle_count() * 2);
  for (const auto& tri : mesh.triangles) {
    for (int i = 0; i < 3; ++i) counts[edge_key(tri[i], tri[(i + 1) % 3])]++;
  }
  return counts;
}

}  // namespace detail

// Structural checks run on every produced mesh: conforming (each edge borders
// one or two triangles), positively oriented, no duplicate nodes, boundary
// flags match topology, boundary nodes lie on the domain boundary, and the
// Euler relation V - E + T = 1 of a triangulated disk holds.
inline void validate_mesh(const Mesh& mesh) {
  if (mesh.node_on_boundary.size() != mesh.node_count())
    throw NumericalError("mesh: boundary flag array size mismatch");
  if (mesh.triangle_count() == 0) throw NumericalError("mesh: no triangles");

  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (std::size_t a : tri)
      if (a >= mesh.node_count()) throw NumericalError("mesh: triangle node index out of range");
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw NumericalError("mesh: degenerate triangle (repeated node)");
    if (triangle_signed_area(mesh, t) <= 0.0)
      throw NumericalError("mesh: triangle " + std::to_string(t) + " is not CCW-oriented");
  }

  {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(mesh.node_count());
    for (const auto& p : mesh.nodes) {
      std::uint64_t xb, yb;
      static_assert(sizeof(double) == sizeof(std::uint64_t));
      std::memcpy(&xb, &p[0], sizeof(double));
      std::memcpy(&yb, &p[1], sizeof(double));
      if (!seen.insert(xb ^ (yb * 0x9e3779b97f4a7c15ULL)).second) {
        // Hash collision is possible in principle; confirm with an exact test.
        for (std::size_t i = 0; i < mesh.node_count(); ++i)
          for (std::size_t j = i + 1; j < mesh.node_count(); ++j)
            if (mesh.nodes[i] == mesh.nodes[j]) throw NumericalError("mesh: duplicate node");
      }
    }
  }

  const auto counts = detail::edge_use_counts(mesh);
  std::vector<char> touches_boundary_edge(mesh.node_count(), 0);
  for (const auto& tri : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const std::size_t a = tri[i], b = tri[(i + 1) % 3];
      const int c = counts.at(detail::edge_key(a, b));
      if (c != 1 && c != 2) throw NumericalError("mesh: non-conforming edge (used by " + std::to_string(c) + " triangles)");
      if (c == 1) touches_boundary_edge[a] = touches_boundary_edge[b] = 1;
    }
  }
  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    if (static_cast<bool>(mesh.node_on_boundary[a]) != static_cast<bool>(touches_boundary_edge[a]))
      throw NumericalError("mesh: boundary flag inconsistent at node " + std::to_string(a));
  }

  const std::ptrdiff_t V = static_cast<std::ptrdiff_t>(mesh.node_count());
  const std::ptrdiff_t E = static_cast<std::ptrdiff_t>(counts.size());
  const std::ptrdiff_t T = static_cast<std::ptrdiff_t>(mesh.triangle_count());
  if (V - E + T != 1) throw NumericalError("mesh: Euler relation V-E+T=1 violated");

  for (std::size_t a = 0; a < mesh.node_count(); ++a) {
    if (!mesh.node_on_boundary[a]) continue;
    const double x = mesh.nodes[a][0], y = mesh.nodes[a][1];
    if (mesh.domain == DomainKind::disk) {
      if (std::abs(x * x + y * y - 1.0) > 1e-12)
        throw NumericalError("mesh: boundary node off the unit circle");
    } else {
      const bool on_edge = std::abs(x) <= 1e-12 || std::abs(x - 1.0) <= 1e-12 ||
                           std::abs(y) <= 1e-12 || std::abs(y - 1.0) <= 1e-12;
      if (!on_edge) throw NumericalError("mesh: boundary node off the unit square edge");
    }
  }
}

// One uniform refinement sweep: every triangle is split into four via edge
// midpoints.  Midpoints of boundary edges become boundary nodes; on the disk
// they are projected onto the unit circle.  Midpoint nodes are deduplicated by
// parent edge, never by coordinate comparison.
inline Mesh refine_uniform(const Mesh& mesh) {
  Mesh out;
  out.domain = mesh.domain;
  out.nodes = mesh.nodes;
  out.node_on_boundary = mesh.node_on_boundary;
  out.triangles.reserve(mesh.triangle_count() * 4);

  const auto counts = detail::edge_use_counts(mesh);
  std::unordered_map<std::uint64_t, std::size_t> midpoint;
  midpoint.reserve(counts.size());

  auto midpoint_of = [&](std::size_t a, std::size_t b) {
    const std::uint64_t key = detail::edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    double mx = 0.5 * (mesh.nodes[a][0] + mesh.nodes[b][0]);
    double my = 0.5 * (mesh.nodes[a][1] + mesh.nodes[b][1]);
    const bool boundary_edge = counts.at(key) == 1;
    if (boundary_edge && mesh.domain == DomainKind::disk) {
      const double r = std::sqrt(mx * mx + my * my);
      mx /= r;
      my /= r;
    }
    const std::size_t idx = out.nodes.size();
    out.nodes.push_back({mx, my});
    out.node_on_boundary.push_back(boundary_edge ? 1 : 0);
    midpoint.emplace(key, idx);
    return idx;
  };

  for (const auto& tri : mesh.triangles) {
    const std::size_t a = tri[0], b = tri[1], c = tri[2];
    const std::size_t ab = midpoint_of(a, b);
    const std::size_t bc = midpoint_of(b, c);
    const std::size_t ca = midpoint_of(c, a);
    out.triangles.push_back({a, ab, ca});
    out.triangles.push_back({b, bc, ab});
    out.triangles.push_back({c, ca, bc});
    out.triangles.push_back({ab, bc, ca});
  }

  validate_mesh(out);
  return out;
}

// Unit disk, six-triangle fan refined `level` times.
inline Mesh build_disk_mesh(int level) {
  if (level < 0 || level > 10) throw ConfigError("disk mesh level must be in [0, 10]");

  Mesh mesh;
  mesh.domain = DomainKind::disk;
  mesh.nodes.push_back({0.0, 0.0});
  mesh.node_on_boundary.push_back(0);
  for (int k = 0; k < 6; ++k) {
    const double th = k * (M_PI / 3.0);
    mesh.nodes.push_back({std::cos(th), std::sin(th)});
    mesh.node_on_boundary.push_back(1);
  }
  for (std::size_t k = 0; k < 6; ++k) mesh.triangles.push_back({0, 1 + k, 1 + (k + 1) % 6});
  validate_mesh(mesh);

  for (int l = 0; l < level; ++l) mesh = refine_uniform(mesh);
  return mesh;
}

// Unit square [0,1]^2, n-by-n cells, each split into two triangles.
inline Mesh build_square_mesh(int n) {
  if (n < 1) throw ConfigError("square mesh resolution must be >= 1");

  Mesh mesh;
  mesh.domain = DomainKind::square;
  const std::size_t m = static_cast<std::size_t>(n);
  for (std::size_t j = 0; j <= m; ++j) {
    for (std::size_t i = 0; i <= m; ++i) {
      mesh.nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
      mesh.node_on_boundary.push_back((i == 0 || i == m || j == 0 || j == m) ? 1 : 0);
    }
  }
  auto id = [m](std::size_t i, std::size_t j) { return j * (m + 1) + i; };
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  validate_mesh(mesh);
  return mesh;
}

namespace detail {

// Longest-edge bisection with recursive conformity closure.  The working set
// keeps a live edge-to-triangles map so neighbour lookups stay cheap, and ties
// between equally long edges break on the lexicographically smallest node
// pair, which keeps refinement deterministic.
class Bisector {
public:
  explicit Bisector(const Mesh& mesh) : mesh_(mesh) {
    tris_ = mesh.triangles;
    alive_.assign(tris_.size(), 1);
    nodes_ = mesh.nodes;
    on_boundary_ = mesh.node_on_boundary;
    for (std::size_t t = 0; t < tris_.size(); ++t) link(t);
  }

  void bisect_closure(std::size_t t) {
    if (t >= tris_.size() || !alive_[t]) return;
    if (++work_ > work_limit()) throw NumericalError("refine_marked: closure did not terminate");

    const auto [ea, eb] = longest_edge(t);
    std::size_t other = neighbour_across(ea, eb, t);
    while (other != npos) {
      const auto [oa, ob] = longest_edge(other);
      if (edge_key(oa, ob) == edge_key(ea, eb)) break;
      bisect_closure(other);
      other = neighbour_across(ea, eb, t);
    }

    const std::size_t m = split_point(ea, eb);
    split(t, ea, eb, m);
    if (other != npos) split(other, ea, eb, m);
  }

  Mesh finish() && {
    Mesh out;
    out.domain = mesh_.domain;
    out.nodes = std::move(nodes_);
    out.node_on_boundary = std::move(on_boundary_);
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (alive_[t]) out.triangles.push_back(tris_[t]);
    validate_mesh(out);
    return out;
  }

  bool alive(std::size_t t) const { return t < alive_.size() && alive_[t]; }

private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t work_limit() const { return 200 * mesh_.triangle_count() + 10000; }

  void link(std::size_t t) {
    for (int i = 0; i < 3; ++i)
      edge_tris_[edge_key(tris_[t][i], tris_[t][(i + 1) % 3])].push_back(t);
  }

  void unlink(std::size_t t) {
    for (int i = 0; i < 3; ++i) {
      auto& vec = edge_tris_[edge_key(tris_[t][i], tris_[t][(i + 1) % 3])];
      vec.erase(std::remove(vec.begin(), vec.end(), t), vec.end());
    }
  }

  std::size_t neighbour_across(std::size_t a, std::size_t b, std::size_t self) const {
    auto it = edge_tris_.find(edge_key(a, b));
    if (it == edge_tris_.end()) return npos;
    for (std::size_t t : it->second)
      if (t != self && alive_[t]) return t;
    return npos;
  }

  std::pair<std::size_t, std::size_t> longest_edge(std::size_t t) const {
    const auto& tri = tris_[t];
    double best = -1.0;
    std::pair<std::size_t, std::size_t> edge{0, 0};
    for (int i = 0; i < 3; ++i) {
      std::size_t a = tri[i], b = tri[(i + 1) % 3];
      const double dx = nodes_[a][0] - nodes_[b][0];
      const double dy = nodes_[a][1] - nodes_[b][1];
      const double len2 = dx * dx + dy * dy;
      std::size_t lo = std::min(a, b), hi = std::max(a, b);
      if (len2 > best || (len2 == best && std::make_pair(lo, hi) < edge)) {
        best = len2;
        edge = {lo, hi};
      }
    }
    return edge;
  }

  std::size_t split_point(std::size_t a, std::size_t b) {
    const std::uint64_t key = edge_key(a, b);
    auto it = midpoint_.find(key);
    if (it != midpoint_.end()) return it->second;
    double mx = 0.5 * (nodes_[a][0] + nodes_[b][0]);
    double my = 0.5 * (nodes_[a][1] + nodes_[b][1]);
    const auto et = edge_tris_.find(key);
    std::size_t live = 0;
    if (et != edge_tris_.end())
      for (std::size_t t : et->second)
        if (alive_[t]) ++live;
    const bool boundary_edge = live == 1;
    if (boundary_edge && mesh_.domain == DomainKind::disk) {
      const double r = std::sqrt(mx * mx + my * my);
      mx /= r;
      my /= r;
    }
    const std::size_t idx = nodes_.size();
    nodes_.push_back({mx, my});
    on_boundary_.push_back(boundary_edge ? 1 : 0);
    midpoint_.emplace(key, idx);
    return idx;
  }

  void split(std::size_t t, std::size_t ea, std::size_t eb, std::size_t m) {
    const auto tri = tris_[t];
    int ia = -1;
    for (int i = 0; i < 3; ++i) {
      const std::size_t a = tri[i], b = tri[(i + 1) % 3];
      if (edge_key(a, b) == edge_key(ea, eb)) {
        ia = i;
        break;
      }
    }
    if (ia < 0) throw NumericalError("refine_marked: internal split edge lookup failed");
    const std::size_t a = tri[ia], b = tri[(ia + 1) % 3], c = tri[(ia + 2) % 3];

    unlink(t);
    alive_[t] = 0;
    tris_.push_back({a, m, c});
    alive_.push_back(1);
    link(tris_.size() - 1);
    tris_.push_back({m, b, c});
    alive_.push_back(1);
    link(tris_.size() - 1);
  }

  const Mesh& mesh_;
  std::vector<std::array<std::size_t, 3>> tris_;
  std::vector<char> alive_;
  std::vector<std::array<double, 2>> nodes_;
  std::vector<char> on_boundary_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> edge_tris_;
  std::unordered_map<std::uint64_t, std::size_t> midpoint_;
  std::size_t work_ = 0;
};

}  // namespace detail

// Bisect the marked triangles (longest edge first) and whatever neighbours the
// conformity closure drags in.  An empty mark set returns the mesh unchanged.
inline Mesh refine_marked(const Mesh& mesh, const std::vector<std::size_t>& marked) {
  for (std::size_t t : marked)
    if (t >= mesh.triangle_count()) throw ConfigError("refine_marked: triangle index out of range");
  if (marked.empty()) return mesh;

  std::vector<std::size_t> order(marked);
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());

  detail::Bisector bisector(mesh);
  for (std::size_t t : order) {
    // A mark already consumed by closure counts as refined.
    if (bisector.alive(t)) bisector.bisect_closure(t);
  }
  return std::move(bisector).finish();
}

}  // namespace bohmgrav
