#pragma once

// Brute-force reference computations shared by the test binaries. Each one
// follows the textbook definition directly and shares no code paths with
// the library beyond the grid geometry accessors.

#include "dytb/accretive.hpp"
#include "dytb/forest.hpp"
#include "dytb/lattice.hpp"
#include "dytb/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

// Squared distance (half-cell units) from the closed box of q to the
// skeleton of every level-`level` cube of `other`, by enumerating every face
// of every child.
inline std::int64_t skeleton_distance_sq(const dytb::Grid& grid, const dytb::Cube& q, const dytb::Grid& other,
                                         int level) {
  const int n = grid.dimension();
  const dytb::CellBox qb = grid.box(q);
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::uint64_t code = 0; code < other.cubes_at(level); ++code) {
    const dytb::CellBox rb = other.box(dytb::Cube{level, code});
    const std::int64_t half = rb.side();  // child side in half cells
    for (std::uint64_t child = 0; child < (std::uint64_t{1} << n); ++child) {
      dytb::IntVector lo(n), hi(n);
      for (int i = 0; i < n; ++i) {
        lo(i) = 2 * rb.lo(i) + static_cast<std::int64_t>((child >> i) & 1U) * half;
        hi(i) = lo(i) + half;
      }
      for (int axis = 0; axis < n; ++axis) {
        for (std::int64_t plane : {lo(axis), hi(axis)}) {
          std::int64_t total = 0;
          for (int i = 0; i < n; ++i) {
            const std::int64_t a = 2 * qb.lo(i), b = 2 * qb.hi(i);
            const std::int64_t flo = i == axis ? plane : lo(i);
            const std::int64_t fhi = i == axis ? plane : hi(i);
            const std::int64_t gap = std::max<std::int64_t>({0, flo - b, a - fhi});
            total += gap * gap;
          }
          best = std::min(best, total);
        }
      }
    }
  }
  return best;
}

inline bool bad_at(const dytb::Grid& grid, const dytb::Cube& q, const dytb::Grid& other, int level, double gamma) {
  const double d = 0.5 * grid.finest_side() * std::sqrt(static_cast<double>(skeleton_distance_sq(grid, q, other, level)));
  const double thr = 2.0 * std::sqrt(static_cast<double>(grid.dimension())) * std::pow(grid.side(q.level), gamma) *
                     std::pow(other.side(level), 1.0 - gamma);
  return d <= thr;
}

inline dytb::Vector indicator(const dytb::Grid& g, const dytb::Cube& q) {
  dytb::Vector v = dytb::Vector::Zero(static_cast<Eigen::Index>(g.leaf_count()));
  v.segment(static_cast<Eigen::Index>(g.first_leaf(q)), static_cast<Eigen::Index>(g.leaf_span(q))).setOnes();
  return v;
}

// E_k f / E_k b^a_k times b^a_k, assembled from whole leaf functions and
// cube averages.
inline dytb::Vector expectation(const dytb::AccretiveSystem& sys, const std::vector<dytb::Vector>& b,
                                const dytb::StoppingForest& forest, const dytb::GridMeasure& gm, int k,
                                const dytb::Vector& f) {
  const dytb::Grid& g = gm.grid();
  const auto n = static_cast<Eigen::Index>(g.leaf_count());
  dytb::Vector ba = dytb::Vector::Zero(n), out = dytb::Vector::Zero(n);
  for (std::uint64_t code = 0; code < g.cubes_at(k); ++code) {
    const dytb::Cube q{k, code};
    ba += sys.extended(b, forest.ancestor(q)).cwiseProduct(indicator(g, q));
  }
  for (std::uint64_t code = 0; code < g.cubes_at(k); ++code) {
    const dytb::Cube q{k, code};
    if (gm.mass(q) <= 0.0) continue;
    out += (gm.average(f, q) / gm.average(ba, q)) * ba.cwiseProduct(indicator(g, q));
  }
  return out;
}

// sum_i sum_j w_i w_j v_i K(x_i, x_j) u_j with the kernel evaluated pointwise.
template <typename Kernel>
double double_sum(const Kernel& kernel, const dytb::AtomicMeasure& mu, const dytb::Vector& u, const dytb::Vector& v) {
  const dytb::CellSpace& s = mu.space();
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double wi = mu.weight(i) * v(static_cast<Eigen::Index>(i));
    if (wi == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double k = i == j ? kernel.diagonal : kernel(s.center(i), s.center(j));
      row += k * mu.weight(j) * u(static_cast<Eigen::Index>(j));
    }
    total += wi * row;
  }
  return total;
}

// max over cubes R of sum_{Q inside R} a_Q / mu(R), by walking every Q up
// to each of its ancestors.
inline double carleson_constant(const std::vector<double>& a, const dytb::GridMeasure& gm) {
  const dytb::Grid& g = gm.grid();
  std::vector<double> sums(g.cube_count(), 0.0);
  for (std::size_t id = 0; id < g.cube_count(); ++id) {
    dytb::Cube q = g.cube(id);
    while (true) {
      sums[g.id(q)] += a[id];
      if (q.level == 0) break;
      q = g.parent(q);
    }
  }
  double best = 0.0;
  for (std::size_t id = 0; id < g.cube_count(); ++id) {
    const double m = gm.mass(g.cube(id));
    if (m > 0.0) best = std::max(best, sums[id] / m);
  }
  return best;
}

}  // namespace oracle
