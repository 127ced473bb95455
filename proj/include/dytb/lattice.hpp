#pragma once

#include "dytb/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace dytb {

/// A dyadic cube of a particular grid: its level (0 = top cube) and the
/// Morton code of its index vector at that level.
struct Cube {
  int level = 0;
  std::uint64_t code = 0;

  friend bool operator==(const Cube&, const Cube&) = default;
  friend auto operator<=>(const Cube&, const Cube&) = default;
};

/// Half-open box of finest cells, [lo, hi) per axis, in global integer cell
/// coordinates (cell c covers [c h, (c+1) h)).
struct CellBox {
  IntVector lo;
  IntVector hi;

  std::int64_t side() const { return hi(0) - lo(0); }
  bool contains(const CellBox& other) const;
  bool intersects(const CellBox& other) const;
};

/// Squared Euclidean distance between the closures of two boxes, in cell
/// units squared. Exact.
std::int64_t squared_distance(const CellBox& a, const CellBox& b);

/// A randomly shifted dyadic lattice truncated to `depth` levels below its
/// top cube `shift + [0, 2^top_scale)^n`. Immutable and cheap to copy: no
/// per-cube storage is allocated.
class Grid {
 public:
  static constexpr int kMaxDimension = 3;

  Grid() = default;
  /// Throws `Error` unless `shift` is a multiple of the finest cell side and
  /// lies in [-L/2, L/2)^n.
  Grid(const Point& shift, int top_scale, int depth, int dimension, int id = 0);

  int dimension() const { return dimension_; }
  int depth() const { return depth_; }
  int top_scale() const { return top_scale_; }
  int id() const { return id_; }
  const Point& shift() const { return shift_; }
  /// Top-cube corner in global cell coordinates.
  const IntVector& corner() const { return corner_; }

  double top_side() const;
  double finest_side() const;
  double side(int level) const;
  /// Side of a level-`level` cube in finest cells.
  std::int64_t side_cells(int level) const { return std::int64_t{1} << (depth_ - level); }

  std::uint64_t cubes_at(int level) const { return std::uint64_t{1} << (level * dimension_); }
  std::uint64_t leaf_count() const { return cubes_at(depth_); }
  std::size_t cube_count() const;
  std::size_t id(const Cube& q) const;
  Cube cube(std::size_t id) const;
  std::size_t level_offset(int level) const;

  Cube top() const { return Cube{0, 0}; }
  Cube parent(const Cube& q) const;
  Cube ancestor(const Cube& q, int generations) const;
  std::vector<Cube> children(const Cube& q) const;
  int child_count() const { return 1 << dimension_; }

  IntVector index(const Cube& q) const;
  Cube at(int level, const IntVector& index) const;
  CellBox box(const Cube& q) const;
  CellBox top_box() const { return box(top()); }

  /// Leaf (finest cube) range in Morton order: [first, last).
  std::uint64_t first_leaf(const Cube& q) const { return q.code << ((depth_ - q.level) * dimension_); }
  std::uint64_t leaf_span(const Cube& q) const { return cubes_at(depth_ - q.level); }

  bool contains(const Cube& outer, const Cube& inner) const;
  /// Level-`level` cube containing the finest cell at global coordinates
  /// `cell`, if the cell lies in the top cube.
  std::optional<Cube> locate(const IntVector& cell, int level) const;

  /// Two grids are compatible when they share dimension, depth and finest
  /// cell side, so their cells coincide.
  bool compatible(const Grid& other) const;

 private:
  int dimension_ = 1;
  int depth_ = 1;
  int top_scale_ = 0;
  int id_ = 0;
  Point shift_;
  IntVector corner_;
};

std::uint64_t morton_encode(const IntVector& index, int dimension);
IntVector morton_decode(std::uint64_t code, int dimension);

/// Result of a skeleton distance query. Distances are kept exactly as squared
/// half-cell counts; `length` is the real-valued distance.
struct SkeletonDistance {
  std::int64_t squared_half_cells = 0;
  double length = 0.0;
};

/// Distance from `q` (a cube of `grid`) to the union of the skeletons of all
/// level-`other_level` cubes of `other`. The skeleton of R is the union of
/// the boundaries of its children. Throws if the scale is below l(q).
SkeletonDistance skeleton_distance(const Grid& grid, const Cube& q, const Grid& other, int other_level);

/// Threshold 2 n^{1/2} l(Q)^gamma l(R)^{1-gamma}; lengths in any common unit.
double separation_threshold(int dimension, double side_q, double side_r, double gamma);

/// True iff `q` is within threshold of the skeleton of a level-`other_level`
/// cube of `other`. Ties count as bad.
bool is_bad_at(const Grid& grid, const Cube& q, const Grid& other, int other_level, double gamma);

/// True iff some cube R of `other` with l(R) >= 2^r l(Q) has
/// d(Q, sk R) <= 2 n^{1/2} l(Q)^gamma l(R)^{1-gamma}.
bool is_bad(const Grid& grid, const Cube& q, const Grid& other, int r, double gamma);

/// Smallest k such that q is good with respect to every cube of `other` of
/// side 2^k l(q) and larger (up to the top cube); empty if bad at the top.
std::optional<int> goodness_class(const Grid& grid, const Cube& q, const Grid& other, double gamma);

struct GoodnessRecord {
  Cube cube;
  int other_grid = 0;
  int r = 0;
  double gamma = 0.0;
  std::optional<int> alpha_class;
};

GoodnessRecord goodness_record(const Grid& grid, const Cube& q, const Grid& other, int r, double gamma);

/// Centre of a cube in real coordinates.
Point cube_center(const Grid& grid, const Cube& q);

}  // namespace dytb
