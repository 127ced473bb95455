#include "dytb/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dytb {

bool CellBox::contains(const CellBox& other) const {
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (other.lo(i) < lo(i) || other.hi(i) > hi(i)) return false;
  }
  return true;
}

bool CellBox::intersects(const CellBox& other) const {
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (other.hi(i) <= lo(i) || hi(i) <= other.lo(i)) return false;
  }
  return true;
}

std::int64_t squared_distance(const CellBox& a, const CellBox& b) {
  std::int64_t total = 0;
  for (Eigen::Index i = 0; i < a.lo.size(); ++i) {
    const std::int64_t gap = std::max<std::int64_t>({0, b.lo(i) - a.hi(i), a.lo(i) - b.hi(i)});
    total += gap * gap;
  }
  return total;
}

std::uint64_t morton_encode(const IntVector& index, int dimension) {
  std::uint64_t code = 0;
  for (int bit = 0; bit * dimension < 64; ++bit) {
    for (int axis = 0; axis < dimension; ++axis) {
      const auto b = (static_cast<std::uint64_t>(index(axis)) >> bit) & 1U;
      const int shift = bit * dimension + axis;
      if (shift < 64) code |= b << shift;
    }
  }
  return code;
}

IntVector morton_decode(std::uint64_t code, int dimension) {
  IntVector index = IntVector::Zero(dimension);
  for (int bit = 0; bit * dimension < 64; ++bit) {
    for (int axis = 0; axis < dimension; ++axis) {
      const int shift = bit * dimension + axis;
      if (shift < 64) index(axis) |= static_cast<std::int64_t>((code >> shift) & 1U) << bit;
    }
  }
  return index;
}

Grid::Grid(const Point& shift, int top_scale, int depth, int dimension, int id)
    : dimension_(dimension), depth_(depth), top_scale_(top_scale), id_(id), shift_(shift) {
  require(dimension >= 1 && dimension <= kMaxDimension, "grid dimension must be in 1..3");
  require(depth >= 1, "grid depth must be at least 1");
  require(depth * dimension <= 60, "grid depth times dimension must not exceed 60");
  require(shift.size() == dimension, "grid shift must have one coordinate per dimension");
  const double h = finest_side();
  const double half = 0.5 * top_side();
  corner_ = IntVector::Zero(dimension);
  for (int i = 0; i < dimension; ++i) {
    const double cells = shift(i) / h;
    if (!std::isfinite(cells) || cells != std::floor(cells) || std::abs(cells) > 0x1.0p52) {
      std::ostringstream msg;
      msg << "grid shift coordinate " << i << " = " << shift(i)
          << " is not a multiple of the finest cell side " << h;
      throw Error(msg.str());
    }
    if (shift(i) < -half || shift(i) >= half) {
      std::ostringstream msg;
      msg << "grid shift coordinate " << i << " = " << shift(i) << " lies outside [" << -half << ", "
          << half << ")";
      throw Error(msg.str());
    }
    corner_(i) = static_cast<std::int64_t>(cells);
  }
}

double Grid::top_side() const { return std::ldexp(1.0, top_scale_); }
double Grid::finest_side() const { return std::ldexp(1.0, top_scale_ - depth_); }
double Grid::side(int level) const { return std::ldexp(1.0, top_scale_ - level); }

std::size_t Grid::level_offset(int level) const {
  // (2^{level n} - 1) / (2^n - 1)
  std::size_t offset = 0;
  for (int l = 0; l < level; ++l) offset += cubes_at(l);
  return offset;
}

std::size_t Grid::cube_count() const { return level_offset(depth_ + 1); }

std::size_t Grid::id(const Cube& q) const { return level_offset(q.level) + q.code; }

Cube Grid::cube(std::size_t id) const {
  int level = 0;
  while (id >= cubes_at(level)) {
    id -= cubes_at(level);
    ++level;
  }
  require(level <= depth_, "cube id out of range");
  return Cube{level, id};
}

Cube Grid::parent(const Cube& q) const {
  require(q.level > 0, "the top cube has no parent");
  return Cube{q.level - 1, q.code >> dimension_};
}

Cube Grid::ancestor(const Cube& q, int generations) const {
  require(generations >= 0 && generations <= q.level, "ancestor generation out of range");
  return Cube{q.level - generations, q.code >> (generations * dimension_)};
}

std::vector<Cube> Grid::children(const Cube& q) const {
  require(q.level < depth_, "finest cubes have no children in the grid");
  std::vector<Cube> out;
  out.reserve(child_count());
  for (int c = 0; c < child_count(); ++c) {
    out.push_back(Cube{q.level + 1, (q.code << dimension_) | static_cast<std::uint64_t>(c)});
  }
  return out;
}

IntVector Grid::index(const Cube& q) const { return morton_decode(q.code, dimension_); }

Cube Grid::at(int level, const IntVector& index) const {
  require(level >= 0 && level <= depth_, "cube level out of range");
  for (int i = 0; i < dimension_; ++i) {
    require(index(i) >= 0 && index(i) < (std::int64_t{1} << level), "cube index out of range");
  }
  return Cube{level, morton_encode(index, dimension_)};
}

CellBox Grid::box(const Cube& q) const {
  const std::int64_t s = side_cells(q.level);
  CellBox b;
  b.lo = corner_ + index(q) * s;
  b.hi = b.lo.array() + s;
  return b;
}

bool Grid::contains(const Cube& outer, const Cube& inner) const {
  if (inner.level < outer.level) return false;
  return (inner.code >> ((inner.level - outer.level) * dimension_)) == outer.code;
}

std::optional<Cube> Grid::locate(const IntVector& cell, int level) const {
  const IntVector local = cell - corner_;
  const std::int64_t n = std::int64_t{1} << depth_;
  for (int i = 0; i < dimension_; ++i) {
    if (local(i) < 0 || local(i) >= n) return std::nullopt;
  }
  const IntVector idx = local / side_cells(level);
  return Cube{level, morton_encode(idx, dimension_)};
}

bool Grid::compatible(const Grid& other) const {
  return dimension_ == other.dimension_ && depth_ == other.depth_ && top_scale_ == other.top_scale_;
}

double separation_threshold(int dimension, double side_q, double side_r, double gamma) {
  return 2.0 * std::sqrt(static_cast<double>(dimension)) * std::pow(side_q, gamma) *
         std::pow(side_r, 1.0 - gamma);
}

SkeletonDistance skeleton_distance(const Grid& grid, const Cube& q, const Grid& other, int other_level) {
  require(grid.compatible(other), "skeleton distance needs grids with a common finest cell");
  require(other_level >= 0 && other_level <= other.depth(), "skeleton scale is not a level of the other grid");
  require(other_level <= q.level, "skeleton scale must not be smaller than the cube side");
  const int n = grid.dimension();
  // Half-cell units: children of a finest cube have integer boundaries.
  const CellBox qb = grid.box(q);
  const CellBox top = other.top_box();
  const std::int64_t step = other.side_cells(other_level);  // child side in half cells
  const std::int64_t planes = std::int64_t{2} << other_level;  // planes are m = 0..planes

  std::vector<std::int64_t> top_gap(n);
  for (int k = 0; k < n; ++k) {
    const std::int64_t a = 2 * qb.lo(k), b = 2 * qb.hi(k);
    const std::int64_t lo = 2 * top.lo(k), hi = 2 * top.hi(k);
    top_gap[k] = std::max<std::int64_t>({0, lo - b, a - hi});
  }
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (int i = 0; i < n; ++i) {
    const std::int64_t a = 2 * qb.lo(i), b = 2 * qb.hi(i);
    const std::int64_t origin = 2 * top.lo(i);
    // Nearest plane index to the interval [a, b].
    auto gap_to = [&](std::int64_t m) {
      m = std::clamp<std::int64_t>(m, 0, planes);
      const std::int64_t p = origin + m * step;
      if (p < a) return a - p;
      if (p > b) return p - b;
      return std::int64_t{0};
    };
    const std::int64_t floor_a = (a - origin) >= 0 ? (a - origin) / step : -(((origin - a) + step - 1) / step);
    std::int64_t gap = std::numeric_limits<std::int64_t>::max();
    for (std::int64_t m : {floor_a, floor_a + 1, (b - origin) / step, (b - origin) / step + 1}) {
      gap = std::min(gap, gap_to(m));
    }
    std::int64_t total = gap * gap;
    for (int k = 0; k < n; ++k) {
      if (k != i) total += top_gap[k] * top_gap[k];
    }
    best = std::min(best, total);
  }
  SkeletonDistance d;
  d.squared_half_cells = best;
  d.length = 0.5 * grid.finest_side() * std::sqrt(static_cast<double>(best));
  return d;
}

bool is_bad_at(const Grid& grid, const Cube& q, const Grid& other, int other_level, double gamma) {
  const SkeletonDistance d = skeleton_distance(grid, q, other, other_level);
  // Compare squared distances in half-cell units.
  const long double side_q = 2.0L * static_cast<long double>(grid.side_cells(q.level));
  const long double side_r = 2.0L * static_cast<long double>(other.side_cells(other_level));
  const long double thr = 2.0L * std::sqrt(static_cast<long double>(grid.dimension())) *
                          std::pow(side_q, static_cast<long double>(gamma)) *
                          std::pow(side_r, 1.0L - static_cast<long double>(gamma));
  return static_cast<long double>(d.squared_half_cells) <= thr * thr;
}

bool is_bad(const Grid& grid, const Cube& q, const Grid& other, int r, double gamma) {
  require(r >= 1, "badness separation parameter r must be at least 1");
  require(gamma > 0.0 && gamma < 0.5, "badness exponent gamma must lie in (0, 1/2)");
  for (int level = q.level - r; level >= 0; --level) {
    if (is_bad_at(grid, q, other, level, gamma)) return true;
  }
  return false;
}

std::optional<int> goodness_class(const Grid& grid, const Cube& q, const Grid& other, double gamma) {
  require(gamma > 0.0 && gamma < 0.5, "badness exponent gamma must lie in (0, 1/2)");
  int worst = -1;
  for (int k = 0; k <= q.level; ++k) {
    if (is_bad_at(grid, q, other, q.level - k, gamma)) worst = k;
  }
  if (worst == q.level) return std::nullopt;
  return worst + 1;
}

GoodnessRecord goodness_record(const Grid& grid, const Cube& q, const Grid& other, int r, double gamma) {
  GoodnessRecord rec;
  rec.cube = q;
  rec.other_grid = other.id();
  rec.r = r;
  rec.gamma = gamma;
  rec.alpha_class = goodness_class(grid, q, other, gamma);
  if (rec.alpha_class) rec.alpha_class = std::max(*rec.alpha_class, r);
  return rec;
}

Point cube_center(const Grid& grid, const Cube& q) {
  const CellBox b = grid.box(q);
  return (b.lo + b.hi).cast<double>() * (0.5 * grid.finest_side());
}

}  // namespace dytb
