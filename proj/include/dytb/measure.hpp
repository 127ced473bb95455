#pragma once

#include "dytb/lattice.hpp"
#include "dytb/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dytb {

/// Box of finest cells carrying an atomic measure. Cells are linearly
/// indexed with axis 0 varying fastest; atoms sit at cell centres.
class CellSpace {
 public:
  CellSpace() = default;
  CellSpace(int dimension, double finest_side, IntVector lo, IntVector extent);
  /// The finest cells of a grid's top cube.
  static CellSpace covering(const Grid& grid);
  /// Smallest box of cells covering both top cubes; the grids must be
  /// compatible.
  static CellSpace covering(const Grid& a, const Grid& b);

  int dimension() const { return dimension_; }
  double finest_side() const { return finest_side_; }
  const IntVector& lo() const { return lo_; }
  const IntVector& extent() const { return extent_; }
  std::size_t size() const { return size_; }

  /// Global cell coordinates of a linear index.
  IntVector cell(std::size_t linear) const;
  std::optional<std::size_t> linear(const IntVector& cell) const;
  Point center(std::size_t linear) const;
  /// Cell centres as columns (dimension x size).
  const Matrix& centers() const { return *centers_; }

  bool operator==(const CellSpace& other) const;

 private:
  int dimension_ = 1;
  double finest_side_ = 1.0;
  IntVector lo_;
  IntVector extent_;
  std::size_t size_ = 0;
  std::shared_ptr<const Matrix> centers_;
};

/// Nonnegative weights on the cells of a `CellSpace`; every integral is a
/// finite sum.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  AtomicMeasure(CellSpace space, Vector weights);

  static AtomicMeasure lebesgue(const CellSpace& space);
  /// Independent weights uniform in [lo, hi) times the cell volume.
  static AtomicMeasure random(const CellSpace& space, std::uint64_t seed, double lo = 0.5, double hi = 1.5);
  /// `atoms` cells (chosen without replacement) carry unit-ish mass, the
  /// rest carry none.
  static AtomicMeasure sparse_atoms(const CellSpace& space, std::size_t atoms, std::uint64_t seed);
  /// Weight 2^{-i} on cell i.
  static AtomicMeasure geometric(const CellSpace& space);

  const CellSpace& space() const { return space_; }
  const Vector& weights() const { return weights_; }
  double weight(std::size_t cell) const { return weights_(static_cast<Eigen::Index>(cell)); }
  double total() const { return weights_.sum(); }

  /// Mass of the open ball B(x, r); atoms at cell centres.
  double ball_mass(const Point& x, double r) const;

  /// mu-weighted inner product and norm of cell functions.
  double pairing(const Vector& f, const Vector& g) const;
  double norm_squared(const Vector& f) const;

 private:
  CellSpace space_;
  Vector weights_;
};

/// A grid bound to a measure: Morton-ordered leaf masses, the leaf-to-cell
/// map and per-cube masses. Cells of the grid outside the measure's space
/// carry zero mass.
class GridMeasure {
 public:
  GridMeasure(const Grid& grid, const AtomicMeasure& mu);

  const Grid& grid() const { return grid_; }
  const CellSpace& space() const { return mu_.space(); }
  const AtomicMeasure& measure() const { return mu_; }
  const Vector& leaf_mass() const { return leaf_mass_; }
  /// Cell index of each leaf, or -1 when the leaf is outside the space.
  const std::vector<std::int64_t>& leaf_cells() const { return leaf_cell_; }

  double mass(const Cube& q) const { return cube_mass_[grid_.id(q)]; }
  const std::vector<double>& cube_masses() const { return cube_mass_; }

  Vector to_leaves(const Vector& cell_function) const;
  Vector to_cells(const Vector& leaf_function) const;
  /// Adds a function given on the leaves of `q` into a cell function.
  void scatter(const Cube& q, const Vector& local, Vector& cell_function) const;
  /// Restriction of a leaf function to the leaves of `q`.
  Vector restrict(const Vector& leaf_function, const Cube& q) const;

  /// Per-cube integrals (indexed by cube id) of a leaf function.
  std::vector<double> integrals(const Vector& leaf_function) const;
  double integral(const Vector& leaf_function, const Cube& q) const;
  /// Integral of a function given on the leaves of `support` over q,
  /// which must lie inside `support`.
  double local_integral(const Vector& local, const Cube& support, const Cube& q) const;
  /// Average over q; zero when mu(q) = 0.
  double average(const Vector& leaf_function, const Cube& q) const;
  double norm_squared(const Vector& leaf_function) const;

 private:
  Grid grid_;
  AtomicMeasure mu_;
  std::vector<std::int64_t> leaf_cell_;
  Vector leaf_mass_;
  std::vector<double> cube_mass_;
};

/// Majorant lambda(x, r) of ball masses together with its doubling constant.
struct DominatingFunction {
  std::string name;
  std::function<double(const Point&, double)> lambda;
  double c_lambda = 2.0;

  double operator()(const Point& x, double r) const { return lambda(x, r); }
  /// d = log2 C_lambda.
  double d() const;
  /// gamma = alpha / (2 alpha + 2 d).
  double gamma(double alpha) const;

  /// lambda(x, r) = (2r)^n.
  static DominatingFunction lebesgue(int dimension);
  /// lambda(x, r) = c r^m.
  static DominatingFunction power(double m, double c = 1.0);
  /// lambda(x, r) = r (a + b |x|).
  static DominatingFunction affine(double a = 1.0, double b = 1.0);
  /// Parses "lebesgue", "power:m[:c]" or "affine[:a:b]".
  static DominatingFunction from_spec(const std::string& spec, int dimension);
};

/// Lambda(x, r) = inf_z lambda(z, r + |x - z|) with z ranging over the cell
/// centres of `space` and x itself.
DominatingFunction symmetrize(const DominatingFunction& lam, const CellSpace& space);

struct UpperDoublingReport {
  double worst_ratio = 0.0;
  Point worst_center;
  double worst_radius = 0.0;
  std::size_t checks = 0;
  bool pass = true;
};

/// Radii used for ball sampling: (2^j - 1/2) h, j = 0, 1, ... up to the
/// diameter of the space. Half-integer multiples of h keep ball masses off
/// the atom ties.
std::vector<double> sample_radii(const CellSpace& space);

/// Worst mu(B(x, r)) / lambda(x, r) over sampled cell centres and radii.
UpperDoublingReport verify_upper_doubling(const AtomicMeasure& mu, const DominatingFunction& lam,
                                          std::size_t sample_count, std::uint64_t seed);

struct DoublingReport {
  double constant = 0.0;
  Point witness_center;
  double witness_radius = 0.0;
};

/// Max sampled nu(B(x, 2r)) / nu(B(x, r)) over balls of positive mass. With
/// `interior_only`, only balls whose doubled radius stays in the space box.
DoublingReport doubling_constant(const AtomicMeasure& nu, std::size_t sample_count,
                                 std::uint64_t seed = 0, bool interior_only = false);

/// Centred maximal function at the cell centres: the supremum over balls of
/// positive mass. The radius ladder is the set of centre-to-centre
/// distances, which is exact for the atomic measure.
class MaximalOperator {
 public:
  explicit MaximalOperator(const AtomicMeasure& nu);
  Vector operator()(const Vector& f) const;

 private:
  AtomicMeasure nu_;
  // For each cell, the other cells sorted by distance; `last_` marks the end
  // of each group of equal distances.
  std::vector<std::uint32_t> order_;
  std::vector<std::uint8_t> last_;
};

Vector maximal_function(const AtomicMeasure& nu, const Vector& f);

}  // namespace dytb
