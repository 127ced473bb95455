#include "dytb/measure.hpp"

#include "dytb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dytb {

CellSpace::CellSpace(int dimension, double finest_side, IntVector lo, IntVector extent)
    : dimension_(dimension), finest_side_(finest_side), lo_(std::move(lo)), extent_(std::move(extent)) {
  require(dimension >= 1 && dimension <= Grid::kMaxDimension, "cell space dimension must be in 1..3");
  require(finest_side > 0.0, "cell side must be positive");
  require(lo_.size() == dimension && extent_.size() == dimension, "cell box must have one entry per axis");
  size_ = 1;
  for (int i = 0; i < dimension; ++i) {
    require(extent_(i) >= 1, "cell box must be nonempty");
    size_ *= static_cast<std::size_t>(extent_(i));
  }
  auto centers = std::make_shared<Matrix>(dimension, static_cast<Eigen::Index>(size_));
  for (std::size_t c = 0; c < size_; ++c) {
    centers->col(static_cast<Eigen::Index>(c)) = (cell(c).cast<double>().array() + 0.5) * finest_side_;
  }
  centers_ = std::move(centers);
}

CellSpace CellSpace::covering(const Grid& grid) {
  const IntVector extent = IntVector::Constant(grid.dimension(), grid.side_cells(0));
  return CellSpace(grid.dimension(), grid.finest_side(), grid.corner(), extent);
}

CellSpace CellSpace::covering(const Grid& a, const Grid& b) {
  require(a.compatible(b), "grids do not share their finest cells");
  const CellBox ba = a.top_box(), bb = b.top_box();
  const IntVector lo = ba.lo.cwiseMin(bb.lo);
  const IntVector hi = ba.hi.cwiseMax(bb.hi);
  return CellSpace(a.dimension(), a.finest_side(), lo, hi - lo);
}

IntVector CellSpace::cell(std::size_t linear) const {
  IntVector c(dimension_);
  for (int i = 0; i < dimension_; ++i) {
    const auto e = static_cast<std::size_t>(extent_(i));
    c(i) = lo_(i) + static_cast<std::int64_t>(linear % e);
    linear /= e;
  }
  return c;
}

std::optional<std::size_t> CellSpace::linear(const IntVector& cell) const {
  std::size_t index = 0;
  std::size_t stride = 1;
  for (int i = 0; i < dimension_; ++i) {
    const std::int64_t local = cell(i) - lo_(i);
    if (local < 0 || local >= extent_(i)) return std::nullopt;
    index += static_cast<std::size_t>(local) * stride;
    stride *= static_cast<std::size_t>(extent_(i));
  }
  return index;
}

Point CellSpace::center(std::size_t linear) const { return centers_->col(static_cast<Eigen::Index>(linear)); }

bool CellSpace::operator==(const CellSpace& other) const {
  return dimension_ == other.dimension_ && finest_side_ == other.finest_side_ && lo_ == other.lo_ &&
         extent_ == other.extent_;
}

AtomicMeasure::AtomicMeasure(CellSpace space, Vector weights) : space_(std::move(space)), weights_(std::move(weights)) {
  require(static_cast<std::size_t>(weights_.size()) == space_.size(), "measure needs one weight per cell");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    require(std::isfinite(weights_(i)) && weights_(i) >= 0.0, "measure weights must be finite and nonnegative");
  }
}

namespace {

double cell_volume(const CellSpace& space) { return std::pow(space.finest_side(), space.dimension()); }

// Squared distances from `x` to every cell centre.
Vector squared_distances(const CellSpace& space, const Point& x) {
  return (space.centers().colwise() - x).colwise().squaredNorm().transpose();
}

}  // namespace

AtomicMeasure AtomicMeasure::lebesgue(const CellSpace& space) {
  return AtomicMeasure(space, Vector::Constant(static_cast<Eigen::Index>(space.size()), cell_volume(space)));
}

AtomicMeasure AtomicMeasure::random(const CellSpace& space, std::uint64_t seed, double lo, double hi) {
  require(lo >= 0.0 && hi >= lo, "random weights need 0 <= lo <= hi");
  Rng rng(seed);
  Vector w(static_cast<Eigen::Index>(space.size()));
  const double vol = cell_volume(space);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(lo, hi) * vol;
  return AtomicMeasure(space, w);
}

AtomicMeasure AtomicMeasure::sparse_atoms(const CellSpace& space, std::size_t atoms, std::uint64_t seed) {
  require(atoms <= space.size(), "more atoms than cells");
  Rng rng(seed);
  std::vector<std::size_t> cells(space.size());
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  rng.shuffle(cells);
  Vector w = Vector::Zero(static_cast<Eigen::Index>(space.size()));
  const double unit = 1.0 / static_cast<double>(std::max<std::size_t>(atoms, 1));
  for (std::size_t i = 0; i < atoms; ++i) w(static_cast<Eigen::Index>(cells[i])) = rng.uniform(0.5, 1.5) * unit;
  return AtomicMeasure(space, w);
}

AtomicMeasure AtomicMeasure::geometric(const CellSpace& space) {
  Vector w(static_cast<Eigen::Index>(space.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = std::ldexp(1.0, -static_cast<int>(std::min<Eigen::Index>(i, 1070)));
  return AtomicMeasure(space, w);
}

double AtomicMeasure::ball_mass(const Point& x, double r) const {
  const Vector d2 = squared_distances(space_, x);
  const double r2 = r * r;
  double mass = 0.0;
  for (Eigen::Index i = 0; i < d2.size(); ++i) {
    if (d2(i) < r2) mass += weights_(i);
  }
  return mass;
}

double AtomicMeasure::pairing(const Vector& f, const Vector& g) const {
  require(f.size() == weights_.size() && g.size() == weights_.size(), "cell function size mismatch");
  return (f.array() * g.array() * weights_.array()).sum();
}

double AtomicMeasure::norm_squared(const Vector& f) const { return pairing(f, f); }

GridMeasure::GridMeasure(const Grid& grid, const AtomicMeasure& mu) : grid_(grid), mu_(mu) {
  require(grid.dimension() == space().dimension(), "grid and measure dimensions differ");
  require(grid.finest_side() == space().finest_side(), "grid and measure cell sides differ");
  const auto leaves = static_cast<std::size_t>(grid.leaf_count());
  leaf_cell_.assign(leaves, -1);
  leaf_mass_ = Vector::Zero(static_cast<Eigen::Index>(leaves));
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    const IntVector cell = grid.corner() + morton_decode(leaf, grid.dimension());
    if (auto c = space().linear(cell)) {
      leaf_cell_[leaf] = static_cast<std::int64_t>(*c);
      leaf_mass_(static_cast<Eigen::Index>(leaf)) = mu.weight(*c);
    }
  }
  cube_mass_ = integrals(Vector::Ones(static_cast<Eigen::Index>(leaves)));
}

Vector GridMeasure::to_leaves(const Vector& cell_function) const {
  require(static_cast<std::size_t>(cell_function.size()) == space().size(), "cell function size mismatch");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(leaf_cell_.size()));
  for (std::size_t leaf = 0; leaf < leaf_cell_.size(); ++leaf) {
    if (leaf_cell_[leaf] >= 0) out(static_cast<Eigen::Index>(leaf)) = cell_function(leaf_cell_[leaf]);
  }
  return out;
}

Vector GridMeasure::to_cells(const Vector& leaf_function) const {
  require(static_cast<std::size_t>(leaf_function.size()) == leaf_cell_.size(), "leaf function size mismatch");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(space().size()));
  for (std::size_t leaf = 0; leaf < leaf_cell_.size(); ++leaf) {
    if (leaf_cell_[leaf] >= 0) out(leaf_cell_[leaf]) = leaf_function(static_cast<Eigen::Index>(leaf));
  }
  return out;
}

void GridMeasure::scatter(const Cube& q, const Vector& local, Vector& cell_function) const {
  const auto first = grid_.first_leaf(q);
  require(static_cast<std::uint64_t>(local.size()) == grid_.leaf_span(q), "local function size mismatch");
  for (Eigen::Index i = 0; i < local.size(); ++i) {
    const std::int64_t c = leaf_cell_[first + static_cast<std::uint64_t>(i)];
    if (c >= 0) cell_function(c) += local(i);
  }
}

Vector GridMeasure::restrict(const Vector& leaf_function, const Cube& q) const {
  return leaf_function.segment(static_cast<Eigen::Index>(grid_.first_leaf(q)),
                               static_cast<Eigen::Index>(grid_.leaf_span(q)));
}

std::vector<double> GridMeasure::integrals(const Vector& leaf_function) const {
  require(static_cast<std::size_t>(leaf_function.size()) == leaf_cell_.size(), "leaf function size mismatch");
  std::vector<double> out(grid_.cube_count(), 0.0);
  const int depth = grid_.depth();
  const std::size_t finest = grid_.level_offset(depth);
  for (Eigen::Index i = 0; i < leaf_function.size(); ++i) {
    out[finest + static_cast<std::size_t>(i)] = leaf_function(i) * leaf_mass_(i);
  }
  const auto children = static_cast<std::size_t>(grid_.child_count());
  for (int level = depth - 1; level >= 0; --level) {
    const std::size_t offset = grid_.level_offset(level);
    const std::size_t below = grid_.level_offset(level + 1);
    for (std::size_t c = 0; c < grid_.cubes_at(level); ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < children; ++k) s += out[below + c * children + k];
      out[offset + c] = s;
    }
  }
  return out;
}

double GridMeasure::integral(const Vector& leaf_function, const Cube& q) const {
  const auto first = static_cast<Eigen::Index>(grid_.first_leaf(q));
  const auto span = static_cast<Eigen::Index>(grid_.leaf_span(q));
  return leaf_function.segment(first, span).dot(leaf_mass_.segment(first, span));
}

double GridMeasure::local_integral(const Vector& local, const Cube& support, const Cube& q) const {
  const auto base = static_cast<Eigen::Index>(grid_.first_leaf(support));
  const auto first = static_cast<Eigen::Index>(grid_.first_leaf(q));
  const auto span = static_cast<Eigen::Index>(grid_.leaf_span(q));
  return local.segment(first - base, span).dot(leaf_mass_.segment(first, span));
}

double GridMeasure::average(const Vector& leaf_function, const Cube& q) const {
  const double m = mass(q);
  return m > 0.0 ? integral(leaf_function, q) / m : 0.0;
}

double GridMeasure::norm_squared(const Vector& leaf_function) const {
  return (leaf_function.array().square() * leaf_mass_.array()).sum();
}

double DominatingFunction::d() const { return std::log2(c_lambda); }

double DominatingFunction::gamma(double alpha) const { return alpha / (2.0 * alpha + 2.0 * d()); }

DominatingFunction DominatingFunction::lebesgue(int dimension) {
  return {"lebesgue", [dimension](const Point&, double r) { return std::pow(2.0 * r, dimension); },
          std::ldexp(1.0, dimension)};
}

DominatingFunction DominatingFunction::power(double m, double c) {
  require(m > 0.0 && c > 0.0, "power model needs positive exponent and constant");
  return {"power:" + std::to_string(m), [m, c](const Point&, double r) { return c * std::pow(r, m); },
          std::pow(2.0, m)};
}

DominatingFunction DominatingFunction::affine(double a, double b) {
  require(a > 0.0 && b >= 0.0, "affine model needs a > 0 and b >= 0");
  return {"affine", [a, b](const Point& x, double r) { return r * (a + b * x.norm()); }, 2.0};
}

DominatingFunction DominatingFunction::from_spec(const std::string& spec, int dimension) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  auto number = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw Error("");
      return v;
    } catch (...) {
      throw Error("invalid number '" + parts[i] + "' in dominating function '" + spec + "'");
    }
  };
  const std::string& name = parts[0];
  if (name == "lebesgue" && parts.size() == 1) return lebesgue(dimension);
  if (name == "power" && (parts.size() == 2 || parts.size() == 3)) {
    return power(number(1), parts.size() == 3 ? number(2) : 1.0);
  }
  if (name == "affine" && (parts.size() == 1 || parts.size() == 3)) {
    return parts.size() == 3 ? affine(number(1), number(2)) : affine();
  }
  throw Error("unknown dominating function '" + spec + "' (expected lebesgue, power:m[:c] or affine[:a:b])");
}

DominatingFunction symmetrize(const DominatingFunction& lam, const CellSpace& space) {
  auto centers = std::make_shared<Matrix>(space.centers());
  auto base = lam.lambda;
  DominatingFunction out;
  out.name = "sym(" + lam.name + ")";
  out.c_lambda = lam.c_lambda;
  out.lambda = [centers, base](const Point& x, double r) {
    double best = base(x, r);
    for (Eigen::Index j = 0; j < centers->cols(); ++j) {
      const Point z = centers->col(j);
      best = std::min(best, base(z, r + (x - z).norm()));
    }
    return best;
  };
  return out;
}

std::vector<double> sample_radii(const CellSpace& space) {
  const double h = space.finest_side();
  const double diameter = h * std::sqrt(static_cast<double>(space.extent().squaredNorm()));
  std::vector<double> radii;
  for (int j = 0;; ++j) {
    const double r = (std::ldexp(1.0, j) - 0.5) * h;
    radii.push_back(r);
    if (r > diameter) break;
  }
  return radii;
}

namespace {

std::vector<std::size_t> sample_cells(const CellSpace& space, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> cells;
  if (count >= space.size()) {
    cells.resize(space.size());
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    return cells;
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) cells.push_back(static_cast<std::size_t>(rng.below(space.size())));
  return cells;
}

// Open-ball masses about one centre for an increasing list of radii.
class BallMasses {
 public:
  BallMasses(const AtomicMeasure& mu, const Point& x) {
    const Vector d2 = squared_distances(mu.space(), x);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d2.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return d2(a) < d2(b); });
    d2_.reserve(order.size());
    prefix_.reserve(order.size() + 1);
    prefix_.push_back(0.0);
    for (auto i : order) {
      d2_.push_back(d2(i));
      prefix_.push_back(prefix_.back() + mu.weights()(i));
    }
  }
  double operator()(double r) const {
    const auto it = std::lower_bound(d2_.begin(), d2_.end(), r * r);
    return prefix_[static_cast<std::size_t>(it - d2_.begin())];
  }

 private:
  std::vector<double> d2_;
  std::vector<double> prefix_;
};

}  // namespace

UpperDoublingReport verify_upper_doubling(const AtomicMeasure& mu, const DominatingFunction& lam,
                                          std::size_t sample_count, std::uint64_t seed) {
  require(sample_count >= 1, "upper doubling check needs at least one sample");
  const CellSpace& space = mu.space();
  const auto radii = sample_radii(space);
  UpperDoublingReport report;
  report.worst_center = space.center(0);
  for (std::size_t c : sample_cells(space, sample_count, seed)) {
    const Point x = space.center(c);
    const BallMasses masses(mu, x);
    for (double r : radii) {
      const double ratio = masses(r) / lam(x, r);
      ++report.checks;
      if (ratio > report.worst_ratio) {
        report.worst_ratio = ratio;
        report.worst_center = x;
        report.worst_radius = r;
      }
    }
  }
  report.pass = report.worst_ratio <= 1.0 + kIdentityTolerance;
  return report;
}

DoublingReport doubling_constant(const AtomicMeasure& nu, std::size_t sample_count, std::uint64_t seed,
                                 bool interior_only) {
  require(sample_count >= 1, "doubling check needs at least one sample");
  const CellSpace& space = nu.space();
  const double h = space.finest_side();
  const auto radii = sample_radii(space);
  DoublingReport report;
  report.witness_center = space.center(0);
  for (std::size_t c : sample_cells(space, sample_count, seed)) {
    const Point x = space.center(c);
    const BallMasses masses(nu, x);
    for (double r : radii) {
      if (interior_only) {
        bool inside = true;
        for (int i = 0; i < space.dimension(); ++i) {
          const double lo = static_cast<double>(space.lo()(i)) * h;
          const double hi = static_cast<double>(space.lo()(i) + space.extent()(i)) * h;
          if (x(i) - 2.0 * r < lo || x(i) + 2.0 * r > hi) inside = false;
        }
        if (!inside) continue;
      }
      const double small = masses(r);
      if (small <= 0.0) continue;
      const double ratio = masses(2.0 * r) / small;
      if (ratio > report.constant) {
        report.constant = ratio;
        report.witness_center = x;
        report.witness_radius = r;
      }
    }
  }
  return report;
}

MaximalOperator::MaximalOperator(const AtomicMeasure& nu) : nu_(nu) {
  const CellSpace& space = nu.space();
  const std::size_t n = space.size();
  require(n <= (std::size_t{1} << 13), "maximal operator limited to 8192 cells");
  order_.resize(n * n);
  last_.resize(n * n);
  std::vector<IntVector> cells(n);
  for (std::size_t c = 0; c < n; ++c) cells[c] = space.cell(c);
  std::vector<std::int64_t> d2(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) d2[y] = (cells[x] - cells[y]).squaredNorm();
    auto* row = order_.data() + x * n;
    std::iota(row, row + n, std::uint32_t{0});
    std::stable_sort(row, row + n, [&](std::uint32_t a, std::uint32_t b) { return d2[a] < d2[b]; });
    for (std::size_t i = 0; i < n; ++i) {
      last_[x * n + i] = (i + 1 == n || d2[row[i + 1]] != d2[row[i]]) ? 1 : 0;
    }
  }
}

Vector MaximalOperator::operator()(const Vector& f) const {
  const std::size_t n = nu_.space().size();
  require(static_cast<std::size_t>(f.size()) == n, "cell function size mismatch");
  const Vector& w = nu_.weights();
  Vector out = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    double mass = 0.0, integral = 0.0, best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = static_cast<Eigen::Index>(order_[x * n + i]);
      mass += w(y);
      integral += std::abs(f(y)) * w(y);
      if (last_[x * n + i] && mass > 0.0) best = std::max(best, integral / mass);
    }
    out(static_cast<Eigen::Index>(x)) = best;
  }
  return out;
}

Vector maximal_function(const AtomicMeasure& nu, const Vector& f) { return MaximalOperator(nu)(f); }

}  // namespace dytb
