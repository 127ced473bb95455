#pragma once

#include "dytb/accretive.hpp"
#include "dytb/measure.hpp"
#include "dytb/rng.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>

namespace dytb {

template <typename Scalar>
using VectorOf = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixOf = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A kernel K(x, y) off the diagonal, the dominating function it is sized
/// against and the value used for same-cell pairs (times the cell mass).
template <typename Scalar>
struct Kernel {
  std::string name;
  int dimension = 1;
  double alpha = 1.0;
  DominatingFunction lam;
  Scalar diagonal{0};
  std::function<Scalar(const Point&, const Point&)> evaluate;
  /// Tabulated kernel values between cell centres; used by `assemble`
  /// instead of `evaluate` when present.
  std::shared_ptr<const MatrixOf<Scalar>> table;

  Scalar operator()(const Point& x, const Point& y) const { return evaluate(x, y); }
};

using RealKernel = Kernel<double>;

inline RealKernel zero_kernel(int dimension) {
  RealKernel k;
  k.name = "zero";
  k.dimension = dimension;
  k.lam = DominatingFunction::lebesgue(dimension);
  k.evaluate = [](const Point&, const Point&) { return 0.0; };
  return k;
}

/// K(x, y) = 1/(x - y) on the line, sized against lambda(x, r) = r.
inline RealKernel hilbert_kernel() {
  RealKernel k;
  k.name = "hilbert";
  k.lam = DominatingFunction::power(1.0);
  k.evaluate = [](const Point& x, const Point& y) { return 1.0 / (x(0) - y(0)); };
  return k;
}

/// K(x, y) = (x_1 - y_1) / (|x - y|^2 + rho^2)^{(n+1)/2}; bounded at every
/// depth, sized against lambda(x, r) = r^n.
inline RealKernel hilbert_mollified_kernel(double rho, int dimension) {
  require(rho > 0.0, "mollification radius must be positive");
  RealKernel k;
  k.name = "hilbert_mollified:" + std::to_string(rho);
  k.dimension = dimension;
  k.lam = DominatingFunction::power(dimension);
  const double exponent = 0.5 * (dimension + 1);
  k.evaluate = [rho, exponent](const Point& x, const Point& y) {
    const double r2 = (x - y).squaredNorm();
    return (x(0) - y(0)) / std::pow(r2 + rho * rho, exponent);
  };
  return k;
}

/// Kernel values read from a square CSV matrix indexed by cell.
RealKernel custom_matrix_kernel(const std::string& path, const CellSpace& space);

/// Parses "zero", "hilbert", "hilbert_mollified[:rho]" (rho defaults to the
/// cell side) or "custom_matrix:path".
RealKernel kernel_from_spec(const std::string& spec, const CellSpace& space);

/// T f(x_i) = sum_j K_ij mu_j f_j with K_ii = diagonal. The adjoint with
/// respect to the mu-weighted pairing is T* g = K^H (mu g).
template <typename Scalar>
class OperatorMatrix {
 public:
  using Vec = VectorOf<Scalar>;
  using Mat = MatrixOf<Scalar>;

  OperatorMatrix() = default;
  OperatorMatrix(Mat kernel_values, Vector weights, std::string name)
      : kernel_(std::move(kernel_values)), weights_(std::move(weights)), name_(std::move(name)) {
    require(kernel_.rows() == kernel_.cols() && kernel_.rows() == weights_.size(),
            "operator matrix must be square with one weight per cell");
  }

  Eigen::Index size() const { return kernel_.rows(); }
  const Mat& kernel_values() const { return kernel_; }
  const Vector& weights() const { return weights_; }
  const std::string& name() const { return name_; }
  /// Entries K diag(mu).
  Mat matrix() const { return kernel_ * weights_.cast<Scalar>().asDiagonal(); }

  Vec apply(const Vec& f) const {
    require(f.size() == size(), "operator applied to a function of the wrong size");
    return kernel_ * (weights_.cast<Scalar>().array() * f.array()).matrix();
  }
  Vec apply_adjoint(const Vec& g) const {
    require(g.size() == size(), "adjoint applied to a function of the wrong size");
    return kernel_.adjoint() * (weights_.cast<Scalar>().array() * g.array()).matrix();
  }
  /// Column-wise application to several functions at once.
  Mat apply(const Mat& fs) const { return kernel_ * (weights_.cast<Scalar>().asDiagonal() * fs); }
  Mat apply_adjoint(const Mat& gs) const { return kernel_.adjoint() * (weights_.cast<Scalar>().asDiagonal() * gs); }

  /// <f, g>_mu = sum f conj(g) mu.
  Scalar pairing(const Vec& f, const Vec& g) const {
    return (f.array() * g.conjugate().array() * weights_.cast<Scalar>().array()).sum();
  }

 private:
  Mat kernel_;
  Vector weights_;
  std::string name_;
};

using RealOperator = OperatorMatrix<double>;

template <typename Scalar>
OperatorMatrix<Scalar> assemble(const Kernel<Scalar>& kernel, const AtomicMeasure& mu) {
  const CellSpace& space = mu.space();
  const auto n = static_cast<Eigen::Index>(space.size());
  MatrixOf<Scalar> values(n, n);
  if (kernel.table) {
    require(kernel.table->rows() == n && kernel.table->cols() == n, "tabulated kernel does not match the cell space");
    values = *kernel.table;
  } else {
    require(kernel.dimension == space.dimension(), "kernel and measure dimensions differ");
    const Matrix& c = space.centers();
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == j) continue;
        const Scalar v = kernel.evaluate(c.col(i), c.col(j));
        if (!std::isfinite(std::abs(v))) {
          throw Error("kernel '" + kernel.name + "' is not finite between cells " + std::to_string(i) + " and " +
                      std::to_string(j));
        }
        values(i, j) = v;
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) values(i, i) = kernel.diagonal;
  return OperatorMatrix<Scalar>(std::move(values), mu.weights(), kernel.name);
}

struct KernelReport {
  double size_constant = 0.0;
  double x_regularity = 0.0;
  double y_regularity = 0.0;
  std::size_t admissible = 0;
  std::size_t rejected = 0;
  bool pass = true;
};

struct KernelBounds {
  double size = std::numeric_limits<double>::infinity();
  double x_regularity = std::numeric_limits<double>::infinity();
  double y_regularity = std::numeric_limits<double>::infinity();
};

/// Empirical standard-kernel constants over `sample_count` admissible
/// triples: x, y uniform in [lo, hi)^n, x' (and y') uniform in the ball of
/// radius |x - y| about x (about y), kept only when |x - y| >= 2|x - x'|.
template <typename Scalar>
KernelReport verify_standard_kernel(const Kernel<Scalar>& kernel, std::size_t sample_count, std::uint64_t seed,
                                    double lo = 0.0, double hi = 1.0, KernelBounds bounds = {}) {
  require(static_cast<bool>(kernel.evaluate), "kernel cannot be evaluated at points");
  const int n = kernel.dimension;
  Rng rng(seed);
  auto uniform_point = [&] {
    Point p(n);
    for (int i = 0; i < n; ++i) p(i) = rng.uniform(lo, hi);
    return p;
  };
  auto in_ball = [&](const Point& c, double radius) {
    Point dir(n);
    for (int i = 0; i < n; ++i) dir(i) = rng.normal();
    return Point(c + dir.normalized() * radius * std::pow(rng.uniform(), 1.0 / n));
  };
  KernelReport rep;
  while (rep.admissible < sample_count) {
    const Point x = uniform_point();
    const Point y = uniform_point();
    const double d = (x - y).norm();
    if (d == 0.0) continue;
    const Point xp = in_ball(x, d);
    const Point yp = in_ball(y, d);
    const double dx = (x - xp).norm(), dy = (y - yp).norm();
    if (d < 2.0 * dx || d < 2.0 * dy || dx == 0.0 || dy == 0.0) {
      ++rep.rejected;
      continue;
    }
    ++rep.admissible;
    const double lam = kernel.lam(x, d);
    const Scalar k = kernel(x, y);
    rep.size_constant = std::max(rep.size_constant, std::abs(k) * lam);
    const double scale = std::pow(d, kernel.alpha) * lam;
    rep.x_regularity = std::max(rep.x_regularity, std::abs(k - kernel(xp, y)) * scale / std::pow(dx, kernel.alpha));
    rep.y_regularity = std::max(rep.y_regularity, std::abs(k - kernel(x, yp)) * scale / std::pow(dy, kernel.alpha));
  }
  rep.pass = rep.size_constant <= bounds.size && rep.x_regularity <= bounds.x_regularity &&
             rep.y_regularity <= bounds.y_regularity;
  return rep;
}

struct TestingReport {
  double b1_constant = 0.0;  // testing quantity of T b^1_Q
  double b2_constant = 0.0;  // testing quantity of T* b^2_Q
  std::size_t b1_witness = 0;
  std::size_t b2_witness = 0;
  std::size_t skipped = 0;  // zero-mass cubes
  double s = 0.0;
  std::string diagonal_convention;
};

/// sup over cubes of ess-sup_Q |T b_Q| (L-infinity mode) or
/// (mu(Q)^-1 int_Q |T b_Q|^s)^{1/s} (L2 mode); T for b^1 and T* for b^2.
template <typename Scalar>
TestingReport testing_constants(const OperatorMatrix<Scalar>& T, const AccretiveSystem& system, const GridMeasure& gm,
                                double s) {
  const Grid& grid = system.grid;
  require(static_cast<Eigen::Index>(gm.space().size()) == T.size(), "operator and measure sizes differ");
  if (system.mode == AccretiveMode::L2) require(s > 2.0, "L2 testing conditions need s > 2");
  TestingReport rep;
  rep.s = s;
  {
    std::ostringstream conv;
    conv << "diagonal=" << T.kernel_values()(0, 0);
    rep.diagonal_convention = conv.str();
  }
  const auto cells = static_cast<Eigen::Index>(gm.space().size());
  for (int level = 0; level <= grid.depth(); ++level) {
    const auto count = static_cast<Eigen::Index>(grid.cubes_at(level));
    for (int family = 1; family <= 2; ++family) {
      MatrixOf<Scalar> bs = MatrixOf<Scalar>::Zero(cells, count);
      for (Eigen::Index c = 0; c < count; ++c) {
        const Cube q{level, static_cast<std::uint64_t>(c)};
        Vector col = Vector::Zero(cells);
        gm.scatter(q, family == 1 ? system.first(q) : system.second(q), col);
        bs.col(c) = col.cast<Scalar>();
      }
      const MatrixOf<Scalar> tb = family == 1 ? T.apply(bs) : T.apply_adjoint(bs);
      for (Eigen::Index c = 0; c < count; ++c) {
        const Cube q{level, static_cast<std::uint64_t>(c)};
        const double mass = gm.mass(q);
        if (mass <= 0.0) {
          if (family == 1) ++rep.skipped;
          continue;
        }
        const auto first = grid.first_leaf(q);
        double value = 0.0;
        for (std::uint64_t leaf = first; leaf < first + grid.leaf_span(q); ++leaf) {
          const std::int64_t cell = gm.leaf_cells()[leaf];
          const double m = gm.leaf_mass()(static_cast<Eigen::Index>(leaf));
          if (cell < 0 || m <= 0.0) continue;
          const double v = std::abs(tb(cell, c));
          value = system.mode == AccretiveMode::Linf ? std::max(value, v) : value + std::pow(v, s) * m;
        }
        if (system.mode == AccretiveMode::L2) value = std::pow(value / mass, 1.0 / s);
        double& best = family == 1 ? rep.b1_constant : rep.b2_constant;
        std::size_t& witness = family == 1 ? rep.b1_witness : rep.b2_witness;
        if (value > best) {
          best = value;
          witness = grid.id(q);
        }
      }
    }
  }
  return rep;
}

}  // namespace dytb
