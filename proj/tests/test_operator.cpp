#include "dytb/io.hpp"
#include "dytb/operator.hpp"

#include <doctest.h>

#include <algorithm>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numeric>

using namespace dytb;

namespace {

Point at(double x) { return Point::Constant(1, x); }

Vector random_vector(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("zero kernel assembles to the zero matrix") {
  const AtomicMeasure mu = AtomicMeasure::lebesgue(CellSpace::covering(Grid(Point::Zero(2), 0, 2, 2)));
  const RealOperator T = assemble(zero_kernel(2), mu);
  CHECK(T.matrix().isZero(0.0));
}

TEST_CASE("Hilbert kernel on two cells") {
  const AtomicMeasure mu = AtomicMeasure::lebesgue(CellSpace::covering(Grid(at(0.0), 0, 1, 1)));
  const Matrix m = assemble(hilbert_kernel(), mu).matrix();
  CHECK(m(0, 1) == -1.0);
  CHECK(m(1, 0) == 1.0);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(1, 1) == 0.0);
}

TEST_CASE("diagonal conventions") {
  const AtomicMeasure mu = AtomicMeasure::random(CellSpace::covering(Grid(at(0.0), 0, 4, 1)), 3);
  SUBCASE("zero diagonal: T chi_cell vanishes on that cell") {
    const RealOperator T = assemble(hilbert_mollified_kernel(1.0 / 16, 1), mu);
    for (Eigen::Index j = 0; j < 16; ++j) {
      const Vector tf = T.apply(Vector(Vector::Unit(16, j)));
      CHECK(tf(j) == 0.0);
      CHECK((tf - T.kernel_values().col(j) * mu.weights()(j)).norm() == 0.0);
    }
  }
  SUBCASE("zero kernel with diagonal c scales by c mu") {
    RealKernel k = zero_kernel(1);
    k.diagonal = 2.5;
    const RealOperator T = assemble(k, mu);
    Rng rng(1);
    const Vector f = random_vector(rng, 16);
    CHECK((T.apply(f) - (2.5 * mu.weights().array() * f.array()).matrix()).norm() <= 1e-15);
  }
}

TEST_CASE("non-finite kernel values are rejected") {
  RealKernel k = zero_kernel(1);
  k.name = "broken";
  k.evaluate = [](const Point& x, const Point&) { return x(0) > 0.5 ? 1.0 / 0.0 : 1.0; };
  const AtomicMeasure mu = AtomicMeasure::lebesgue(CellSpace::covering(Grid(at(0.0), 0, 2, 1)));
  CHECK_THROWS_WITH_AS(assemble(k, mu), doctest::Contains("not finite"), Error);
}

TEST_CASE("duality and linearity") {
  Rng rng(42);
  const AtomicMeasure mu = AtomicMeasure::random(CellSpace::covering(Grid(Point::Zero(2), 0, 3, 2)), 7);
  const RealOperator T = assemble(hilbert_mollified_kernel(0.125, 2), mu);
  for (int t = 0; t < 20; ++t) {
    const Vector f = random_vector(rng, T.size()), g = random_vector(rng, T.size());
    const double lhs = T.pairing(T.apply(f), g);
    const double rhs = T.pairing(f, T.apply_adjoint(g));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    const double a = rng.normal(), b = rng.normal();
    CHECK((T.apply(Vector(a * f + b * g)) - (a * T.apply(f) + b * T.apply(g))).norm() <=
          1e-13 * T.apply(f).norm() * (std::abs(a) + std::abs(b)));
  }
}

TEST_CASE("complex kernels use the conjugate transpose for the adjoint") {
  using C = std::complex<double>;
  Kernel<C> k;
  k.name = "oscillatory";
  k.lam = DominatingFunction::power(1.0);
  k.diagonal = C(0.5, -1.0);
  k.evaluate = [](const Point& x, const Point& y) { return std::exp(C(0.0, 3.0 * x(0))) / C(x(0) - y(0), 0.25); };
  const AtomicMeasure mu = AtomicMeasure::random(CellSpace::covering(Grid(at(0.0), 0, 5, 1)), 2);
  const OperatorMatrix<C> T = assemble(k, mu);
  Rng rng(9);
  VectorOf<C> f(T.size()), g(T.size());
  for (Eigen::Index i = 0; i < T.size(); ++i) {
    f(i) = C(rng.normal(), rng.normal());
    g(i) = C(rng.normal(), rng.normal());
  }
  const C lhs = T.pairing(T.apply(f), g), rhs = T.pairing(f, T.apply_adjoint(g));
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
}

TEST_CASE("standard kernel verifier") {
  SUBCASE("Hilbert kernel against lambda = r") {
    const auto rep = verify_standard_kernel(hilbert_kernel(), 20000, 3);
    CHECK(rep.admissible == 20000);
    CHECK(rep.size_constant == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.x_regularity <= 2.0);
    CHECK(rep.y_regularity <= 2.0);
    CHECK(rep.x_regularity > 1.5);
  }
  SUBCASE("x-regularity matches |x - y| / |x' - y| on each sample") {
    // Brute force: the regularity ratio for K = 1/(x-y), lambda = r, alpha = 1
    // is exactly |x-y|/|x'-y| <= 2 under the gating.
    Rng rng(4);
    double worst = 0.0;
    for (int t = 0; t < 10000; ++t) {
      const double x = rng.uniform(), y = rng.uniform();
      const double xp = x + rng.uniform(-0.5, 0.5) * std::abs(x - y);
      worst = std::max(worst, std::abs(x - y) / std::abs(xp - y));
    }
    CHECK(worst <= 2.0);
  }
  SUBCASE("zero kernel") {
    const auto rep = verify_standard_kernel(zero_kernel(2), 1000, 3);
    CHECK(rep.size_constant == 0.0);
    CHECK(rep.x_regularity == 0.0);
    CHECK(rep.y_regularity == 0.0);
  }
  SUBCASE("mollified kernel is dominated in 2D") {
    const auto rep = verify_standard_kernel(hilbert_mollified_kernel(0.01, 2), 5000, 5, 0.0, 1.0, {1.0, 10.0, 10.0});
    CHECK(rep.size_constant <= 1.0);
    CHECK(rep.pass);
  }
}

TEST_CASE("kernel specs") {
  const CellSpace s = CellSpace::covering(Grid(at(0.0), 0, 3, 1));
  CHECK(kernel_from_spec("zero", s).name == "zero");
  const RealKernel m = kernel_from_spec("hilbert_mollified", s);
  CHECK(m(at(0.0), at(0.125)) == doctest::Approx(-0.125 / (2.0 * 0.125 * 0.125)));
  CHECK(kernel_from_spec("hilbert_mollified:0.5", s)(at(0.0), at(0.5)) == doctest::Approx(-0.5 / 0.5));
  CHECK_THROWS_AS(kernel_from_spec("riesz", s), Error);
  CHECK_THROWS_AS(kernel_from_spec("hilbert_mollified:abc", s), Error);
  CHECK_THROWS_AS(kernel_from_spec("hilbert", CellSpace::covering(Grid(Point::Zero(2), 0, 2, 2))), Error);
}

TEST_CASE("custom matrix kernel") {
  const CellSpace s = CellSpace::covering(Grid(at(0.0), 0, 2, 1));
  Matrix table(4, 4);
  table << 0.5, 1, 2, 3, -1, 0.5, 4, 5, -2, -4, 0.5, 6, -3, -5, -6, 0.5;
  const std::string path = "custom_kernel_test.csv";
  {
    std::ofstream out(path);
    write_matrix_csv(table, out);
  }
  const RealKernel k = kernel_from_spec("custom_matrix:" + path, s);
  const RealOperator T = assemble(k, AtomicMeasure::lebesgue(s));
  CHECK((T.kernel_values() - table).norm() == 0.0);
  CHECK(k(s.center(1), s.center(2)) == 4.0);
  std::remove(path.c_str());
  CHECK_THROWS_AS(kernel_from_spec("custom_matrix:missing.csv", s), Error);
}

TEST_CASE("testing constants") {
  const Grid g(at(0.0), 0, 5, 1);
  const AtomicMeasure mu = AtomicMeasure::lebesgue(CellSpace::covering(g));
  const GridMeasure gm(g, mu);
  SUBCASE("zero kernel gives zero") {
    const auto rep = testing_constants(assemble(zero_kernel(1), mu), t1_system(g), gm, 4.0);
    CHECK(rep.b1_constant == 0.0);
    CHECK(rep.b2_constant == 0.0);
  }
  SUBCASE("sup over cubes does not depend on enumeration order") {
    const RealOperator T = assemble(hilbert_mollified_kernel(g.finest_side(), 1), mu);
    for (const AccretiveSystem& sys : {t1_system(g), random_bounded_system(gm, 0.5, 3)}) {
      AccretiveSystem l2 = sys;
      l2.mode = AccretiveMode::L2;
      for (const AccretiveSystem* s : std::initializer_list<const AccretiveSystem*>{&sys, &l2}) {
        const auto rep = testing_constants(T, *s, gm, 4.0);
        std::vector<std::size_t> order(g.cube_count());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(5);
        rng.shuffle(order);
        double best1 = 0.0, best2 = 0.0;
        for (std::size_t id : order) {
          const Cube q = g.cube(id);
          const Vector t1 = gm.to_leaves(T.apply(gm.to_cells(s->extended(s->b1, q))));
          const Vector t2 = gm.to_leaves(T.apply_adjoint(gm.to_cells(s->extended(s->b2, q))));
          const Vector r1 = gm.restrict(t1, q).cwiseAbs(), r2 = gm.restrict(t2, q).cwiseAbs();
          if (s->mode == AccretiveMode::Linf) {
            best1 = std::max(best1, r1.maxCoeff());
            best2 = std::max(best2, r2.maxCoeff());
          } else {
            const Vector m = gm.restrict(gm.leaf_mass(), q);
            best1 = std::max(best1, std::pow(r1.array().pow(4.0).matrix().dot(m) / gm.mass(q), 0.25));
            best2 = std::max(best2, std::pow(r2.array().pow(4.0).matrix().dot(m) / gm.mass(q), 0.25));
          }
        }
        CHECK(rep.b1_constant == doctest::Approx(best1).epsilon(1e-12));
        CHECK(rep.b2_constant == doctest::Approx(best2).epsilon(1e-12));
        CHECK(rep.b1_constant > 0.0);
      }
    }
  }
  SUBCASE("L2 mode needs s > 2") {
    AccretiveSystem sys = t1_system(g);
    sys.mode = AccretiveMode::L2;
    CHECK_THROWS_AS(testing_constants(assemble(zero_kernel(1), mu), sys, gm, 2.0), Error);
  }
}

TEST_CASE("quadrature refinement trend for the mollified Hilbert model") {
  // <T f, g> for smooth f, g; successive differences should shrink.
  std::vector<double> values;
  for (int depth = 5; depth <= 9; ++depth) {
    const Grid g(at(0.0), 0, depth, 1);
    const CellSpace s = CellSpace::covering(g);
    const AtomicMeasure mu = AtomicMeasure::lebesgue(s);
    const RealOperator T = assemble(hilbert_mollified_kernel(g.finest_side(), 1), mu);
    Vector f(T.size()), h(T.size());
    for (Eigen::Index i = 0; i < T.size(); ++i) {
      const double x = s.center(static_cast<std::size_t>(i))(0);
      f(i) = std::sin(2.0 * M_PI * x);
      h(i) = std::cos(2.0 * M_PI * x) * x;
    }
    values.push_back(T.pairing(T.apply(f), h));
  }
  for (std::size_t i = 2; i < values.size(); ++i) {
    MESSAGE("depth " << i + 5 << ": <Tf,g> = " << values[i]);
    CHECK(std::abs(values[i] - values[i - 1]) < std::abs(values[i - 1] - values[i - 2]));
  }
}
