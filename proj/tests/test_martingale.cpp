#include "dytb/martingale.hpp"
#include "dytb/rng.hpp"
#include "dytb/stopping.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace dytb;

namespace {

Point at(double x) { return Point::Constant(1, x); }

Vector random_leaf_function(const Grid& g, Rng& rng) {
  Vector f(static_cast<Eigen::Index>(g.leaf_count()));
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.normal();
  return f;
}

Vector indicator(const Grid& g, const Cube& q) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(g.leaf_count()));
  v.segment(static_cast<Eigen::Index>(g.first_leaf(q)), static_cast<Eigen::Index>(g.leaf_span(q))).setOnes();
  return v;
}

// Delta_Q f from full-length functions and GridMeasure averages only.
Vector oracle_delta(const AccretiveSystem& sys, const StoppingForest& forest, const GridMeasure& gm, const Cube& q,
                    const Vector& f) {
  const Grid& g = gm.grid();
  Vector out = Vector::Zero(static_cast<Eigen::Index>(g.leaf_count()));
  const Cube qa = forest.ancestor(q);
  const Vector ba = sys.extended(sys.b1, qa);
  for (const Cube& c : g.children(q)) {
    if (gm.mass(c) <= 0.0) continue;
    const Vector bc = sys.extended(sys.b1, forest.ancestor(c));
    const Vector chi = indicator(g, c);
    out += ((gm.average(f, c) / gm.average(bc, c)) * bc - (gm.average(f, q) / gm.average(ba, q)) * ba)
               .cwiseProduct(chi);
  }
  return out;
}

// E_k f / E_k b^a_k times b^a_k, assembled as whole functions.
Vector oracle_expectation(const AccretiveSystem& sys, const StoppingForest& forest, const GridMeasure& gm, int k,
                          const Vector& f) {
  const Grid& g = gm.grid();
  const auto n = static_cast<Eigen::Index>(g.leaf_count());
  Vector ba = Vector::Zero(n), ef = Vector::Zero(n), eb = Vector::Zero(n);
  for (std::uint64_t code = 0; code < g.cubes_at(k); ++code) {
    const Cube q{k, code};
    const Vector chi = indicator(g, q);
    ba += sys.extended(sys.b1, forest.ancestor(q)).cwiseProduct(chi);
  }
  for (std::uint64_t code = 0; code < g.cubes_at(k); ++code) {
    const Cube q{k, code};
    const Vector chi = indicator(g, q);
    ef += gm.average(f, q) * chi;
    eb += gm.average(ba, q) * chi;
  }
  Vector out = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eb(i) != 0.0) out(i) = ef(i) / eb(i) * ba(i);
  }
  return out;
}

double massive_max(const Vector& v, const GridMeasure& gm) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (gm.leaf_mass()(i) > 0.0) m = std::max(m, std::abs(v(i)));
  }
  return m;
}

struct Setup {
  Grid grid;
  GridMeasure gm;
  AccretiveSystem system;
  StoppingForest forest;
};

// Systems over 1D depth 10 and 2D depth 4, with stopping forests.
std::vector<Setup> setups() {
  std::vector<Setup> out;
  for (int dim = 1; dim <= 2; ++dim) {
    const Grid g(Point::Constant(dim, dim == 1 ? 0.0 : -0.25), 0, dim == 1 ? 10 : 4, dim);
    const CellSpace s = CellSpace::covering(g);
    for (const AtomicMeasure& mu :
         {AtomicMeasure::lebesgue(s), AtomicMeasure::random(s, 3), AtomicMeasure::sparse_atoms(s, s.size() / 3, 4)}) {
      const GridMeasure gm(g, mu);
      AccretiveSystem t1 = t1_system(g);
      out.push_back({g, gm, t1, StoppingForest::trivial(g)});
      AccretiveSystem rb = random_bounded_system(gm, 0.5, 11);
      out.push_back({g, gm, rb, build_linf(rb, gm)});
      AccretiveSystem bs = block_sign_system(gm, 1.8, 12);
      StoppingForest f = build_linf(bs, gm);
      out.push_back({g, gm, bs, f});
    }
  }
  const Grid g(at(0.0), 0, 10, 1);
  const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  auto cx = counterexample_system(10, g);
  out.push_back({g, gm, cx.system, cx.forest});
  return out;
}

}  // namespace

TEST_CASE("t1 differences are Haar differences") {
  const Grid g(at(0.0), 0, 5, 1);
  const GridMeasure gm(g, AtomicMeasure::random(CellSpace::covering(g), 2));
  const AccretiveSystem sys = t1_system(g);
  const StoppingForest forest = StoppingForest::trivial(g);
  const Martingale mg(sys, forest, gm);
  Rng rng(1);
  const Vector f = random_leaf_function(g, rng);
  for (std::size_t id = 0; id < g.level_offset(g.depth()); ++id) {
    const Cube q = g.cube(id);
    const Vector d = mg.delta(q, f);
    for (const Cube& c : g.children(q)) {
      const double expected = gm.average(f, c) - gm.average(f, q);
      const auto seg = d.segment(static_cast<Eigen::Index>(g.first_leaf(c) - g.first_leaf(q)),
                                 static_cast<Eigen::Index>(g.leaf_span(c)));
      CHECK((seg.array() - expected).abs().maxCoeff() <= 1e-13);
    }
  }

  const GridMeasure leb(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  const Martingale haar(sys, forest, leb);
  const Vector half = indicator(g, Cube{1, 0});
  const Vector d = haar.delta(g.top(), half);
  CHECK((d.head(16).array() - 0.5).abs().maxCoeff() == 0.0);
  CHECK((d.tail(16).array() + 0.5).abs().maxCoeff() == 0.0);
  CHECK(haar.delta(Cube{5, 3}, half) == Vector::Zero(1));
}

TEST_CASE("delta matches the defining formula") {
  for (const Setup& s : setups()) {
    const Martingale mg(s.system, s.forest, s.gm);
    Rng rng(7);
    const Vector f = random_leaf_function(s.grid, rng);
    for (std::size_t id = 0; id < s.grid.level_offset(s.grid.depth()); id += 3) {
      const Cube q = s.grid.cube(id);
      const Vector expected = oracle_delta(s.system, s.forest, s.gm, q, f);
      const Vector d = mg.delta(q, f);
      const auto seg = expected.segment(static_cast<Eigen::Index>(s.grid.first_leaf(q)), d.size());
      CHECK((d - seg).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, seg.lpNorm<Eigen::Infinity>()));
      CHECK((expected.norm() - seg.norm()) == doctest::Approx(0.0));  // supported in Q
    }
  }
}

TEST_CASE("adjoint duality on every cube") {
  for (const Setup& s : setups()) {
    const Martingale mg(s.system, s.forest, s.gm);
    Rng rng(8);
    const Vector f = random_leaf_function(s.grid, rng), g = random_leaf_function(s.grid, rng);
    const Vector m = s.gm.leaf_mass();
    for (std::size_t id = 0; id < s.grid.level_offset(s.grid.depth()); ++id) {
      const Cube q = s.grid.cube(id);
      const auto first = static_cast<Eigen::Index>(s.grid.first_leaf(q));
      const auto n = static_cast<Eigen::Index>(s.grid.leaf_span(q));
      const Vector d = mg.delta(q, f), da = mg.delta_adjoint(q, g);
      const auto mq = m.segment(first, n).array();
      const double lhs = (d.array() * g.segment(first, n).array() * mq).sum();
      const double rhs = (f.segment(first, n).array() * da.array() * mq).sum();
      const double scale = (d.array() * g.segment(first, n).array() * mq).abs().sum() +
                           (f.segment(first, n).array() * da.array() * mq).abs().sum();
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(scale, 1e-300));
    }
  }
}

TEST_CASE("reconstruction at full depth and truncation") {
  for (const Setup& s : setups()) {
    const Martingale mg(s.system, s.forest, s.gm);
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector f = random_leaf_function(s.grid, rng);
      const auto c = mg.decompose(f);
      const Vector back = mg.reconstruct(c);
      CHECK(massive_max(back - f, s.gm) <= 1e-12 * massive_max(f, s.gm));
    }
    const Vector f = random_leaf_function(s.grid, rng);
    for (int k = 0; k <= s.grid.depth(); ++k) {
      const Vector partial = mg.reconstruct(mg.decompose(f, k));
      const Vector expected = oracle_expectation(s.system, s.forest, s.gm, k, f);
      CHECK(massive_max(partial - expected, s.gm) <= 1e-12 * std::max(massive_max(expected, s.gm), 1e-300));
      CHECK(massive_max(mg.expectation(k, f) - expected, s.gm) <= 1e-12 * std::max(massive_max(expected, s.gm), 1e-300));
    }
  }
}

TEST_CASE("the top test function is a fixed point") {
  const Grid g(at(0.0), 0, 8, 1);
  const GridMeasure gm(g, AtomicMeasure::random(CellSpace::covering(g), 5));
  const AccretiveSystem sys = random_bounded_system(gm, 0.5, 3);
  const StoppingForest forest = StoppingForest::trivial(g);
  const Martingale mg(sys, forest, gm);
  const Vector b = sys.b1[0];
  CHECK((mg.top_term(b) - b).lpNorm<Eigen::Infinity>() <= 1e-14);
  const auto c = mg.decompose(b);
  for (std::size_t id = 0; id < g.level_offset(g.depth()); ++id) CHECK(c.deltas[id].lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK(mg.square_function_ratio(b) <= 1e-28);
}

TEST_CASE("square function ratios") {
  SUBCASE("t1 is orthogonal") {
    const Grid g(at(0.0), 0, 8, 1);
    const GridMeasure gm(g, AtomicMeasure::random(CellSpace::covering(g), 6));
    const AccretiveSystem sys = t1_system(g);
    const StoppingForest forest = StoppingForest::trivial(g);
    const Martingale mg(sys, forest, gm);
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector f = random_leaf_function(g, rng);
      const double r = mg.square_function_ratio(f);
      const double avg = gm.average(f, g.top());
      CHECK(r <= 1.0);
      CHECK(r == doctest::Approx(1.0 - avg * avg * gm.mass(g.top()) / gm.norm_squared(f)).epsilon(1e-12));
      CHECK(mg.restricted_dual_ratio(g.top(), f) == doctest::Approx(mg.dual_square_sum(f) / gm.norm_squared(f)));
      CHECK(mg.restricted_dual_ratio(g.top(), f) <= 1.0);
    }
    CHECK_THROWS_AS(mg.square_function_ratio(Vector::Zero(256)), Error);
  }

  SUBCASE("random bounded systems stay bounded") {
    for (int depth = 6; depth <= 10; depth += 2) {
      const Grid g(at(0.0), 0, depth, 1);
      const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
      double worst = 0.0;
      Rng rng(derive_seed(5, static_cast<std::uint64_t>(depth)));
      for (int trial = 0; trial < 100; ++trial) {
        const AccretiveSystem sys = random_bounded_system(gm, 0.5, rng.below(1000000));
        const StoppingForest forest = build_linf(sys, gm);
        const Martingale mg(sys, forest, gm);
        worst = std::max(worst, mg.square_function_ratio(random_leaf_function(g, rng)));
      }
      CHECK(worst <= 20.0);
      MESSAGE("depth ", depth, " worst square function ratio ", worst);
    }
  }
}

TEST_CASE("restricted dual ratio on the counterexample") {
  const int N = 10;
  const Grid g(at(0.0), 0, N, 1);
  const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  const auto cx = counterexample_system(N, g);
  const Martingale mg(cx.system, cx.forest, gm);
  Vector f = Vector::Zero(1024);
  f(0) = std::pow(2.0, 0.5 * N);
  double sum = 0.0;
  for (int j = 0; j <= N; ++j) {
    const double r = mg.restricted_dual_ratio(Cube{j, 0}, f);
    CHECK(std::isfinite(r));
    sum += r * gm.norm_squared(f);  // chi_{Q_j} f = f
  }
  CHECK(sum == doctest::Approx(mg.dual_square_sum(f)).epsilon(1e-12));
  Vector off = Vector::Zero(1024);
  off(1023) = 1.0;
  CHECK_THROWS_AS(mg.restricted_dual_ratio(Cube{1, 0}, off), Error);
  CHECK_THROWS_AS(mg.restricted_dual_ratio(Cube{1, 1}, f), Error);
}

TEST_CASE("counterexample dual growth") {
  const DualGrowth two = counterexample_dual_growth(2);
  CHECK(two.A[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(two.A[1] == doctest::Approx(1.1715728752538097).epsilon(1e-14));
  CHECK(two.A[2] == doctest::Approx(2.0).epsilon(1e-15));
  const double by_hand = std::pow(two.A[1] - two.A[0], 2) / 2 + std::pow(two.A[2] - two.A[1], 2) / 4;
  CHECK(two.total == doctest::Approx(by_hand).epsilon(1e-14));
  CHECK(two.total == doctest::Approx(0.2406).epsilon(1e-3));

  for (int N : {2, 3, 4, 8, 12}) {
    const DualGrowth step = counterexample_dual_growth(N);
    CHECK(step.norm_f == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(step.max_relative_error <= 1e-12);
    for (int depth : {N, N + 2}) {
      const DualGrowth grid = counterexample_dual_growth(N, Grid(at(0.0), 0, depth, 1));
      CHECK(grid.norm_f == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(grid.max_relative_error <= 1e-12);
      CHECK(grid.total == doctest::Approx(step.total).epsilon(1e-12));
      CHECK(grid.full_sum == doctest::Approx(step.full_sum).epsilon(1e-12));
      for (std::size_t j = 0; j <= static_cast<std::size_t>(N); ++j) {
        CHECK(grid.A[j] == doctest::Approx(step.A[j]).epsilon(1e-12));
        CHECK(grid.per_j[j] == doctest::Approx(step.per_j[j]).epsilon(1e-12));
      }
    }
  }

  double previous = 0.0;
  for (int N : {8, 16, 24, 48, 96}) {
    const DualGrowth d = counterexample_dual_growth(N);
    CHECK(d.max_relative_error <= 1e-12);
    CHECK(d.total > previous);
    CHECK(d.full_sum >= d.total);
    previous = d.total;
  }
  CHECK(counterexample_dual_growth(96).total / 96 > counterexample_dual_growth(24).total / 24);
  CHECK_THROWS_AS(counterexample_dual_growth(1), Error);
  CHECK_THROWS_WITH_AS(counterexample_dual_growth(6, Grid(at(0.0), 0, 5, 1)), doctest::Contains("depth"), Error);
}

TEST_CASE("gcar sequence") {
  const Grid g(at(0.0), 0, 8, 1);
  const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  const auto zeros = gcar_sequence(t1_system(g), StoppingForest::trivial(g), gm);
  for (double v : zeros) CHECK(v == 0.0);

  const auto cx = counterexample_system(8, g);
  const auto beta = gcar_sequence(cx.system, cx.forest, gm);
  CHECK(beta[0] == 0.0);
  for (std::size_t id = 1; id < g.cube_count(); ++id) {
    const Cube q = g.cube(id), parent = g.parent(q);
    const Vector b = cx.system.extended(cx.system.b1, cx.forest.ancestor(q));
    const double d = gm.average(b, q) - gm.average(b, parent);
    CHECK(beta[id] == doctest::Approx(d * d * gm.mass(q)).epsilon(1e-12));
    // b_{Q^a} is constant off the spine, so only cubes touching 0 can differ.
    if (q.code != 0 && q.code != 1) CHECK(beta[id] == 0.0);
  }
  const double c = carleson_constant(beta, gm).constant;
  CHECK(std::isfinite(c));
  CHECK(c > 0.0);
}

TEST_CASE("phi split") {
  const int N = 8;
  const Grid g(at(0.0), 0, N, 1);
  const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  Rng rng(4);
  const Vector f = random_leaf_function(g, rng);

  const AccretiveSystem t1 = t1_system(g);
  const StoppingForest trivial = StoppingForest::trivial(g);
  const Martingale haar(t1, trivial, gm);
  for (std::size_t id = 0; id < g.level_offset(N); ++id) {
    const auto r = haar.phi_split(g.cube(id), f);
    CHECK(r.residual <= 1e-13 * std::max(r.scale, 1.0));
  }

  const auto cx = counterexample_system(N, g);
  const Martingale mg(cx.system, cx.forest, gm);
  for (int j = 1; j <= N; ++j) {
    const Cube q{j - 1, 0};
    const auto r = mg.phi_split(q, f);
    CHECK(r.residual <= 1e-12 * r.scale);
    Vector d = mg.delta(q, f);
    Vector lifted = Vector::Zero(256);
    lifted.segment(0, d.size()) = d;
    // phi_{Q_j} vanishes only at j = N, where b_{N-1} is constant on Q_N.
    CHECK(((d - mg.delta(q, lifted)).lpNorm<Eigen::Infinity>() > 1e-6) == (j < N));
  }
  const auto zero = mg.phi_split(g.top(), Vector::Zero(256));
  CHECK(zero.residual == 0.0);
  CHECK(zero.scale == 0.0);
}

TEST_CASE("shu split") {
  const int N = 8;
  const Grid g(at(0.0), 0, N, 1);
  const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  Rng rng(5);
  const Vector f = random_leaf_function(g, rng);

  const AccretiveSystem t1 = t1_system(g);
  const StoppingForest trivial = StoppingForest::trivial(g);
  const Martingale haar(t1, trivial, gm);
  for (std::size_t id = 0; id < g.level_offset(N); ++id) {
    for (int i = 0; i < 2; ++i) {
      const auto p = haar.shu_split(g.cube(id), i, f);
      CHECK(p.h.isZero(0.0));
      CHECK(p.u.isZero(0.0));
      CHECK(p.check.residual <= 1e-13 * std::max(p.check.scale, 1.0));
    }
  }
  const auto flat = haar.shu_split(g.top(), 1, Vector::Constant(256, 2.0));
  CHECK(flat.s.isZero(1e-15));
  CHECK(flat.check.residual <= 1e-15);

  const auto cx = counterexample_system(N, g);
  const Martingale mg(cx.system, cx.forest, gm);
  for (int j = 1; j <= N; ++j) {
    const auto spine = mg.shu_split(Cube{j - 1, 0}, 0, f);
    CHECK(spine.s.isZero(0.0));
    CHECK_FALSE(spine.h.isZero(0.0));
    CHECK_FALSE(spine.u.isZero(0.0));
    CHECK(spine.check.residual <= 1e-12 * spine.check.scale);
    const auto side = mg.shu_split(Cube{j - 1, 0}, 1, f);
    CHECK(side.h.isZero(0.0));
    CHECK(side.check.residual <= 1e-12 * side.check.scale);
  }
  CHECK_THROWS_AS(mg.shu_split(Cube{N, 0}, 0, f), Error);
}

TEST_CASE("vanishing averages are refused") {
  const Grid g(at(0.0), 0, 4, 1);
  const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  AccretiveSystem sys = t1_system(g);
  sys.b1[0].head(8).setConstant(2.0);
  sys.b1[0].tail(8).setZero();
  const StoppingForest forest = StoppingForest::trivial(g);
  const Martingale mg(sys, forest, gm);
  CHECK_THROWS_WITH_AS(mg.delta(g.top(), Vector::Ones(16)), doctest::Contains("cube 2 (level 1, code 1)"), Error);
  CHECK_THROWS_AS(mg.delta_adjoint(g.top(), Vector::Ones(16)), Error);
  CHECK_NOTHROW(mg.delta(Cube{1, 0}, Vector::Ones(16)));
}

TEST_CASE("coefficients csv") {
  const Grid g(at(0.0), 0, 3, 1);
  const GridMeasure gm(g, AtomicMeasure::lebesgue(CellSpace::covering(g)));
  const AccretiveSystem sys = t1_system(g);
  const StoppingForest forest = StoppingForest::trivial(g);
  const Martingale mg(sys, forest, gm);
  Vector f(8);
  f << 1, 2, 3, 4, 5, 6, 7, 8;
  std::ostringstream out;
  write_coefficients_csv(mg.decompose(f), g, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "kind,cube_id,cell_index,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 8 + 8 * 3);
  CHECK(out.str().find("e0,0,0,4.5\n") != std::string::npos);
}
