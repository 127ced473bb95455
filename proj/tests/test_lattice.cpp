#include "dytb/lattice.hpp"
#include "dytb/measure.hpp"
#include "dytb/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace dytb;

namespace {

Point at(double x) { return Point::Constant(1, x); }

Grid random_grid(Rng& rng, int dimension, int depth, int id) {
  const int top = 0;
  const auto cells = std::int64_t{1} << depth;
  Point shift(dimension);
  for (int i = 0; i < dimension; ++i) {
    shift(i) = static_cast<double>(static_cast<std::int64_t>(rng.below(cells)) - cells / 2) * std::ldexp(1.0, -depth);
  }
  return Grid(shift, top, depth, dimension, id);
}

}  // namespace

TEST_CASE("unshifted depth-2 tree on [0,1)") {
  const Grid g(at(0.0), 0, 2, 1);
  CHECK(g.cube_count() == 7);
  CHECK(g.finest_side() == 0.25);
  std::set<std::pair<std::int64_t, std::int64_t>> boxes;
  for (std::size_t id = 0; id < g.cube_count(); ++id) {
    const CellBox b = g.box(g.cube(id));
    boxes.insert({b.lo(0), b.hi(0)});
    CHECK(g.id(g.cube(id)) == id);
  }
  const std::set<std::pair<std::int64_t, std::int64_t>> expected{{0, 4}, {0, 2}, {2, 4}, {0, 1},
                                                                   {1, 2}, {2, 3}, {3, 4}};
  CHECK(boxes == expected);
}

TEST_CASE("one-cell shift translates the tree") {
  const Grid g(at(0.25), 0, 2, 1);
  const Grid base(at(0.0), 0, 2, 1);
  for (std::size_t id = 0; id < g.cube_count(); ++id) {
    CHECK(g.box(g.cube(id)).lo(0) == base.box(base.cube(id)).lo(0) + 1);
  }
}

TEST_CASE("misaligned or out-of-range shifts are rejected") {
  CHECK_THROWS_WITH_AS(Grid(at(0.1), 0, 2, 1), doctest::Contains("not a multiple"), Error);
  CHECK_THROWS_AS(Grid(at(0.5), 0, 2, 1), Error);
  CHECK_NOTHROW(Grid(at(-0.5), 0, 2, 1));
  CHECK_THROWS_AS(Grid(at(0.0), 0, 0, 1), Error);
}

TEST_CASE("children partition parents and masses add up") {
  Rng rng(11);
  for (int dim = 1; dim <= 3; ++dim) {
    const Grid g = random_grid(rng, dim, dim == 3 ? 3 : 4, 0);
    const AtomicMeasure mu = AtomicMeasure::random(CellSpace::covering(g), 5);
    const GridMeasure gm(g, mu);
    for (std::size_t id = 0; id < g.cube_count(); ++id) {
      const Cube q = g.cube(id);
      if (q.level == g.depth()) continue;
      const CellBox pb = g.box(q);
      std::int64_t volume = 0;
      double mass = 0.0;
      for (const Cube& c : g.children(q)) {
        const CellBox cb = g.box(c);
        CHECK(pb.contains(cb));
        CHECK(g.parent(c) == q);
        std::int64_t v = 1;
        for (int i = 0; i < dim; ++i) v *= cb.hi(i) - cb.lo(i);
        volume += v;
        mass += gm.mass(c);
        for (const Cube& d : g.children(q)) {
          if (d != c) CHECK_FALSE(cb.intersects(g.box(d)));
        }
      }
      std::int64_t pv = 1;
      for (int i = 0; i < dim; ++i) pv *= pb.side();
      CHECK(volume == pv);
      CHECK(mass == doctest::Approx(gm.mass(q)).epsilon(1e-14));
    }
    CHECK(gm.mass(g.top()) == doctest::Approx(mu.total()).epsilon(1e-13));
  }
}

TEST_CASE("ancestors contain their descendants at the right scale") {
  const Grid g(Point::Constant(2, 0.125), 0, 4, 2);
  for (std::size_t id = 0; id < g.cube_count(); ++id) {
    const Cube q = g.cube(id);
    for (int j = 0; j <= q.level; ++j) {
      const Cube a = g.ancestor(q, j);
      CHECK(g.box(a).contains(g.box(q)));
      CHECK(g.side(a.level) == std::ldexp(g.side(q.level), j));
      CHECK(g.contains(a, q));
    }
  }
}

TEST_CASE("skeleton distance examples") {
  const Grid g(at(0.0), 0, 6, 1);
  SUBCASE("cube at the shared origin touches the skeleton") {
    CHECK(skeleton_distance(g, g.at(6, IntVector::Constant(1, 0)), g, 2).length == 0.0);
  }
  SUBCASE("[3/8, 3/8 + 1/64) at scale 1/2") {
    const Cube q = g.at(6, IntVector::Constant(1, 24));
    const auto d = skeleton_distance(g, q, g, 1);
    CHECK(d.squared_half_cells == oracle::skeleton_distance_sq(g, q, g, 1));
    CHECK(d.length == 7.0 / 64.0);
  }
  SUBCASE("interior cube of identical grids") {
    const Cube q = g.at(6, IntVector::Constant(1, 5));  // [5/64, 6/64) inside [0, 1/8)
    const auto d = skeleton_distance(g, q, g, 2);       // children of side 1/8
    CHECK(d.length == 2.0 / 64.0);
  }
  SUBCASE("scale below the cube side is rejected") {
    CHECK_THROWS_AS(skeleton_distance(g, g.at(2, IntVector::Constant(1, 1)), g, 3), Error);
  }
}

TEST_CASE("skeleton distance agrees with face enumeration on shifted grids") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = 1 + trial % 3;
    const int depth = dim == 3 ? 3 : 5;
    const Grid a = random_grid(rng, dim, depth, 0);
    const Grid b = random_grid(rng, dim, depth, 1);
    for (int s = 0; s < 20; ++s) {
      const int level = static_cast<int>(rng.below(static_cast<std::uint64_t>(depth + 1)));
      const Cube q{level, rng.below(a.cubes_at(level))};
      const int other_level = static_cast<int>(rng.below(static_cast<std::uint64_t>(level + 1)));
      CHECK(skeleton_distance(a, q, b, other_level).squared_half_cells ==
            oracle::skeleton_distance_sq(a, q, b, other_level));
    }
  }
}

TEST_CASE("badness threshold value") {
  CHECK(separation_threshold(1, std::ldexp(1.0, -6), 0.25, 0.25) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("badness and goodness class match brute-force scans") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + trial % 2;
    const Grid a = random_grid(rng, dim, 6, 0);
    const Grid b = random_grid(rng, dim, 6, 1);
    const double gamma = 0.1 + 0.3 * rng.uniform();
    for (int s = 0; s < 10; ++s) {
      const int level = 2 + static_cast<int>(rng.below(5));
      const Cube q{level, rng.below(a.cubes_at(level))};
      for (int r = 1; r <= level; ++r) {
        bool expected = false;
        for (int l = level - r; l >= 0; --l) expected = expected || oracle::bad_at(a, q, b, l, gamma);
        CHECK(is_bad(a, q, b, r, gamma) == expected);
      }
      int worst = -1;
      for (int k = 0; k <= level; ++k) {
        if (oracle::bad_at(a, q, b, level - k, gamma)) worst = k;
      }
      const auto cls = goodness_class(a, q, b, gamma);
      if (worst == level) {
        CHECK_FALSE(cls.has_value());
      } else {
        REQUIRE(cls.has_value());
        CHECK(*cls == worst + 1);
        for (int r = std::max(*cls, 1); r <= level; ++r) CHECK_FALSE(is_bad(a, q, b, r, gamma));
      }
    }
  }
}

TEST_CASE("touching a large skeleton is bad, the top scale can make it unclassifiable") {
  const Grid g(at(0.0), 0, 6, 1);
  const Cube q = g.at(6, IntVector::Constant(1, 16));  // left end at 1/4
  CHECK(is_bad(g, q, g, 2, 0.25));
  CHECK_FALSE(goodness_class(g, q, g, 0.25).has_value());
  CHECK(goodness_record(g, q, g, 3, 0.25).alpha_class == std::nullopt);
}

// The threshold equals 2 n^{1/2} l(R) (l(Q)/l(R))^gamma, which decreases in
// gamma, so a cube that is good for some gamma stays good for larger ones.
TEST_CASE("enlarging gamma never turns good cubes bad") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid a = random_grid(rng, 2, 5, 0);
    const Grid b = random_grid(rng, 2, 5, 1);
    for (std::size_t id = a.level_offset(3); id < a.cube_count(); id += 7) {
      const Cube q = a.cube(id);
      bool was_good = false;
      for (double gamma : {0.05, 0.15, 0.25, 0.35, 0.45}) {
        const bool good = !is_bad(a, q, b, 1, gamma);
        if (was_good) CHECK(good);
        was_good = good;
      }
    }
  }
}

TEST_CASE("goodness record keeps alpha at least r") {
  const Grid a(at(0.0), 0, 8, 1);
  const Grid b(at(0.0), 0, 8, 1, 1);
  const Cube q = a.at(8, IntVector::Constant(1, 101));
  const auto rec = goodness_record(a, q, b, 4, 0.25);
  CHECK(rec.other_grid == 1);
  if (rec.alpha_class) CHECK(*rec.alpha_class >= 4);
  CHECK(is_bad(a, q, b, 2, 0.25) == is_bad(a, q, b, 2, 0.25));
}
