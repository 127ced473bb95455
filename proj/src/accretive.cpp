#include "dytb/accretive.hpp"

#include "dytb/rng.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace dytb {

std::string to_string(AccretiveMode mode) { return mode == AccretiveMode::Linf ? "linf" : "l2"; }

AccretiveMode accretive_mode_from_string(const std::string& name) {
  if (name == "linf") return AccretiveMode::Linf;
  if (name == "l2") return AccretiveMode::L2;
  throw Error("unknown accretive mode '" + name + "' (expected linf or l2)");
}

Vector AccretiveSystem::extended(const std::vector<Vector>& family, const Cube& q) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(grid.leaf_count()));
  out.segment(static_cast<Eigen::Index>(grid.first_leaf(q)), static_cast<Eigen::Index>(grid.leaf_span(q))) =
      family[grid.id(q)];
  return out;
}

AccretiveSystem t1_system(const Grid& grid) {
  AccretiveSystem sys;
  sys.grid = grid;
  sys.mode = AccretiveMode::Linf;
  sys.C = 1.0;
  sys.generator = "t1";
  sys.b1.resize(grid.cube_count());
  for (std::size_t id = 0; id < grid.cube_count(); ++id) {
    sys.b1[id] = Vector::Ones(static_cast<Eigen::Index>(grid.leaf_span(grid.cube(id))));
  }
  sys.b2 = sys.b1;
  return sys;
}

namespace {

// Balanced +-1 pattern constant on blocks of `block` consecutive leaves
// (Morton order, so blocks are subcubes), over blocks of positive mass.
Vector balanced_pattern(const GridMeasure& gm, const Cube& q, std::uint64_t seed, std::size_t block = 1) {
  const Grid& grid = gm.grid();
  const auto first = grid.first_leaf(q);
  const auto span = static_cast<std::size_t>(grid.leaf_span(q));
  Vector sigma = Vector::Zero(static_cast<Eigen::Index>(span));
  std::vector<std::size_t> massive;
  for (std::size_t i = 0; i < span; i += block) {
    if (gm.leaf_mass().segment(static_cast<Eigen::Index>(first + i), static_cast<Eigen::Index>(block)).sum() > 0.0) {
      massive.push_back(i);
    }
  }
  if (massive.size() < 2) return sigma;
  Rng rng(seed);
  rng.shuffle(massive);
  double plus = 0.0, minus = 0.0;
  for (std::size_t k = 0; k < massive.size(); ++k) {
    const auto start = static_cast<Eigen::Index>(massive[k]);
    const double m = gm.leaf_mass().segment(static_cast<Eigen::Index>(first) + start, static_cast<Eigen::Index>(block)).sum();
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    sigma.segment(start, static_cast<Eigen::Index>(block)).setConstant(sign);
    (sign > 0 ? plus : minus) += m;
  }
  if (plus > minus) {
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
      if (sigma(i) > 0) sigma(i) = minus / plus;
    }
  } else if (minus > plus) {
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
      if (sigma(i) < 0) sigma(i) = -plus / minus;
    }
  }
  return sigma;
}

}  // namespace

AccretiveSystem random_bounded_system(const GridMeasure& gm, double eps, std::uint64_t seed) {
  require(eps >= 0.0 && eps < 1.0, "random bounded system needs eps in [0, 1)");
  const Grid& grid = gm.grid();
  AccretiveSystem sys;
  sys.grid = grid;
  sys.mode = AccretiveMode::Linf;
  sys.C = 1.0 + eps;
  sys.generator = "random_bounded";
  sys.b1.resize(grid.cube_count());
  sys.b2.resize(grid.cube_count());
  for (std::size_t id = 0; id < grid.cube_count(); ++id) {
    const Cube q = grid.cube(id);
    sys.b1[id] = (1.0 + eps * balanced_pattern(gm, q, derive_seed(seed, 2 * id)).array()).matrix();
    sys.b2[id] = (1.0 + eps * balanced_pattern(gm, q, derive_seed(seed, 2 * id + 1)).array()).matrix();
  }
  return sys;
}

AccretiveSystem block_sign_system(const GridMeasure& gm, double C, std::uint64_t seed) {
  require(C >= 1.0 && C <= 3.0, "block sign system needs 1 <= C <= 3");
  const Grid& grid = gm.grid();
  AccretiveSystem sys;
  sys.grid = grid;
  sys.mode = AccretiveMode::Linf;
  sys.C = C;
  sys.generator = "block_sign";
  sys.b1.resize(grid.cube_count());
  sys.b2.resize(grid.cube_count());
  for (std::size_t id = 0; id < grid.cube_count(); ++id) {
    const Cube q = grid.cube(id);
    for (int family = 1; family <= 2; ++family) {
      const std::uint64_t s = derive_seed(seed, 2 * id + static_cast<std::uint64_t>(family - 1));
      const int below = std::min(grid.depth() - q.level, 1 + static_cast<int>(mix_seed(s) % 3));
      const auto block = static_cast<std::size_t>(grid.leaf_span(q) >> (below * grid.dimension()));
      const Vector sigma = balanced_pattern(gm, q, s, std::max<std::size_t>(block, 1));
      (family == 1 ? sys.b1 : sys.b2)[id] = (1.0 + (C - 1.0) * sigma.array()).matrix();
    }
  }
  return sys;
}

CounterexampleSystem counterexample_system(int N, const Grid& grid) {
  require(N >= 1, "counterexample needs N >= 1");
  require(grid.dimension() == 1 && grid.top_scale() == 0 && grid.corner()(0) == 0,
          "counterexample lives on the unshifted grid of [0, 1)");
  if (grid.depth() < N) {
    std::ostringstream msg;
    msg << "counterexample with N = " << N << " needs grid depth >= N, got " << grid.depth();
    throw Error(msg.str());
  }
  AccretiveSystem sys = t1_system(grid);
  sys.mode = AccretiveMode::L2;
  sys.C = 2.0;
  sys.generator = "counterexample";
  std::vector<std::vector<std::size_t>> generations;
  const std::int64_t cells_in_qn = grid.side_cells(N);
  for (int j = 0; j <= N; ++j) {
    const Cube qj{j, 0};
    Vector& b = sys.b1[grid.id(qj)];
    b.setOnes();
    b.head(cells_in_qn).setConstant(std::sqrt(std::ldexp(1.0, N - j)));
    generations.push_back({grid.id(qj)});
  }
  sys.b2 = sys.b1;
  StoppingForest::Params params;
  params.mode = "injected";
  return {std::move(sys), StoppingForest(grid, std::move(generations), params)};
}

ValidationReport validate(const AccretiveSystem& system, const GridMeasure& gm, double tolerance) {
  const Grid& grid = system.grid;
  require(grid.compatible(gm.grid()) && grid.corner() == gm.grid().corner(), "system and measure grids differ");
  ValidationReport rep;
  for (int family = 1; family <= 2; ++family) {
    const auto& bs = family == 1 ? system.b1 : system.b2;
    require(bs.size() == grid.cube_count(), "system needs one function per cube");
    for (std::size_t id = 0; id < grid.cube_count(); ++id) {
      const Cube q = grid.cube(id);
      const Vector& b = bs[id];
      if (static_cast<std::uint64_t>(b.size()) != grid.leaf_span(q)) {
        rep.failures.push_back({id, family, "support", static_cast<double>(b.size())});
        continue;
      }
      const double mass = gm.mass(q);
      if (mass <= 0.0) {
        if (family == 1) ++rep.zero_mass_cubes;
        continue;
      }
      if (family == 1) ++rep.cubes_checked;
      const auto first = static_cast<Eigen::Index>(grid.first_leaf(q));
      const Vector m = gm.leaf_mass().segment(first, b.size());
      double size = 0.0;
      if (system.mode == AccretiveMode::Linf) {
        for (Eigen::Index i = 0; i < b.size(); ++i) {
          if (m(i) > 0.0) size = std::max(size, std::abs(b(i)));
        }
      } else {
        size = (b.array().square() * m.array()).sum() / mass;
      }
      rep.size_constant = std::max(rep.size_constant, size);
      if (size > system.C * (1.0 + tolerance)) rep.failures.push_back({id, family, "size", size});
      const double err = std::abs(b.dot(m) - mass) / mass;
      rep.normalization_error = std::max(rep.normalization_error, err);
      if (err > tolerance) rep.failures.push_back({id, family, "normalization", err});
    }
  }
  return rep;
}

}  // namespace dytb
