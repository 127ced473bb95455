#include "dytb/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace dytb {

namespace {

// Generic maximal-cube recursion: `stops(P, Q)` decides whether Q (strictly
// inside forest cube P) is a stopping cube.
StoppingForest build_forest(const Grid& grid, const std::function<std::function<bool(std::size_t)>(std::size_t)>& rule,
                            ForestParams params) {
  std::vector<std::vector<std::size_t>> generations{{grid.id(grid.top())}};
  while (true) {
    std::vector<std::size_t> next;
    for (std::size_t p : generations.back()) {
      const Cube top = grid.cube(p);
      if (top.level == grid.depth()) continue;
      const auto stops = rule(p);
      std::vector<Cube> stack = grid.children(top);
      while (!stack.empty()) {
        const Cube q = stack.back();
        stack.pop_back();
        const std::size_t id = grid.id(q);
        if (stops(id)) {
          next.push_back(id);
        } else if (q.level < grid.depth()) {
          for (const Cube& c : grid.children(q)) stack.push_back(c);
        }
      }
    }
    if (next.empty()) break;
    std::sort(next.begin(), next.end());
    generations.push_back(std::move(next));
  }
  return StoppingForest(grid, std::move(generations), std::move(params));
}

const std::vector<Vector>& family_of(const AccretiveSystem& system, int family) {
  require(family == 1 || family == 2, "test function family must be 1 or 2");
  return family == 1 ? system.b1 : system.b2;
}

}  // namespace

StoppingForest build_linf(const AccretiveSystem& system, const GridMeasure& gm, int family) {
  require(system.mode == AccretiveMode::Linf, "the L-infinity stopping time needs an L-infinity system");
  const Grid& grid = system.grid;
  const auto& bs = family_of(system, family);
  ForestParams params;
  params.mode = "linf";
  params.delta = 0.5;
  auto rule = [&](std::size_t p) {
    const Cube top = grid.cube(p);
    const Vector b = bs[p];
    return std::function<bool(std::size_t)>([&, top, b](std::size_t id) {
      const Cube q = grid.cube(id);
      return std::abs(gm.local_integral(b, top, q)) < 0.5 * gm.mass(q);
    });
  };
  StoppingForest forest = build_forest(grid, rule, params);
  forest.params().tau_measured = packing_ratio(forest, gm).tau;
  return forest;
}

StoppingForest build_l2(const AccretiveSystem& system, const GridMeasure& gm, const RealOperator& T, double delta,
                        double s, int family) {
  require(delta > 0.0 && delta < 1.0, "stopping parameter delta must lie in (0, 1)");
  require(s > 2.0, "the L2 stopping time needs s > 2");
  require(T.size() == static_cast<Eigen::Index>(gm.space().size()), "operator and measure sizes differ");
  const Grid& grid = system.grid;
  const auto& bs = family_of(system, family);
  const MaximalOperator maximal(gm.measure());
  ForestParams params;
  params.mode = "l2";
  params.delta = delta;
  params.s = s;
  auto rule = [&](std::size_t p) {
    const Cube top = grid.cube(p);
    Vector cells = Vector::Zero(static_cast<Eigen::Index>(gm.space().size()));
    gm.scatter(top, bs[p], cells);
    const Vector tb = family == 1 ? T.apply(cells) : T.apply_adjoint(cells);
    const Vector mb = maximal(cells);
    const auto b_int = gm.integrals(system.extended(bs, top));
    const auto m_int = gm.integrals(gm.to_leaves(mb).array().square().matrix());
    const auto t_int = gm.integrals(gm.to_leaves(tb).array().abs().pow(s).matrix());
    return std::function<bool(std::size_t)>([&gm, &grid, delta, b_int, m_int, t_int](std::size_t id) {
      const double mass = gm.mass(grid.cube(id));
      return m_int[id] > mass / delta || t_int[id] > mass / delta || std::abs(b_int[id]) < delta * mass;
    });
  };
  StoppingForest forest = build_forest(grid, rule, params);
  forest.params().tau_measured = packing_ratio(forest, gm).tau;
  return forest;
}

PackingReport packing_ratio(const StoppingForest& forest, const GridMeasure& gm) {
  const Grid& grid = forest.grid();
  const std::size_t count = grid.cube_count();
  const std::size_t gens = forest.generations().size();
  // inside[id][j]: mass of generation gen(Q^a) + j cubes strictly inside Q.
  std::vector<std::vector<double>> inside(count, std::vector<double>(gens, 0.0));
  for (std::size_t g = 1; g < gens; ++g) {
    for (std::size_t s : forest.generations()[g]) {
      const double m = gm.mass(grid.cube(s));
      Cube q = grid.cube(s);
      while (q.level > 0) {
        q = grid.parent(q);
        const std::size_t id = grid.id(q);
        const int t = forest.generation(forest.ancestor(id));
        if (static_cast<std::size_t>(t) < g) inside[id][g - static_cast<std::size_t>(t)] += m;
      }
    }
  }
  PackingReport rep;
  rep.by_jump.assign(gens, 0.0);
  for (std::size_t id = 0; id < count; ++id) {
    const double mass = gm.mass(grid.cube(id));
    if (mass <= 0.0) continue;
    for (std::size_t j = 1; j < gens; ++j) {
      const double ratio = inside[id][j] / mass;
      rep.by_jump[j] = std::max(rep.by_jump[j], ratio);
      if (j == 1 && forest.is_stopping(id) && ratio > rep.tau) {
        rep.tau = ratio;
        rep.witness = id;
      }
    }
  }
  for (std::size_t j = 1; j < gens; ++j) {
    if (rep.by_jump[j] > std::pow(rep.tau, static_cast<double>(j) - 1.0) * (1.0 + kIdentityTolerance)) {
      rep.decay_holds = false;
    }
  }
  return rep;
}

CarlesonReport carleson_constant(const std::vector<double>& a, const GridMeasure& gm, std::string sequence_id) {
  const Grid& grid = gm.grid();
  require(a.size() == grid.cube_count(), "Carleson sequence needs one value per cube");
  std::vector<double> enclosed(a);
  const auto children = static_cast<std::size_t>(grid.child_count());
  for (int level = grid.depth() - 1; level >= 0; --level) {
    const std::size_t offset = grid.level_offset(level), below = grid.level_offset(level + 1);
    for (std::size_t c = 0; c < grid.cubes_at(level); ++c) {
      for (std::size_t k = 0; k < children; ++k) enclosed[offset + c] += enclosed[below + c * children + k];
    }
  }
  CarlesonReport rep;
  rep.sequence_id = std::move(sequence_id);
  for (std::size_t id = 0; id < a.size(); ++id) {
    require(a[id] >= 0.0, "Carleson sequences are nonnegative");
    const double mass = gm.cube_masses()[id];
    double ratio = 0.0;
    if (mass > 0.0) {
      ratio = enclosed[id] / mass;
    } else if (enclosed[id] > 0.0) {
      ratio = std::numeric_limits<double>::infinity();
    }
    if (ratio > rep.constant) {
      rep.constant = ratio;
      rep.witness = id;
    }
  }
  return rep;
}

std::vector<double> mescar_sequence(const StoppingForest& forest, const GridMeasure& gm) {
  std::vector<double> a(forest.grid().cube_count(), 0.0);
  for (const auto& gen : forest.generations()) {
    for (std::size_t id : gen) a[id] = gm.cube_masses()[id];
  }
  return a;
}

double embedding_ratio(const std::vector<double>& a, const Vector& f, const GridMeasure& gm) {
  const double norm = gm.norm_squared(f);
  require(norm > 0.0, "embedding ratio needs a nonzero function");
  const auto ints = gm.integrals(f);
  double total = 0.0;
  for (std::size_t id = 0; id < a.size(); ++id) {
    const double mass = gm.cube_masses()[id];
    if (mass <= 0.0 || a[id] == 0.0) continue;
    const double avg = ints[id] / mass;
    total += a[id] * avg * avg;
  }
  return total / norm;
}

double usfe_value(const Vector& f, const GridMeasure& gm) {
  const Grid& grid = gm.grid();
  const auto ints = gm.integrals(f);
  const auto& mass = gm.cube_masses();
  double total = 0.0;
  for (std::size_t id = 1; id < grid.cube_count(); ++id) {
    if (mass[id] <= 0.0) continue;
    const std::size_t parent = grid.id(grid.parent(grid.cube(id)));
    const double d = ints[id] / mass[id] - ints[parent] / mass[parent];
    total += d * d * mass[id];
  }
  return total;
}

}  // namespace dytb
