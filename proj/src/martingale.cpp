#include "dytb/martingale.hpp"

#include "dytb/io.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace dytb {

namespace {

bool same_grid(const Grid& a, const Grid& b) {
  return a.dimension() == b.dimension() && a.depth() == b.depth() && a.top_scale() == b.top_scale() &&
         a.shift() == b.shift();
}

std::string describe(const Grid& g, const Cube& q) {
  return "cube " + std::to_string(g.id(q)) + " (level " + std::to_string(q.level) + ", code " +
         std::to_string(q.code) + ")";
}

Eigen::Index offset(const Grid& g, const Cube& outer, const Cube& inner) {
  return static_cast<Eigen::Index>(g.first_leaf(inner) - g.first_leaf(outer));
}

Eigen::Index span(const Grid& g, const Cube& q) { return static_cast<Eigen::Index>(g.leaf_span(q)); }

}  // namespace

Martingale::Martingale(const AccretiveSystem& system, const StoppingForest& forest, const GridMeasure& gm, int family)
    : system_(system), forest_(forest), gm_(gm), b_(family == 1 ? system.b1 : system.b2) {
  require(family == 1 || family == 2, "test function family must be 1 or 2");
  require(same_grid(system.grid, gm.grid()) && same_grid(forest.grid(), gm.grid()),
          "system, forest and measure must share one grid");
  const Grid& g = gm.grid();
  sup_.assign(g.cube_count(), 0.0);
  for (const auto& gen : forest.generations()) {
    for (std::size_t id : gen) {
      const Cube p = g.cube(id);
      const auto mass = gm.leaf_mass().segment(static_cast<Eigen::Index>(g.first_leaf(p)), span(g, p));
      double sup = 0.0;
      for (Eigen::Index i = 0; i < mass.size(); ++i) {
        if (mass(i) > 0.0) sup = std::max(sup, std::abs(b_[id](i)));
      }
      sup_[id] = sup;
    }
  }
}

Eigen::Ref<const Vector> Martingale::b_on(std::size_t owner, const Cube& q) const {
  const Grid& g = grid();
  return b_[owner].segment(offset(g, g.cube(owner), q), span(g, q));
}

double Martingale::checked_average_b(std::size_t owner, const Cube& q) const {
  const double mass = gm_.mass(q);
  const double avg = gm_.local_integral(b_[owner], grid().cube(owner), q) / mass;
  if (!(std::abs(avg) >= kAccretivityMargin * sup_[owner]) || sup_[owner] == 0.0) {
    throw Error("accretivity margin fails on " + describe(grid(), q) + ": average of b is " + format_double(avg));
  }
  return avg;
}

double Martingale::integral(const Vector& f, const Cube& q) const {
  const auto first = static_cast<Eigen::Index>(grid().first_leaf(q));
  const Eigen::Index n = span(grid(), q);
  return f.segment(first, n).dot(gm_.leaf_mass().segment(first, n));
}

double Martingale::weighted_integral(std::size_t owner, const Vector& f, const Cube& q) const {
  const auto first = static_cast<Eigen::Index>(grid().first_leaf(q));
  const Eigen::Index n = span(grid(), q);
  return (b_on(owner, q).array() * f.segment(first, n).array() * gm_.leaf_mass().segment(first, n).array()).sum();
}

double Martingale::local_norm(const Vector& local, const Cube& q) const {
  const auto first = static_cast<Eigen::Index>(grid().first_leaf(q));
  return (local.array().square() * gm_.leaf_mass().segment(first, local.size()).array()).sum();
}

Vector Martingale::ancestor_b(const Cube& q) const { return b_on(forest_.ancestor(grid().id(q)), q); }

Vector Martingale::averaged_b(const Cube& r, const Vector& g) const {
  const Grid& gr = grid();
  require(g.size() == static_cast<Eigen::Index>(gr.leaf_count()), "averaged_b needs a function on all leaves");
  Vector out = Vector::Zero(g.size());
  const double mass = gm_.mass(r);
  if (mass <= 0.0) return out;
  const std::size_t a = forest_.ancestor(gr.id(r));
  const Cube top = gr.cube(a);
  out.segment(static_cast<Eigen::Index>(gr.first_leaf(top)), span(gr, top)) =
      integral(g, r) / mass / checked_average_b(a, r) * b_[a];
  return out;
}

Vector Martingale::forest_b(std::size_t id) const {
  require(forest_.is_stopping(id), "forest_b needs a stopping cube");
  const Grid& g = grid();
  const Cube p = g.cube(id);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(g.leaf_count()));
  out.segment(static_cast<Eigen::Index>(g.first_leaf(p)), span(g, p)) = b_[id];
  return out;
}

Vector Martingale::delta(const Cube& q, const Vector& f) const {
  const Grid& g = grid();
  require(f.size() == static_cast<Eigen::Index>(g.leaf_count()), "delta needs a function on all leaves");
  Vector out = Vector::Zero(span(g, q));
  const double mass = gm_.mass(q);
  if (q.level == g.depth() || mass <= 0.0) return out;
  const std::size_t a = forest_.ancestor(g.id(q));
  const double outer = integral(f, q) / mass / checked_average_b(a, q);
  for (const Cube& c : g.children(q)) {
    const double mc = gm_.mass(c);
    if (mc <= 0.0) continue;
    const std::size_t ac = forest_.ancestor(g.id(c));
    const double inner = integral(f, c) / mc / checked_average_b(ac, c);
    out.segment(offset(g, q, c), span(g, c)) = inner * b_on(ac, c) - outer * b_on(a, c);
  }
  return out;
}

Vector Martingale::delta_adjoint(const Cube& q, const Vector& f) const {
  const Grid& g = grid();
  require(f.size() == static_cast<Eigen::Index>(g.leaf_count()), "delta needs a function on all leaves");
  Vector out = Vector::Zero(span(g, q));
  const double mass = gm_.mass(q);
  if (q.level == g.depth() || mass <= 0.0) return out;
  const std::size_t a = forest_.ancestor(g.id(q));
  const double outer = weighted_integral(a, f, q) / mass / checked_average_b(a, q);
  for (const Cube& c : g.children(q)) {
    const double mc = gm_.mass(c);
    if (mc <= 0.0) continue;
    const std::size_t ac = forest_.ancestor(g.id(c));
    const double inner = weighted_integral(ac, f, c) / mc / checked_average_b(ac, c);
    out.segment(offset(g, q, c), span(g, c)).setConstant(inner - outer);
  }
  return out;
}

Vector Martingale::top_term(const Vector& f) const {
  const Grid& g = grid();
  const Cube top = g.top();
  const double mass = gm_.mass(top);
  if (mass <= 0.0) return Vector::Zero(static_cast<Eigen::Index>(g.leaf_count()));
  return integral(f, top) / mass / checked_average_b(0, top) * b_[0];
}

Vector Martingale::adapted_b(int k) const {
  const Grid& g = grid();
  require(k >= 0 && k <= g.depth(), "level outside the grid");
  Vector out(static_cast<Eigen::Index>(g.leaf_count()));
  for (std::uint64_t code = 0; code < g.cubes_at(k); ++code) {
    const Cube q{k, code};
    out.segment(static_cast<Eigen::Index>(g.first_leaf(q)), span(g, q)) = ancestor_b(q);
  }
  return out;
}

Vector Martingale::expectation(int k, const Vector& f) const {
  const Grid& g = grid();
  require(k >= 0 && k <= g.depth(), "level outside the grid");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(g.leaf_count()));
  for (std::uint64_t code = 0; code < g.cubes_at(k); ++code) {
    const Cube q{k, code};
    const double mass = gm_.mass(q);
    if (mass <= 0.0) continue;
    const std::size_t a = forest_.ancestor(g.id(q));
    out.segment(static_cast<Eigen::Index>(g.first_leaf(q)), span(g, q)) =
        integral(f, q) / mass / checked_average_b(a, q) * b_on(a, q);
  }
  return out;
}

MartingaleCoefficients Martingale::decompose(const Vector& f, int k) const {
  const Grid& g = grid();
  require(k >= 0 && k <= g.depth(), "truncation level outside the grid");
  MartingaleCoefficients c;
  c.truncation_level = k;
  c.e0 = top_term(f);
  c.deltas.resize(g.cube_count());
  for (std::size_t id = 0; id < g.level_offset(k); ++id) c.deltas[id] = delta(g.cube(id), f);
  return c;
}

Vector Martingale::reconstruct(const MartingaleCoefficients& c) const {
  const Grid& g = grid();
  Vector out = c.e0;
  for (std::size_t id = 0; id < c.deltas.size(); ++id) {
    if (c.deltas[id].size() == 0) continue;
    const Cube q = g.cube(id);
    out.segment(static_cast<Eigen::Index>(g.first_leaf(q)), span(g, q)) += c.deltas[id];
  }
  return out;
}

double Martingale::square_function_ratio(const Vector& f) const {
  const double norm = gm_.norm_squared(f);
  require(norm > 0.0, "square function ratio needs a nonzero function");
  const Grid& g = grid();
  double total = 0.0;
  for (std::size_t id = 0; id < g.level_offset(g.depth()); ++id) {
    const Cube q = g.cube(id);
    total += local_norm(delta(q, f), q);
  }
  return total / norm;
}

double Martingale::dual_square_sum(const Vector& f) const {
  const Grid& g = grid();
  double total = 0.0;
  for (std::size_t id = 0; id < g.level_offset(g.depth()); ++id) {
    const Cube q = g.cube(id);
    total += local_norm(delta_adjoint(q, f), q);
  }
  return total;
}

double Martingale::restricted_dual_ratio(const Cube& p, const Vector& f) const {
  const Grid& g = grid();
  const std::size_t pid = g.id(p);
  require(forest_.is_stopping(pid), "restricted dual ratio needs a stopping cube");
  const auto first = static_cast<Eigen::Index>(g.first_leaf(p));
  const double norm = local_norm(f.segment(first, span(g, p)), p);
  require(norm > 0.0, "restricted dual ratio: f vanishes on " + describe(g, p));
  double total = 0.0;
  for (std::size_t id = pid; id < g.level_offset(g.depth()); ++id) {
    if (forest_.ancestor(id) != pid) continue;
    const Cube q = g.cube(id);
    total += local_norm(delta_adjoint(q, f), q);
  }
  return total / norm;
}

SplitResidual Martingale::phi_split(const Cube& q, const Vector& f) const {
  const Grid& g = grid();
  const Vector d = delta(q, f);
  Vector lifted = Vector::Zero(static_cast<Eigen::Index>(g.leaf_count()));
  lifted.segment(static_cast<Eigen::Index>(g.first_leaf(q)), d.size()) = d;
  const Vector d2 = delta(q, lifted);
  Vector phi = Vector::Zero(d.size());
  const double mass = gm_.mass(q);
  if (mass > 0.0 && q.level < g.depth()) {
    const std::size_t a = forest_.ancestor(g.id(q));
    const double outer = integral(f, q) / mass / checked_average_b(a, q);
    for (const Cube& p : g.children(q)) {
      const std::size_t pid = g.id(p);
      const double mp = gm_.mass(p);
      if (forest_.ancestor(pid) != pid || mp <= 0.0) continue;
      const double ratio = gm_.local_integral(b_[a], g.cube(a), p) / mp / checked_average_b(pid, p);
      phi.segment(offset(g, q, p), span(g, p)) = outer * (ratio * b_on(pid, p) - b_on(a, p));
    }
  }
  SplitResidual r;
  r.residual = (d - d2 - phi).lpNorm<Eigen::Infinity>();
  r.scale = std::max({d.lpNorm<Eigen::Infinity>(), d2.lpNorm<Eigen::Infinity>(), phi.lpNorm<Eigen::Infinity>()});
  return r;
}

Martingale::ShuPieces Martingale::shu_split(const Cube& q, int child, const Vector& f) const {
  const Grid& g = grid();
  require(q.level < g.depth(), "the finest cubes have no children");
  require(child >= 0 && child < g.child_count(), "child index out of range");
  const Cube c = g.children(q)[static_cast<std::size_t>(child)];
  const Eigen::Index n = span(g, c);
  const std::size_t a = forest_.ancestor(g.id(q)), ac = forest_.ancestor(g.id(c));
  ShuPieces out;
  out.s = out.h = out.u = Vector::Zero(n);
  const Vector d = delta(q, f).segment(offset(g, q, c), n);
  const double mc = gm_.mass(c);
  if (mc > 0.0) {
    // E_{k+1} f / E_{k+1} b^a_{k+1} and E_k f / E_k b^a_k on the leaves of Q_i.
    const double fine = integral(f, c) / mc / checked_average_b(ac, c);
    const double coarse = integral(f, q) / gm_.mass(q) / checked_average_b(a, q);
    const bool unchanged = ac == a;
    const Vector s = Vector::Constant(n, unchanged ? fine - coarse : 0.0);
    const Vector h = Vector::Constant(n, unchanged ? 0.0 : fine);
    const Vector u = Vector::Constant(n, unchanged ? 0.0 : -coarse);
    const auto first = static_cast<Eigen::Index>(g.first_leaf(c));
    const auto mass = gm_.leaf_mass().segment(first, n);
    out.s = mass.dot(s) / mc * b_on(ac, c);
    out.h = mass.dot(h) / mc * b_on(ac, c);
    out.u = mass.dot(u) / mc * b_on(a, c);
  }
  out.check.residual = (d - out.s - out.h - out.u).lpNorm<Eigen::Infinity>();
  out.check.scale = std::max({d.lpNorm<Eigen::Infinity>(), out.s.lpNorm<Eigen::Infinity>(),
                              out.h.lpNorm<Eigen::Infinity>(), out.u.lpNorm<Eigen::Infinity>()});
  return out;
}

std::vector<double> gcar_sequence(const AccretiveSystem& system, const StoppingForest& forest, const GridMeasure& gm) {
  const Grid& g = gm.grid();
  require(same_grid(system.grid, g) && same_grid(forest.grid(), g), "system, forest and measure must share one grid");
  std::vector<double> beta(g.cube_count(), 0.0);
  const auto& mass = gm.cube_masses();
  for (std::size_t id = 1; id < g.cube_count(); ++id) {
    const Cube q = g.cube(id), parent = g.parent(q);
    const std::size_t pid = g.id(parent);
    if (mass[id] <= 0.0) continue;
    const std::size_t a = forest.ancestor(id);
    const Cube top = g.cube(a);
    const double on_q = gm.local_integral(system.b1[a], top, q) / mass[id];
    // b_{Q^a} vanishes off Q^a, which sits inside the parent when Q = Q^a.
    const double on_parent = gm.local_integral(system.b1[a], top, a == id ? top : parent) / mass[pid];
    beta[id] = (on_q - on_parent) * (on_q - on_parent) * mass[id];
  }
  return beta;
}

namespace {

void finish(DualGrowth& out) {
  const int N = out.N;
  out.A_closed.resize(static_cast<std::size_t>(N) + 1);
  out.per_j_closed.assign(static_cast<std::size_t>(N) + 1, 0.0);
  for (int j = 0; j <= N; ++j) {
    out.A_closed[static_cast<std::size_t>(j)] =
        std::pow(2.0, 0.5 * j) / (1.0 + std::pow(2.0, 0.5 * (j - N)) - std::pow(2.0, j - N));
  }
  out.total = 0.0;
  out.max_relative_error = 0.0;
  for (int j = 1; j <= N; ++j) {
    const auto J = static_cast<std::size_t>(j);
    const double diff = out.A_closed[J] - out.A_closed[J - 1];
    out.per_j_closed[J] = diff * diff * std::ldexp(1.0, -j);
    out.total += out.per_j[J];
    out.max_relative_error =
        std::max(out.max_relative_error, std::abs(out.per_j[J] - out.per_j_closed[J]) / out.per_j_closed[J]);
  }
}

}  // namespace

DualGrowth counterexample_dual_growth(int N) {
  require(N >= 2, "the counterexample needs N >= 2");
  require(N <= 1000, "N too large for double precision pieces");
  // piece m < N is [2^-m-1, 2^-m); piece N is [0, 2^-N).
  const auto pieces = static_cast<std::size_t>(N) + 1;
  std::vector<double> length(pieces);
  for (int m = 0; m < N; ++m) length[static_cast<std::size_t>(m)] = std::ldexp(1.0, -m - 1);
  length[static_cast<std::size_t>(N)] = std::ldexp(1.0, -N);
  const double f_head = std::pow(2.0, 0.5 * N);

  DualGrowth out;
  out.N = N;
  out.norm_f = f_head * f_head * length[static_cast<std::size_t>(N)];
  out.A.resize(pieces);
  for (int j = 0; j <= N; ++j) {
    const double head = std::pow(2.0, 0.5 * (N - j));
    double bf = head * f_head * length[static_cast<std::size_t>(N)];
    double b = head * length[static_cast<std::size_t>(N)];
    for (int m = j; m < N; ++m) b += length[static_cast<std::size_t>(m)];
    out.A[static_cast<std::size_t>(j)] = bf / b;
  }
  out.per_j.assign(pieces, 0.0);
  out.full_sum = 0.0;
  for (int j = 1; j <= N; ++j) {
    const auto J = static_cast<std::size_t>(j);
    const double diff = out.A[J] - out.A[J - 1];
    out.per_j[J] = diff * diff * std::ldexp(1.0, -j);
    // The sibling [2^-j, 2^-j+1) keeps the ancestor Q_{j-1}, where f = 0.
    out.full_sum += out.per_j[J] + out.A[J - 1] * out.A[J - 1] * std::ldexp(1.0, -j);
  }
  finish(out);
  return out;
}

DualGrowth counterexample_dual_growth(int N, const Grid& grid) {
  require(N >= 2, "the counterexample needs N >= 2");
  const auto cx = counterexample_system(N, grid);
  const GridMeasure gm(grid, AtomicMeasure::lebesgue(CellSpace::covering(grid)));
  const Martingale mg(cx.system, cx.forest, gm);
  Vector f = Vector::Zero(static_cast<Eigen::Index>(grid.leaf_count()));
  f.head(static_cast<Eigen::Index>(grid.leaf_span(Cube{N, 0}))).setConstant(std::pow(2.0, 0.5 * N));

  DualGrowth out;
  out.N = N;
  out.norm_f = gm.norm_squared(f);
  out.A.resize(static_cast<std::size_t>(N) + 1);
  out.per_j.assign(static_cast<std::size_t>(N) + 1, 0.0);
  for (int j = 0; j <= N; ++j) {
    const Cube qj{j, 0};
    const Vector b = cx.system.extended(cx.system.b1, qj);
    out.A[static_cast<std::size_t>(j)] = gm.integral(Vector(b.cwiseProduct(f)), qj) / gm.integral(b, qj);
    if (j == 0) continue;
    const Vector dual = mg.delta_adjoint(Cube{j - 1, 0}, f);
    const Eigen::Index n = static_cast<Eigen::Index>(grid.leaf_span(qj));
    out.per_j[static_cast<std::size_t>(j)] = (dual.head(n).array().square() * gm.leaf_mass().head(n).array()).sum();
  }
  out.full_sum = mg.dual_square_sum(f);
  finish(out);
  return out;
}

void write_coefficients_csv(const MartingaleCoefficients& c, const Grid& grid, std::ostream& out) {
  out << "kind,cube_id,cell_index,value\n";
  for (Eigen::Index i = 0; i < c.e0.size(); ++i) {
    out << "e0,0," << i << ',' << format_double(c.e0(i)) << '\n';
  }
  for (std::size_t id = 0; id < c.deltas.size(); ++id) {
    const Vector& d = c.deltas[id];
    const std::uint64_t first = grid.first_leaf(grid.cube(id));
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      out << "delta," << id << ',' << first + static_cast<std::uint64_t>(i) << ',' << format_double(d(i)) << '\n';
    }
  }
}

}  // namespace dytb
