#include "dytb/pairing.hpp"

#include "dytb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dytb {

namespace {

double distance(const Grid& a, const Cube& q, const Grid& b, const Cube& r) {
  return std::sqrt(static_cast<double>(squared_distance(a.box(q), b.box(r)))) * a.finest_side();
}

void require_supported(const GridMeasure& gm, const Vector& f, const char* what, const char* where) {
  const Vector back = gm.to_cells(gm.to_leaves(f));
  const Vector& w = gm.measure().weights();
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (w(i) > 0.0 && back(i) != f(i)) {
      throw Error(std::string(what) + " is not supported inside the " + where + " top cube");
    }
  }
}

Vector lift(const GridMeasure& gm, const Cube& q, const Vector& local) {
  Vector cells = Vector::Zero(static_cast<Eigen::Index>(gm.space().size()));
  gm.scatter(q, local, cells);
  return cells;
}

double local_norm(const GridMeasure& gm, const Cube& q, const Vector& local) {
  const auto first = static_cast<Eigen::Index>(gm.grid().first_leaf(q));
  return (local.array().square() * gm.leaf_mass().segment(first, local.size()).array()).sum();
}

double relative(double value, double bound) {
  if (bound > 0.0) return value / bound;
  return value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

// Child of the level-`level` cube of `second` containing q, one level finer.
std::optional<Cube> containing(const Grid& second, const CellBox& qb, int level) {
  return second.locate(qb.lo, level);
}

// The coarsest level 2^alpha(Q) l(Q), or the reason there is none.
enum class Target { good, bad, outside, beyond_top };

Target collapse_target(const Grid& first, const Cube& q, const Grid& second, int r, double gamma, int& top_level) {
  if (!second.top_box().contains(first.box(q))) return Target::outside;
  const auto cls = goodness_class(first, q, second, gamma);
  top_level = q.level - (cls ? std::max(*cls, r) : r);
  if (top_level < 0) return Target::beyond_top;
  return cls ? Target::good : Target::bad;
}

Grid shifted(const Grid& tmpl, Rng& rng) {
  const double h = tmpl.finest_side();
  const std::uint64_t positions = std::uint64_t{1} << (tmpl.depth() - 1);
  Point shift = tmpl.shift();
  for (int i = 0; i < tmpl.dimension(); ++i) {
    shift(i) += -0.25 * tmpl.top_side() + static_cast<double>(rng.below(positions)) * h;
  }
  return Grid(shift, tmpl.top_scale(), tmpl.depth(), tmpl.dimension());
}

void require_template(const Grid& tmpl) {
  require(tmpl.depth() >= 1, "the template grid needs depth >= 1");
  const double quarter = 0.25 * tmpl.top_side();
  for (int i = 0; i < tmpl.dimension(); ++i) {
    require(tmpl.shift()(i) >= -quarter && tmpl.shift()(i) < quarter,
            "the template shift must lie in [-L/4, L/4) so every shifted grid stays admissible");
  }
}

void finish(MonteCarloReport& rep) {
  const auto n = static_cast<double>(rep.trials);
  rep.fraction = static_cast<double>(rep.hits) / n;
  rep.standard_error = std::sqrt(rep.fraction * (1.0 - rep.fraction) / n);
}

}  // namespace

double PairingLedger::residual() const { return std::abs(bucket_sum() - total); }

bool PairingLedger::identity_holds(double tolerance) const {
  return residual() <= tolerance * std::max({scale, std::abs(total), 1e-300});
}

PairingLedger split_pairing(const RealOperator& T, const Vector& f, const Vector& g, const Martingale& first,
                            const Martingale& second, int r, double gamma, int k) {
  const GridMeasure& gm1 = first.measure();
  const GridMeasure& gm2 = second.measure();
  const Grid& d1 = first.grid();
  const Grid& d2 = second.grid();
  require(d1.compatible(d2), "the two grids must share their finest cells");
  require(gm1.space() == gm2.space() && gm1.measure().weights() == gm2.measure().weights(),
          "both grids must carry the same measure");
  const AtomicMeasure& mu = gm1.measure();
  require(T.size() == static_cast<Eigen::Index>(mu.space().size()), "operator and measure sizes differ");
  require(f.size() == T.size() && g.size() == T.size(), "f and g must be cell functions");
  require(k >= 0 && k <= d1.depth(), "truncation level outside the grids");
  require(r >= 0, "r must be nonnegative");
  require(gamma > 0.0 && gamma < 0.5, "badness exponent gamma must lie in (0, 1/2)");
  require_supported(gm1, f, "f", "first");
  require_supported(gm2, f, "f", "second");
  require_supported(gm1, g, "g", "first");
  require_supported(gm2, g, "g", "second");

  const Vector f1 = gm1.to_leaves(f);
  const Vector g2 = gm2.to_leaves(g);
  const std::size_t nq = d1.level_offset(k), nr = d2.level_offset(k);
  const auto cells = T.size();

  Matrix dq(cells, static_cast<Eigen::Index>(nq)), dr(cells, static_cast<Eigen::Index>(nr));
  for (std::size_t id = 0; id < nq; ++id) {
    const Cube q = d1.cube(id);
    dq.col(static_cast<Eigen::Index>(id)) = lift(gm1, q, first.delta(q, f1));
  }
  for (std::size_t id = 0; id < nr; ++id) {
    const Cube q = d2.cube(id);
    dr.col(static_cast<Eigen::Index>(id)) = lift(gm2, q, second.delta(q, g2));
  }
  const Matrix pairs = T.apply(dq).transpose() * mu.weights().asDiagonal() * dr;

  const Vector e1 = gm1.to_cells(first.top_term(f1));
  const Vector e2 = gm2.to_cells(second.top_term(g2));
  const Vector big1 = gm1.to_cells(first.expectation(k, f1));
  const Vector big2 = gm2.to_cells(second.expectation(k, g2));
  const Vector te1 = T.apply(e1);

  PairingLedger led;
  led.r = r;
  led.gamma = gamma;
  led.k = k;
  led.edge_EQ0 = mu.pairing(te1, big2);
  led.edge_ER0 = mu.pairing(T.apply(big1), e2);
  led.edge_both = mu.pairing(te1, e2);
  led.total = mu.pairing(T.apply(big1), big2);
  led.scale = std::abs(led.edge_EQ0) + std::abs(led.edge_ER0) + std::abs(led.edge_both);
  led.counts.pairs = nq * nr;

  // Smallest level of the second grid at which Q is bad, over the scales
  // that can enter sigma2.
  std::vector<int> first_bad(nq, std::numeric_limits<int>::max());
  for (std::size_t id = 0; id < nq; ++id) {
    const Cube q = d1.cube(id);
    for (int level = 0; level <= std::min(q.level, q.level - r); ++level) {
      if (is_bad_at(d1, q, d2, level, gamma)) {
        first_bad[id] = level;
        break;
      }
    }
  }

  const int n = d1.dimension();
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const Cube q = d1.cube(qi);
    const CellBox qb = d1.box(q);
    for (std::size_t ri = 0; ri < nr; ++ri) {
      const Cube rc = d2.cube(ri);
      const double value = pairs(static_cast<Eigen::Index>(qi), static_cast<Eigen::Index>(ri));
      led.scale += std::abs(value);
      if (rc.level > q.level) {
        led.symmetric_part += value;
        ++led.counts.symmetric;
        continue;
      }
      const double d = distance(d1, q, d2, rc);
      if (d > separation_threshold(n, d1.side(q.level), d2.side(rc.level), gamma)) {
        led.sigma1 += value;
        ++led.counts.sigma1;
      } else if (q.level - rc.level >= r) {
        if (first_bad[qi] <= rc.level) {
          led.sigma2_bad += value;
          ++led.counts.sigma2_bad;
          continue;
        }
        led.sigma2_good += value;
        ++led.counts.sigma2_good;
        const auto r1 = containing(d2, qb, rc.level + 1);
        if (r1 && d2.contains(rc, *r1)) {
          const std::size_t a1 = second.forest().ancestor(d2.id(*r1));
          if (a1 == second.forest().ancestor(ri)) {
            ++led.counts.good_same_ancestor;
          } else {
            ++led.counts.good_new_ancestor;
          }
        }
      } else {
        led.sigma3 += value;
        ++led.counts.sigma3;
      }
    }
  }
  return led;
}

std::vector<std::optional<std::size_t>> collapse_targets(const Grid& first, const Grid& second, int r,
                                                          double gamma) {
  require(r >= 1, "r must be at least 1");
  require(first.compatible(second), "the two grids must share their finest cells");
  std::vector<std::optional<std::size_t>> out(first.cube_count());
  for (std::size_t id = 0; id < first.cube_count(); ++id) {
    const Cube q = first.cube(id);
    int top_level = 0;
    if (collapse_target(first, q, second, r, gamma, top_level) != Target::good) continue;
    if (auto s = containing(second, first.box(q), top_level + 1)) out[id] = second.id(*s);
  }
  return out;
}

CollapseReport paraproduct_collapse(const Vector& g, const Grid& first, const Martingale& second, int r,
                                    double gamma) {
  require(r >= 1, "r must be at least 1");
  const Grid& d2 = second.grid();
  const GridMeasure& gm2 = second.measure();
  require(first.compatible(d2), "the two grids must share their finest cells");
  require(g.size() == static_cast<Eigen::Index>(d2.leaf_count()), "g must be a leaf function of the second grid");
  const int n = first.dimension();

  CollapseReport rep;
  for (std::size_t id = 0; id < first.level_offset(first.depth()); ++id) {
    const Cube q = first.cube(id);
    int top_level = 0;
    const Target target = collapse_target(first, q, d2, r, gamma, top_level);
    if (target == Target::outside) {
      ++rep.outside;
      continue;
    }
    if (target == Target::beyond_top) {
      ++rep.beyond_top;
      continue;
    }
    const CellBox qb = first.box(q);
    Vector lhs = Vector::Zero(g.size());
    double scale = 0.0;
    auto add = [&](const Cube& rc) {
      const Cube r1 = *containing(d2, qb, rc.level + 1);
      const Vector term = second.averaged_b(r1, g) - second.averaged_b(rc, g);
      scale = std::max(scale, term.lpNorm<Eigen::Infinity>());
      lhs += term;
    };
    for (int level = 0; level <= top_level; ++level) {
      if (target == Target::bad) {
        add(*containing(d2, qb, level));
        continue;
      }
      const double thr = separation_threshold(n, first.side(q.level), d2.side(level), gamma);
      for (std::uint64_t code = 0; code < d2.cubes_at(level); ++code) {
        const Cube rc{level, code};
        if (distance(first, q, d2, rc) > thr) continue;
        if (d2.box(rc).contains(qb)) {
          add(rc);
        } else {
          ++rep.non_nested;
        }
      }
    }
    const Cube s = *containing(d2, qb, top_level + 1);
    const Vector ts = second.averaged_b(s, g), t0 = second.averaged_b(d2.top(), g);
    scale = std::max({scale, ts.lpNorm<Eigen::Infinity>(), t0.lpNorm<Eigen::Infinity>()});
    const double residual = (gm2.to_cells(lhs) - gm2.to_cells(Vector(ts - t0))).lpNorm<Eigen::Infinity>();
    rep.max_residual = std::max(rep.max_residual, residual);
    rep.scale = std::max(rep.scale, scale);
    if (scale > 0.0) rep.max_relative = std::max(rep.max_relative, residual / scale);
    ++(target == Target::good ? rep.good : rep.chain_only);
  }
  return rep;
}

std::vector<std::optional<std::size_t>> containing_map(const Grid& first, const Grid& second, int up) {
  require(first.compatible(second), "the two grids must share their finest cells");
  std::vector<std::optional<std::size_t>> out(first.cube_count());
  const CellBox top = second.top_box();
  for (std::size_t id = 0; id < first.cube_count(); ++id) {
    const Cube q = first.cube(id);
    const CellBox qb = first.box(q);
    if (!top.contains(qb)) continue;
    const int level = up < 0 ? 0 : q.level - up;
    if (level < 0) continue;
    const auto r = containing(second, qb, level);
    if (r && second.box(*r).contains(qb)) out[id] = second.id(*r);
  }
  return out;
}

ArBrReport ar_br_sequences(const RealOperator& T, const std::vector<std::optional<std::size_t>>& F,
                           const Martingale& first, const Martingale& second, double s) {
  const Grid& d1 = first.grid();
  const Grid& d2 = second.grid();
  const GridMeasure& gm1 = first.measure();
  const GridMeasure& gm2 = second.measure();
  require(F.size() == d1.cube_count(), "F must be indexed by the cubes of the first grid");
  require(T.size() == static_cast<Eigen::Index>(gm1.space().size()) && gm1.space() == gm2.space(),
          "operator and measures must share one cell space");

  ArBrReport rep;
  rep.p = 0.5 * s;
  rep.a.assign(d2.cube_count(), 0.0);
  rep.b.assign(d2.cube_count(), 0.0);
  std::map<std::size_t, Vector> tb;  // T^* b^2_H on the leaves of the first grid
  for (std::size_t id = 0; id < d1.level_offset(d1.depth()); ++id) {
    if (!F[id]) continue;
    const Cube q = d1.cube(id);
    const std::size_t rid = *F[id];
    require(d2.box(d2.cube(rid)).contains(d1.box(q)), "F(Q) must contain Q");
    const std::size_t h = second.forest().ancestor(rid);
    auto it = tb.find(h);
    if (it == tb.end()) {
      it = tb.emplace(h, gm1.to_leaves(T.apply_adjoint(gm2.to_cells(second.forest_b(h))))).first;
    }
    const Vector& v = it->second;
    rep.a[rid] += local_norm(gm1, q, first.delta_adjoint(q, v));
    for (const Cube& p : d1.children(q)) {
      const std::size_t pid = d1.id(p);
      if (!first.forest().is_stopping(pid)) continue;
      const auto lo = static_cast<Eigen::Index>(d1.first_leaf(p));
      rep.b[rid] += local_norm(gm1, p, v.segment(lo, static_cast<Eigen::Index>(d1.leaf_span(p))));
    }
    ++rep.mapped;
  }
  rep.a_carleson = carleson_constant(rep.a, gm2, "a_R");
  rep.b_carleson = carleson_constant(rep.b, gm2, "b_R");
  return rep;
}

double sup_lambda(const DominatingFunction& lam, const Grid& grid, const Cube& q, double r) {
  const CellBox b = grid.box(q);
  const int n = grid.dimension();
  const std::int64_t side = b.side();
  const double h = grid.finest_side();
  std::int64_t count = 1;
  for (int i = 0; i < n; ++i) count *= side;
  double best = 0.0;
  Point z(n);
  for (std::int64_t c = 0; c < count; ++c) {
    std::int64_t rest = c;
    for (int i = 0; i < n; ++i) {
      z(i) = (static_cast<double>(b.lo(i) + rest % side) + 0.5) * h;
      rest /= side;
    }
    best = std::max(best, lam(z, r));
  }
  return best;
}

double interaction_weight(double side_q, double side_r, double D, double sup_lam, double mass_q, double mass_r,
                          double alpha) {
  const double num = std::pow(side_q * side_r, 0.5 * alpha) * std::sqrt(mass_q * mass_r);
  if (num == 0.0) return 0.0;
  return num / (std::pow(D, alpha) * sup_lam);
}

LongRangeReport long_range_ratio(const RealOperator& T, const GridMeasure& gq, const Cube& q, const GridMeasure& gr,
                                 const Cube& r, const Vector& phi, const Vector& psi, const DominatingFunction& lam,
                                 double alpha, double gamma) {
  const Grid& a = gq.grid();
  const Grid& b = gr.grid();
  require(a.compatible(b), "the two grids must share their finest cells");
  require(gq.space() == gr.space(), "both grids must carry the same measure");
  const AtomicMeasure& mu = gq.measure();
  const CellSpace& space = mu.space();
  require(T.size() == static_cast<Eigen::Index>(space.size()), "operator and measure sizes differ");
  require(phi.size() == T.size() && psi.size() == T.size(), "phi and psi must be cell functions");
  const double lq = a.side(q.level), lr = b.side(r.level);
  require(lq <= lr, "long-range bound needs l(Q) <= l(R)");

  LongRangeReport rep;
  rep.distance = distance(a, q, b, r);
  rep.threshold = separation_threshold(a.dimension(), lq, lr, gamma);
  if (rep.distance < rep.threshold) {
    throw Error("cubes are not separated: d(Q, R) = " + std::to_string(rep.distance) + " < " +
                std::to_string(rep.threshold));
  }
  const CellBox qb = a.box(q), rb = b.box(r);
  auto inside = [&](const CellBox& box, std::size_t i) {
    const IntVector c = space.cell(i);
    return (c.array() >= box.lo.array()).all() && (c.array() < box.hi.array()).all();
  };
  double mean = 0.0, abs_mean = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    require(phi(e) == 0.0 || inside(qb, i), "phi must be supported on Q");
    require(psi(e) == 0.0 || inside(rb, i), "psi must be supported on R");
    mean += phi(e) * mu.weight(i);
    abs_mean += std::abs(phi(e)) * mu.weight(i);
  }
  require(std::abs(mean) <= kIdentityTolerance * abs_mean, "phi must have mean zero");

  rep.value = std::abs(mu.pairing(T.apply(phi), psi));
  const double norms = std::sqrt(mu.norm_squared(phi) * mu.norm_squared(psi));
  const double mq = gq.mass(q), mr = gr.mass(r);
  const double d = rep.distance;
  rep.bound_first = std::pow(lq, alpha) / (std::pow(d, alpha) * sup_lambda(lam, a, q, d)) * std::sqrt(mq * mr) * norms;
  const double D = lq + lr + d;
  rep.bound_second = interaction_weight(lq, lr, D, sup_lambda(lam, a, q, D), mq, mr, alpha) * norms;
  rep.ratio_first = relative(rep.value, rep.bound_first);
  rep.ratio_second = relative(rep.value, rep.bound_second);
  return rep;
}

Matrix schur_matrix(const GridMeasure& first, const GridMeasure& second, const DominatingFunction& lam, double alpha,
                    int max_level) {
  const Grid& a = first.grid();
  const Grid& b = second.grid();
  require(a.compatible(b), "the two grids must share their finest cells");
  require(max_level >= 0 && max_level <= a.depth(), "level outside the grids");
  const std::size_t rows = a.level_offset(max_level + 1), cols = b.level_offset(max_level + 1);
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t qi = 0; qi < rows; ++qi) {
    const Cube q = a.cube(qi);
    const double lq = a.side(q.level), mq = first.mass(q);
    if (mq <= 0.0) continue;
    for (std::size_t ri = 0; ri < cols; ++ri) {
      const Cube r = b.cube(ri);
      const double lr = b.side(r.level), mr = second.mass(r);
      if (lq > lr || mr <= 0.0) continue;
      const double D = lq + lr + distance(a, q, b, r);
      m(static_cast<Eigen::Index>(qi), static_cast<Eigen::Index>(ri)) =
          interaction_weight(lq, lr, D, sup_lambda(lam, a, q, D), mq, mr, alpha);
    }
  }
  return m;
}

SchurReport schur_norm(const GridMeasure& first, const GridMeasure& second, const DominatingFunction& lam,
                       double alpha, int max_level, double tolerance) {
  const Matrix m = schur_matrix(first, second, lam, alpha, max_level);
  SchurReport rep;
  rep.rows = static_cast<std::size_t>(m.rows());
  rep.cols = static_cast<std::size_t>(m.cols());
  Vector x = Vector::Ones(m.cols()).normalized();
  double sigma = (m * x).norm();
  if (sigma == 0.0) {
    rep.converged = true;
    return rep;
  }
  for (rep.iterations = 1; rep.iterations <= 100000; ++rep.iterations) {
    x = m.transpose() * (m * x);
    x.normalize();
    const double next = (m * x).norm();
    const bool done = std::abs(next - sigma) <= tolerance * next;
    sigma = next;
    if (done) {
      rep.converged = true;
      break;
    }
  }
  rep.norm = sigma;
  return rep;
}

Cube central_cube(const Grid& grid, int level) {
  const IntVector centre = grid.corner().array() + grid.side_cells(0) / 2;
  return *grid.locate(centre, level);
}

MonteCarloReport badness_probability_mc(int k, int r, double gamma, std::size_t trials, std::uint64_t seed,
                                        const Grid& tmpl) {
  require(trials >= 1, "trials must be at least 1");
  require(k >= r && r >= 0, "the scale 2^k must satisfy k >= r >= 0");
  require(k <= tmpl.depth(), "the scale 2^k l(Q) exceeds the top cube");
  require(gamma > 0.0 && gamma < 0.5, "badness exponent gamma must lie in (0, 1/2)");
  require_template(tmpl);
  MonteCarloReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.placement = central_cube(tmpl, tmpl.depth());
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const Grid other = shifted(tmpl, rng);
    if (is_bad_at(tmpl, rep.placement, other, tmpl.depth() - k, gamma)) ++rep.hits;
  }
  finish(rep);
  return rep;
}

double badness_probability_exact(int k, double gamma, const Grid& tmpl) {
  require(tmpl.dimension() == 1, "the exact badness probability is implemented on the line");
  require(k >= 0 && k <= tmpl.depth(), "the scale 2^k l(Q) exceeds the top cube");
  require_template(tmpl);
  // Half-cell units: Q = [0, 2] after translation, skeleton points every
  // 2^k half cells, and whole-cell shifts move them by 2.
  const std::int64_t step = std::int64_t{1} << k;
  const std::int64_t period = std::max<std::int64_t>(1, step / 2);
  const double h = tmpl.finest_side();
  const double thr = separation_threshold(1, h, std::ldexp(h, k), gamma);
  std::int64_t bad = 0;
  for (std::int64_t u = 0; u < period; ++u) {
    const std::int64_t rho = (2 * u) % step;
    const std::int64_t dist = rho == 0 ? 0 : std::min(rho, std::max<std::int64_t>(0, step - rho - 2));
    if (0.5 * static_cast<double>(dist) * h <= thr) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(period);
}

double fit_decay_exponent(const std::vector<int>& ks, const std::vector<double>& p) {
  require(ks.size() == p.size() && ks.size() >= 2, "the fit needs at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto n = static_cast<double>(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    require(p[i] > 0.0, "probabilities must be positive to fit a decay exponent");
    const double x = ks[i], y = std::log2(p[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

MonteCarloReport boundary_mass_mc(double eta, const Point& x, std::size_t trials, std::uint64_t seed,
                                  const Grid& tmpl, int level) {
  require(trials >= 1, "trials must be at least 1");
  require(eta >= 0.0 && eta < 1.0, "eta must lie in [0, 1)");
  require(level >= 0 && level <= tmpl.depth(), "level outside the template grid");
  require(x.size() == tmpl.dimension(), "point dimension differs from the grid");
  require_template(tmpl);
  const double h = tmpl.finest_side();
  const double quarter = 0.25 * tmpl.top_side();
  for (int i = 0; i < tmpl.dimension(); ++i) {
    const double c = tmpl.shift()(i) + 2.0 * quarter;
    require(std::abs(x(i) - c) < quarter, "x must lie in the central half of the template top cube");
  }
  IntVector cell(tmpl.dimension());
  for (int i = 0; i < tmpl.dimension(); ++i) cell(i) = static_cast<std::int64_t>(std::floor(x(i) / h));

  MonteCarloReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.placement = *tmpl.locate(cell, level);
  const double half = 0.5 * tmpl.side(level);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const Grid other = shifted(tmpl, rng);
    const Point centre = cube_center(other, *other.locate(cell, level));
    if ((x - centre).lpNorm<Eigen::Infinity>() > (1.0 - eta) * half) ++rep.hits;
  }
  finish(rep);
  return rep;
}

}  // namespace dytb
