#include "dytb/cli.hpp"

#include "dytb/pairing.hpp"
#include "dytb/rng.hpp"
#include "dytb/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <type_traits>

namespace dytb {

namespace {

template <typename Config, typename F>
void fields(Config& c, F&& f) {
  f("dimension", c.dimension);
  f("top_scale", c.top_scale);
  f("depth", c.depth);
  f("shift", c.shift);
  f("shift2", c.shift2);
  f("measure", c.measure);
  f("kernel", c.kernel);
  f("alpha", c.alpha);
  f("lambda", c.lambda);
  f("system", c.system);
  f("eps", c.eps);
  f("C", c.C);
  f("forest", c.forest);
  f("delta", c.delta);
  f("s", c.s);
  f("sequence", c.sequence);
  f("r", c.r);
  f("gamma", c.gamma);
  f("eta", c.eta);
  f("k", c.k);
  f("N", c.N);
  f("level", c.level);
  f("x", c.x);
  f("trials", c.trials);
  f("functions", c.functions);
  f("samples", c.samples);
  f("seed", c.seed);
  f("out", c.out);
}

template <typename T>
void read_field(const Json& j, const std::string& name, T& v) {
  auto fail = [&](const char* expected) { throw Error("config field '" + name + "' must be " + expected); };
  if constexpr (std::is_same_v<T, std::string>) {
    if (!j.is_string()) fail("a string");
    v = j.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    if (!j.is_array()) fail("an array of numbers");
    v.clear();
    for (const Json& e : j) {
      if (!e.is_number()) fail("an array of numbers");
      v.push_back(e.get<double>());
    }
  } else if constexpr (std::is_same_v<T, double>) {
    if (!j.is_number()) fail("a number");
    v = j.get<double>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) fail("a nonnegative integer");
    v = j.get<T>();
  } else {
    if (!j.is_number_integer()) fail("an integer");
    v = j.get<T>();
  }
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return s;
}

// ---------------------------------------------------------------------------
// Building blocks

Point axis_vector(const std::vector<double>& v, int n, double fallback, const char* what) {
  if (v.empty()) return Point::Constant(n, fallback);
  require(static_cast<int>(v.size()) == n, std::string(what) + " needs one entry per dimension");
  return Eigen::Map<const Vector>(v.data(), n);
}

Grid first_grid(const ExperimentConfig& c) {
  return Grid(axis_vector(c.shift, c.dimension, 0.0, "shift"), c.top_scale, c.depth, c.dimension, 0);
}

Grid second_grid(const ExperimentConfig& c) {
  const double L = std::ldexp(1.0, c.top_scale);
  const double fallback = c.depth >= 2 ? -0.25 * L + std::ldexp(L, -c.depth) : 0.0;
  return Grid(axis_vector(c.shift2, c.dimension, fallback, "shift2"), c.top_scale, c.depth, c.dimension, 1);
}

AtomicMeasure make_measure(const ExperimentConfig& c, const CellSpace& space) {
  const std::uint64_t seed = derive_seed(c.seed, 2);
  if (c.measure == "lebesgue") return AtomicMeasure::lebesgue(space);
  if (c.measure == "random") return AtomicMeasure::random(space, seed);
  if (c.measure == "sparse") return AtomicMeasure::sparse_atoms(space, std::max<std::size_t>(1, space.size() / 3), seed);
  if (c.measure == "geometric") return AtomicMeasure::geometric(space);
  require(std::filesystem::exists(c.measure), "unknown measure '" + c.measure + "'");
  const AtomicMeasure mu = read_measure_csv(c.measure);
  require(mu.space() == space, "the measure file does not cover the grids' cell box");
  return mu;
}

// One grid with its measure, system, forest and martingale. Not movable:
// the martingale refers to the other members.
struct Side {
  Side(const ExperimentConfig& c, const Grid& g, const AtomicMeasure& mu, int family, const RealOperator* T)
      : gm(g, mu) {
    const std::uint64_t seed = derive_seed(c.seed, static_cast<std::uint64_t>(10 + g.id()));
    if (c.system == "counterexample") {
      auto cx = counterexample_system(c.N, g);
      system = std::move(cx.system);
      forest = std::move(cx.forest);
    } else {
      if (c.system == "t1") {
        system = t1_system(g);
      } else if (c.system == "random") {
        system = random_bounded_system(gm, c.eps, seed);
      } else if (c.system == "block_sign") {
        system = block_sign_system(gm, c.C, seed);
      } else {
        throw Error("unknown system '" + c.system + "'");
      }
      if (c.forest == "linf") {
        forest = build_linf(system, gm, family);
      } else if (c.forest == "l2") {
        require(T != nullptr, "the l2 forest needs an operator");
        forest = build_l2(system, gm, *T, c.delta, c.s, family);
      } else if (c.forest == "trivial") {
        forest = StoppingForest::trivial(g);
      } else {
        throw Error("unknown forest '" + c.forest + "'");
      }
    }
    mg = std::make_unique<Martingale>(system, forest, gm, family);
  }
  Side(const Side&) = delete;
  Side& operator=(const Side&) = delete;

  GridMeasure gm;
  AccretiveSystem system;
  StoppingForest forest;
  std::unique_ptr<Martingale> mg;
};

Vector random_leaves(const Grid& g, std::uint64_t seed) {
  Rng rng(seed);
  Vector f(static_cast<Eigen::Index>(g.leaf_count()));
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.normal();
  return f;
}

// Random values on the cells of `space` inside both top cubes.
Vector random_common(const CellSpace& space, const Grid& a, const Grid& b, std::uint64_t seed) {
  Rng rng(seed);
  const CellBox ta = a.top_box(), tb = b.top_box();
  const IntVector lo = ta.lo.cwiseMax(tb.lo), hi = ta.hi.cwiseMin(tb.hi);
  Vector f = Vector::Zero(static_cast<Eigen::Index>(space.size()));
  for (std::size_t i = 0; i < space.size(); ++i) {
    const IntVector cell = space.cell(i);
    if ((cell.array() >= lo.array()).all() && (cell.array() < hi.array()).all()) {
      f(static_cast<Eigen::Index>(i)) = rng.normal();
    }
  }
  return f;
}

double massive_max(const Vector& v, const GridMeasure& gm) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (gm.leaf_mass()(i) > 0.0) m = std::max(m, std::abs(v(i)));
  }
  return m;
}

DominatingFunction dominating(const ExperimentConfig& c, const RealKernel& kernel) {
  return c.lambda.empty() ? kernel.lam : DominatingFunction::from_spec(c.lambda, c.dimension);
}

// The operator is only needed by the L2 stopping rule.
std::optional<RealOperator> forest_operator(const ExperimentConfig& c, const AtomicMeasure& mu) {
  if (c.forest != "l2" || c.system == "counterexample") return std::nullopt;
  return assemble(kernel_from_spec(c.kernel, mu.space()), mu);
}

// ---------------------------------------------------------------------------
// Artifact writing

class Artifacts {
 public:
  Artifacts(const std::string& command, const ExperimentConfig& c, RunResult& result)
      : command_(command), result_(result), dir_(c.out), config_(to_json(c)) {
    Json hashed = config_;
    hashed.erase("out");
    hash_ = config_hash(hashed);
    std::filesystem::create_directories(dir_);
  }

  const std::string& hash() const { return hash_; }

  /// A CSV whose first line is "# config_hash=... command=...".
  std::ofstream csv(const std::string& suffix = "") {
    const std::string path = (dir_ / (command_ + suffix + ".csv")).string();
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "cannot write " + path);
    out << "# config_hash=" << hash_ << " command=" << command_ << '\n';
    result_.files.push_back(path);
    return out;
  }

  void finish(Json body) {
    body["command"] = command_;
    body["config"] = config_;
    body["config_hash"] = hash_;
    body["pass"] = result_.pass;
    const std::string path = (dir_ / (command_ + ".json")).string();
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "cannot write " + path);
    out << body.dump(2) << '\n';
    result_.files.push_back(path);
    result_.report = std::move(body);
  }

 private:
  std::string command_;
  RunResult& result_;
  std::filesystem::path dir_;
  Json config_;
  std::string hash_;
};

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// Commands

void cmd_decompose(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g = first_grid(c);
  const AtomicMeasure mu = make_measure(c, CellSpace::covering(g));
  const auto T = forest_operator(c, mu);
  const Side side(c, g, mu, 1, T ? &*T : nullptr);
  const Martingale& mg = *side.mg;
  const Vector f = random_leaves(g, derive_seed(c.seed, 3));
  const MartingaleCoefficients coeffs = mg.decompose(f);
  const double scale = std::max(massive_max(f, side.gm), 1e-300);
  const double reconstruction = massive_max(Vector(mg.reconstruct(coeffs) - f), side.gm) / scale;
  double truncation = 0.0;
  for (int k = 0; k <= g.depth(); ++k) {
    const Vector e = mg.expectation(k, f);
    const Vector partial = mg.reconstruct(mg.decompose(f, k));
    truncation = std::max(truncation, massive_max(Vector(partial - e), side.gm) / std::max(massive_max(e, side.gm), 1e-300));
  }
  res.pass = reconstruction <= kIdentityTolerance && truncation <= kIdentityTolerance;
  auto out = art.csv();
  write_coefficients_csv(coeffs, g, out);
  res.summary = "reconstruction residual " + fmt(reconstruction) + ", truncation residual " + fmt(truncation);
  art.finish({{"reconstruction_residual", reconstruction}, {"truncation_residual", truncation},
              {"forest_size", side.forest.size()}});
}

void cmd_sqf(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g = first_grid(c);
  const AtomicMeasure mu = make_measure(c, CellSpace::covering(g));
  const auto T = forest_operator(c, mu);
  const Side side(c, g, mu, 1, T ? &*T : nullptr);
  auto out = art.csv();
  out << "function,ratio,dual_ratio\n";
  double worst = 0.0, worst_dual = 0.0;
  for (std::size_t i = 0; i < c.functions; ++i) {
    const Vector f = random_leaves(g, derive_seed(c.seed, 100 + i));
    const double ratio = side.mg->square_function_ratio(f);
    const double dual = side.mg->dual_square_sum(f) / side.gm.norm_squared(f);
    res.pass = res.pass && std::isfinite(ratio) && std::isfinite(dual) && ratio >= 0.0;
    worst = std::max(worst, ratio);
    worst_dual = std::max(worst_dual, dual);
    out << i << ',' << fmt(ratio) << ',' << fmt(dual) << '\n';
  }
  res.summary = "max square function ratio " + fmt(worst) + ", max dual ratio " + fmt(worst_dual);
  art.finish({{"max_ratio", worst}, {"max_dual_ratio", worst_dual}, {"functions", c.functions}});
}

void cmd_dual_growth(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const DualGrowth d = counterexample_dual_growth(c.N);
  auto out = art.csv();
  out << "j,A,A_closed,per_j,per_j_closed\n";
  for (int j = 0; j <= d.N; ++j) {
    const auto J = static_cast<std::size_t>(j);
    out << j << ',' << fmt(d.A[J]) << ',' << fmt(d.A_closed[J]) << ',' << fmt(d.per_j[J]) << ','
        << fmt(d.per_j_closed[J]) << '\n';
  }
  res.pass = d.max_relative_error <= kIdentityTolerance;
  const double per_n = d.total / d.N;
  res.summary = "total " + fmt(d.total) + ", total/N " + fmt(per_n);
  art.finish({{"N", d.N}, {"total", d.total}, {"total_over_N", per_n}, {"full_sum", d.full_sum},
              {"norm_f", d.norm_f}, {"max_relative_error", d.max_relative_error}});
}

void cmd_stopping(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g = first_grid(c);
  const AtomicMeasure mu = make_measure(c, CellSpace::covering(g));
  const auto T = forest_operator(c, mu);
  const Side side(c, g, mu, 1, T ? &*T : nullptr);
  const PackingReport pack = packing_ratio(side.forest, side.gm);
  auto out = art.csv();
  out << "generation,cube_id,level,code,mass\n";
  const auto& gens = side.forest.generations();
  for (std::size_t t = 0; t < gens.size(); ++t) {
    for (std::size_t id : gens[t]) {
      const Cube q = g.cube(id);
      out << t << ',' << id << ',' << q.level << ',' << q.code << ',' << fmt(side.gm.mass(q)) << '\n';
    }
  }
  res.pass = pack.decay_holds;
  Json body{{"tau", pack.tau}, {"witness", pack.witness}, {"by_jump", pack.by_jump}, {"decay_holds", pack.decay_holds},
            {"forest_size", side.forest.size()}, {"generations", gens.size()}, {"forest", to_json(side.forest)}};
  if (c.forest == "linf" && c.system != "counterexample" && side.system.C > 1.0) {
    const double bound = (side.system.C - 1.0) / (side.system.C - 0.5);
    body["tau_bound"] = bound;
    res.pass = res.pass && pack.tau <= bound + kIdentityTolerance;
  }
  res.summary = "tau " + fmt(pack.tau) + ", " + std::to_string(side.forest.size()) + " stopping cubes";
  art.finish(std::move(body));
}

void cmd_carleson(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g1 = first_grid(c);
  std::vector<double> a;
  Json body;
  std::unique_ptr<Side> s1, s2;
  std::optional<AtomicMeasure> mu;
  std::optional<RealOperator> T;
  const GridMeasure* gm = nullptr;
  if (c.sequence == "mescar" || c.sequence == "gcar") {
    mu = make_measure(c, CellSpace::covering(g1));
    T = forest_operator(c, *mu);
    s1 = std::make_unique<Side>(c, g1, *mu, 1, T ? &*T : nullptr);
    gm = &s1->gm;
    if (c.sequence == "mescar") {
      a = mescar_sequence(s1->forest, s1->gm);
      const double tau = packing_ratio(s1->forest, s1->gm).tau;
      body["tau"] = tau;
      body["bound"] = 1.0 + 1.0 / (1.0 - tau);
    } else {
      a = gcar_sequence(s1->system, s1->forest, s1->gm);
    }
  } else if (c.sequence == "ar" || c.sequence == "br") {
    const Grid g2 = second_grid(c);
    mu = make_measure(c, CellSpace::covering(g1, g2));
    T = assemble(kernel_from_spec(c.kernel, mu->space()), *mu);
    s1 = std::make_unique<Side>(c, g1, *mu, 1, &*T);
    s2 = std::make_unique<Side>(c, g2, *mu, 2, &*T);
    const ArBrReport ab = ar_br_sequences(*T, containing_map(g1, g2, 1), *s1->mg, *s2->mg, c.s);
    a = c.sequence == "ar" ? ab.a : ab.b;
    body["p"] = ab.p;
    gm = &s2->gm;
  } else {
    throw Error("unknown Carleson sequence '" + c.sequence + "'");
  }
  const CarlesonReport rep = carleson_constant(a, *gm, c.sequence);
  body["constant"] = rep.constant;
  body["witness"] = rep.witness;
  if (body.contains("bound")) res.pass = rep.constant <= body["bound"].get<double>();
  double worst = 0.0;
  for (std::size_t i = 0; i < c.functions; ++i) {
    const Vector f = random_leaves(gm->grid(), derive_seed(c.seed, 100 + i));
    worst = std::max(worst, embedding_ratio(a, f, *gm));
  }
  body["max_embedding_ratio"] = worst;
  res.pass = res.pass && std::isfinite(rep.constant) && worst <= 4.0 * rep.constant;
  auto out = art.csv();
  out << "cube_id,level,code,a\n";
  for (std::size_t id = 0; id < a.size(); ++id) {
    if (a[id] == 0.0) continue;
    const Cube q = gm->grid().cube(id);
    out << id << ',' << q.level << ',' << q.code << ',' << fmt(a[id]) << '\n';
  }
  res.summary = c.sequence + " Carleson constant " + fmt(rep.constant) + ", max embedding ratio " + fmt(worst);
  art.finish(std::move(body));
}

void cmd_usfe(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g = first_grid(c);
  const GridMeasure gm(g, make_measure(c, CellSpace::covering(g)));
  auto out = art.csv();
  out << "function,usfe,closed_form,relative_error\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < c.functions; ++i) {
    const Vector f = random_leaves(g, derive_seed(c.seed, 100 + i));
    const double value = usfe_value(f, gm);
    const double top = gm.average(f, g.top());
    const double norm = gm.norm_squared(f);
    const double closed = norm - top * top * gm.mass(g.top());
    const double err = std::abs(value - closed) / std::max(norm, 1e-300);
    worst = std::max(worst, err);
    out << i << ',' << fmt(value) << ',' << fmt(closed) << ',' << fmt(err) << '\n';
  }
  res.pass = worst <= kIdentityTolerance;
  res.summary = "max relative error " + fmt(worst);
  art.finish({{"max_relative_error", worst}, {"functions", c.functions}});
}

void cmd_kernel_verify(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g = first_grid(c);
  const RealKernel kernel = kernel_from_spec(c.kernel, CellSpace::covering(g));
  const double lo = g.shift()(0), hi = lo + g.top_side();
  const KernelReport rep = verify_standard_kernel(kernel, c.samples, c.seed, lo, hi);
  res.pass = rep.admissible == c.samples && std::isfinite(rep.size_constant) && std::isfinite(rep.x_regularity) &&
             std::isfinite(rep.y_regularity);
  auto out = art.csv();
  out << "kernel,admissible,rejected,size_constant,x_regularity,y_regularity\n";
  out << kernel.name << ',' << rep.admissible << ',' << rep.rejected << ',' << fmt(rep.size_constant) << ','
      << fmt(rep.x_regularity) << ',' << fmt(rep.y_regularity) << '\n';
  res.summary = "size " + fmt(rep.size_constant) + ", x-regularity " + fmt(rep.x_regularity) + ", y-regularity " +
                fmt(rep.y_regularity);
  art.finish({{"kernel", kernel.name}, {"admissible", rep.admissible}, {"rejected", rep.rejected},
              {"size_constant", rep.size_constant}, {"x_regularity", rep.x_regularity},
              {"y_regularity", rep.y_regularity}});
}

void cmd_pairing_split(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g1 = first_grid(c), g2 = second_grid(c);
  const AtomicMeasure mu = make_measure(c, CellSpace::covering(g1, g2));
  const RealOperator T = assemble(kernel_from_spec(c.kernel, mu.space()), mu);
  const Side s1(c, g1, mu, 1, &T), s2(c, g2, mu, 2, &T);
  const Vector f = random_common(mu.space(), g1, g2, derive_seed(c.seed, 3));
  const Vector g = random_common(mu.space(), g1, g2, derive_seed(c.seed, 4));
  const PairingLedger led = split_pairing(T, f, g, *s1.mg, *s2.mg, c.r, c.gamma, c.truncation());
  res.pass = led.identity_holds();
  const auto& n = led.counts;
  auto out = art.csv();
  out << "bucket,value,pairs\n";
  out << "sigma1," << fmt(led.sigma1) << ',' << n.sigma1 << '\n';
  out << "sigma2_good," << fmt(led.sigma2_good) << ',' << n.sigma2_good << '\n';
  out << "sigma2_bad," << fmt(led.sigma2_bad) << ',' << n.sigma2_bad << '\n';
  out << "sigma3," << fmt(led.sigma3) << ',' << n.sigma3 << '\n';
  out << "symmetric_part," << fmt(led.symmetric_part) << ',' << n.symmetric << '\n';
  out << "edge_EQ0," << fmt(led.edge_EQ0) << ",0\n";
  out << "edge_ER0," << fmt(led.edge_ER0) << ",0\n";
  out << "edge_both," << fmt(led.edge_both) << ",0\n";
  out << "total," << fmt(led.total) << ',' << n.pairs << '\n';
  res.summary = "total " + fmt(led.total) + ", bookkeeping residual " + fmt(led.residual());
  art.finish({{"sigma1", led.sigma1},
              {"sigma2_good", led.sigma2_good},
              {"sigma2_bad", led.sigma2_bad},
              {"sigma3", led.sigma3},
              {"symmetric_part", led.symmetric_part},
              {"edge_EQ0", led.edge_EQ0},
              {"edge_ER0", led.edge_ER0},
              {"edge_both", led.edge_both},
              {"total", led.total},
              {"bucket_sum", led.bucket_sum()},
              {"residual", led.residual()},
              {"scale", led.scale},
              {"params", {{"r", led.r}, {"gamma", led.gamma}, {"k", led.k}}},
              {"counts",
               {{"sigma1", n.sigma1},
                {"sigma2_good", n.sigma2_good},
                {"sigma2_bad", n.sigma2_bad},
                {"sigma3", n.sigma3},
                {"symmetric", n.symmetric},
                {"pairs", n.pairs},
                {"good_same_ancestor", n.good_same_ancestor},
                {"good_new_ancestor", n.good_new_ancestor}}}});
}

void cmd_collapse(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g1 = first_grid(c), g2 = second_grid(c);
  const AtomicMeasure mu = make_measure(c, CellSpace::covering(g1, g2));
  const auto T = forest_operator(c, mu);
  const Side s2(c, g2, mu, 2, T ? &*T : nullptr);
  auto out = art.csv();
  out << "function,good,chain_only,outside,beyond_top,non_nested,max_residual,scale\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < c.functions; ++i) {
    const Vector g = random_leaves(g2, derive_seed(c.seed, 100 + i));
    const CollapseReport rep = paraproduct_collapse(g, g1, *s2.mg, c.r, c.gamma);
    res.pass = res.pass && rep.holds();
    worst = std::max(worst, rep.max_relative);
    out << i << ',' << rep.good << ',' << rep.chain_only << ',' << rep.outside << ',' << rep.beyond_top << ','
        << rep.non_nested << ',' << fmt(rep.max_residual) << ',' << fmt(rep.scale) << '\n';
  }
  res.summary = "max relative collapse residual " + fmt(worst);
  art.finish({{"max_relative_residual", worst}, {"functions", c.functions}});
}

Grid template_grid(const ExperimentConfig& c) {
  return Grid(axis_vector(c.shift, c.dimension, 0.0, "shift"), c.top_scale, c.depth, c.dimension);
}

void cmd_badness_mc(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid tmpl = template_grid(c);
  const int k = c.truncation();
  const MonteCarloReport mc = badness_probability_mc(k, c.r, c.gamma, c.trials, c.seed, tmpl);
  Json body{{"k", k},
            {"fraction", mc.fraction},
            {"standard_error", mc.standard_error},
            {"trials", mc.trials},
            {"hits", mc.hits},
            {"placement", {{"level", mc.placement.level}, {"code", mc.placement.code}}}};
  auto out = art.csv();
  out << "k,trials,hits,fraction,standard_error,exact\n";
  out << k << ',' << mc.trials << ',' << mc.hits << ',' << fmt(mc.fraction) << ',' << fmt(mc.standard_error) << ',';
  if (c.dimension == 1) {
    const double exact = badness_probability_exact(k, c.gamma, tmpl);
    body["exact"] = exact;
    const double allowed = 3.0 * std::max(mc.standard_error, 1.0 / static_cast<double>(mc.trials));
    res.pass = std::abs(mc.fraction - exact) <= allowed;
    out << fmt(exact) << '\n';
  } else {
    out << "nan\n";
  }
  res.summary = "fraction " + fmt(mc.fraction) + " +- " + fmt(mc.standard_error);
  art.finish(std::move(body));
}

// Exact probability over the aligned shifts, axis by axis: a shift of t
// cells moves the level cubes by t, so only t mod side_cells(level)
// matters once the window holds whole periods.
std::optional<double> lattice_boundary_probability(double eta, const Point& x, const Grid& tmpl, int level) {
  const double h = tmpl.finest_side();
  const std::int64_t window = std::int64_t{1} << (tmpl.depth() - 1);
  const std::int64_t side = tmpl.side_cells(level);
  const std::int64_t n = std::min(window, side);
  if (n > (std::int64_t{1} << 24)) return std::nullopt;
  double inside = 1.0;
  for (int i = 0; i < tmpl.dimension(); ++i) {
    const auto cell = static_cast<std::int64_t>(std::floor(x(i) / h));
    std::int64_t hits = 0;
    for (std::int64_t t = -window / 2; t < -window / 2 + n; ++t) {
      const double w = tmpl.shift()(i) + static_cast<double>(t) * h;
      const auto offset = cell - static_cast<std::int64_t>(std::llround(w / h));
      const std::int64_t m = offset >= 0 ? offset / side : -((-offset + side - 1) / side);
      const double centre = w + (static_cast<double>(m) + 0.5) * static_cast<double>(side) * h;
      if (std::abs(x(i) - centre) > (1.0 - eta) * 0.5 * static_cast<double>(side) * h) ++hits;
    }
    inside *= 1.0 - static_cast<double>(hits) / static_cast<double>(n);
  }
  return 1.0 - inside;
}

void cmd_boundary_mc(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid tmpl = template_grid(c);
  const double L = tmpl.top_side();
  Point x = axis_vector(c.x, c.dimension, 0.0, "x");
  if (c.x.empty()) x = tmpl.shift().array() + 0.5 * L + 0.1234567 * 0.25 * L;
  const MonteCarloReport mc = boundary_mass_mc(c.eta, x, c.trials, c.seed, tmpl, c.level);
  const double closed = 1.0 - std::pow(1.0 - c.eta, c.dimension);
  const auto lattice = lattice_boundary_probability(c.eta, x, tmpl, c.level);
  const double reference = lattice.value_or(closed);
  res.pass = std::abs(mc.fraction - reference) <= 3.0 * std::max(mc.standard_error, 1.0 / static_cast<double>(mc.trials));
  auto out = art.csv();
  out << "eta,level,trials,hits,fraction,standard_error,lattice_exact,closed_form\n";
  out << fmt(c.eta) << ',' << c.level << ',' << mc.trials << ',' << mc.hits << ',' << fmt(mc.fraction) << ','
      << fmt(mc.standard_error) << ',' << (lattice ? fmt(*lattice) : "nan") << ',' << fmt(closed) << '\n';
  res.summary = "fraction " + fmt(mc.fraction) + " +- " + fmt(mc.standard_error) + ", exact on the lattice " +
                (lattice ? fmt(*lattice) : "n/a") + ", continuum " + fmt(closed);
  Json body{{"fraction", mc.fraction},
            {"standard_error", mc.standard_error},
            {"closed_form", closed},
            {"x", std::vector<double>(x.data(), x.data() + x.size())}};
  body["lattice_exact"] = lattice ? Json(*lattice) : Json(nullptr);
  art.finish(std::move(body));
}

void cmd_schur(const ExperimentConfig& c, Artifacts& art, RunResult& res) {
  const Grid g1 = first_grid(c), g2 = second_grid(c);
  const AtomicMeasure mu = make_measure(c, CellSpace::covering(g1, g2));
  const GridMeasure gm1(g1, mu), gm2(g2, mu);
  const DominatingFunction lam = dominating(c, kernel_from_spec(c.kernel, mu.space()));
  auto out = art.csv();
  out << "max_level,rows,cols,norm,iterations\n";
  Json norms = Json::array();
  for (int level = 0; level <= c.depth; ++level) {
    const SchurReport rep = schur_norm(gm1, gm2, lam, c.alpha, level);
    res.pass = res.pass && rep.converged;
    norms.push_back(rep.norm);
    out << level << ',' << rep.rows << ',' << rep.cols << ',' << fmt(rep.norm) << ',' << rep.iterations << '\n';
  }
  res.summary = "norm at depth " + std::to_string(c.depth) + ": " + fmt(norms.back().get<double>());
  art.finish({{"norms", norms}, {"lambda", lam.name}});
}

using Command = void (*)(const ExperimentConfig&, Artifacts&, RunResult&);

const std::vector<std::pair<std::string, Command>>& commands() {
  static const std::vector<std::pair<std::string, Command>> table{
      {"decompose", cmd_decompose},         {"sqf", cmd_sqf},
      {"dual-growth", cmd_dual_growth},     {"stopping", cmd_stopping},
      {"carleson", cmd_carleson},           {"usfe", cmd_usfe},
      {"kernel-verify", cmd_kernel_verify}, {"pairing-split", cmd_pairing_split},
      {"collapse", cmd_collapse},           {"badness-mc", cmd_badness_mc},
      {"boundary-mc", cmd_boundary_mc},     {"schur", cmd_schur}};
  return table;
}

}  // namespace

Json to_json(const ExperimentConfig& c) {
  Json j = Json::object();
  fields(c, [&](const char* name, const auto& v) { j[name] = v; });
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  require(j.is_object(), "config must be a JSON object");
  ExperimentConfig c;
  std::vector<std::string> known;
  fields(c, [&](const char* name, auto& v) {
    known.emplace_back(name);
    if (j.contains(name)) read_field(j.at(name), name, v);
  });
  for (const auto& item : j.items()) {
    require(std::find(known.begin(), known.end(), item.key()) != known.end(),
            "unknown config field '" + item.key() + "'");
  }
  require(c.dimension >= 1 && c.dimension <= Grid::kMaxDimension, "dimension must be 1, 2 or 3");
  require(c.depth >= 1 && c.depth <= 40, "depth must lie in [1, 40]");
  require(c.functions >= 1, "functions must be at least 1");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply_environment(ExperimentConfig& c,
                       const std::function<std::optional<std::string>(const std::string&)>& getenv) {
  Json j = to_json(c);
  for (auto& item : j.items()) {
    const std::string var = "DYTB_" + upper(item.key());
    const auto value = getenv(var);
    if (!value) continue;
    if (item.value().is_string()) {
      item.value() = *value;
      continue;
    }
    try {
      item.value() = Json::parse(*value);
    } catch (const Json::exception&) {
      throw Error("environment variable " + var + " is not valid JSON: " + *value);
    }
  }
  c = config_from_json(j);
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& entry : commands()) v.push_back(entry.first);
    return v;
  }();
  return names;
}

RunResult run_command(const std::string& command, const ExperimentConfig& c) {
  for (const auto& [name, fn] : commands()) {
    if (name != command) continue;
    RunResult res;
    Artifacts art(command, c, res);
    fn(c, art, res);
    return res;
  }
  throw Error("unknown command '" + command + "'");
}

}  // namespace dytb
