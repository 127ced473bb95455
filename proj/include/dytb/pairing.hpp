#pragma once

#include "dytb/martingale.hpp"
#include "dytb/operator.hpp"
#include "dytb/stopping.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dytb {

/// Decomposition of <T E^{a,1}_k f, E^{a,2}_k g> over pairs of martingale
/// differences of two grids. Pairs with l(Q) <= l(R) fall into sigma1
/// (separated), sigma2 (l(Q) <= 2^-r l(R), split by badness of Q) or sigma3
/// (comparable and close); pairs with l(R) < l(Q) form the symmetric part.
struct PairingLedger {
  double sigma1 = 0.0;
  double sigma2_good = 0.0;
  double sigma2_bad = 0.0;
  double sigma3 = 0.0;
  double symmetric_part = 0.0;
  double edge_EQ0 = 0.0;   // <T E_{Q0} f, E^{a,2}_k g>
  double edge_ER0 = 0.0;   // <T E^{a,1}_k f, E_{R0} g>
  double edge_both = 0.0;  // <T E_{Q0} f, E_{R0} g>
  double total = 0.0;      // computed directly from the two expectations
  double scale = 0.0;      // sum of the absolute values of every term

  struct Counts {
    std::size_t sigma1 = 0, sigma2_good = 0, sigma2_bad = 0, sigma3 = 0, symmetric = 0;
    std::size_t pairs = 0;  // |D_<k| x |D'_<k|
    // sigma2-good pairs with (R_1)^a = R^a and with (R_1)^a = R_1
    std::size_t good_same_ancestor = 0, good_new_ancestor = 0;
  } counts;

  int r = 0;
  double gamma = 0.0;
  int k = 0;

  double bucket_sum() const {
    return sigma1 + sigma2_good + sigma2_bad + sigma3 + symmetric_part + edge_EQ0 + edge_ER0 - edge_both;
  }
  double residual() const;
  bool identity_holds(double tolerance = kIdentityTolerance) const;
};

/// `f` and `g` are cell functions on T's cell space, which must contain
/// both grids; both must vanish (up to null sets) outside both top cubes.
/// `first` uses b^1 and `second` uses b^2. Cubes of level < k take part.
PairingLedger split_pairing(const RealOperator& T, const Vector& f, const Vector& g, const Martingale& first,
                            const Martingale& second, int r, double gamma, int k);

struct CollapseReport {
  double max_residual = 0.0;
  double scale = 0.0;           // max-norm of the largest term involved
  double max_relative = 0.0;    // max over Q of residual / scale
  std::size_t good = 0;         // good cubes, telescoped over every close R
  std::size_t chain_only = 0;   // bad cubes, telescoped over R containing Q
  std::size_t outside = 0;      // cubes not inside R0
  std::size_t beyond_top = 0;   // 2^alpha l(Q) exceeds the top side
  std::size_t non_nested = 0;   // close cubes R at a good cube's scales not containing Q
  std::size_t checked() const { return good + chain_only; }
  bool holds(double tolerance = kIdentityTolerance) const {
    return non_nested == 0 && max_residual <= tolerance * std::max(scale, 1e-300);
  }
};

/// For every good Q of `first` (alpha(Q) = max(goodness class, r)), sums
/// t(R_1) - t(R) over the cubes R of `second` with l(R) >= 2^alpha l(Q) and
/// d(Q, R) <= 2 n^{1/2} l(Q)^gamma l(R)^{1-gamma}, and compares with
/// t(S(Q)) - t(R0), where t(R) = <g>_R / <b_{R^a}>_R b_{R^a}. Bad cubes get
/// the same telescope with alpha = r over the cubes containing them only.
/// `g` is a leaf function of the second grid; comparisons are made as cell
/// functions.
CollapseReport paraproduct_collapse(const Vector& g, const Grid& first, const Martingale& second, int r,
                                    double gamma);

/// For each cube of `first`, the cube S(Q) of `second` used by the collapse
/// (the child of the scale-2^alpha(Q) ancestor containing Q); empty for bad
/// cubes or cubes whose telescope leaves the top.
std::vector<std::optional<std::size_t>> collapse_targets(const Grid& first, const Grid& second, int r,
                                                          double gamma);

/// F(Q) = the cube of `second` containing Q that is `up` levels coarser;
/// up < 0 maps every cube to R0. Empty when Q is not inside R0, the level
/// would be negative, or Q straddles the cubes of that level.
std::vector<std::optional<std::size_t>> containing_map(const Grid& first, const Grid& second, int up);

struct ArBrReport {
  std::vector<double> a;  // indexed by cube id of the second grid
  std::vector<double> b;
  CarlesonReport a_carleson;
  CarlesonReport b_carleson;
  double p = 0.0;  // s / 2
  std::size_t mapped = 0;
};

/// a_R = sum over F(Q) = R of ||(Delta_Q)^* T^* b^2_{R^a}||^2 and
/// b_R = sum over the same Q and their stopping children P of
/// ||chi_P T^* b^2_{R^a}||^2. `F` is indexed by cube id of the first grid.
ArBrReport ar_br_sequences(const RealOperator& T, const std::vector<std::optional<std::size_t>>& F,
                           const Martingale& first, const Martingale& second, double s);

/// max of lambda(z, r) over the centres of the cells of Q.
double sup_lambda(const DominatingFunction& lam, const Grid& grid, const Cube& q, double r);

/// l(Q)^{alpha/2} l(R)^{alpha/2} / (D^alpha sup_lambda) mu(Q)^{1/2} mu(R)^{1/2}.
double interaction_weight(double side_q, double side_r, double D, double sup_lam, double mass_q, double mass_r,
                          double alpha);

struct LongRangeReport {
  double value = 0.0;         // |<T phi, psi>|
  double bound_first = 0.0;   // with d(Q, R)
  double bound_second = 0.0;  // T_QR with D(Q, R) = l(Q) + l(R) + d(Q, R)
  double ratio_first = 0.0;
  double ratio_second = 0.0;
  double distance = 0.0;
  double threshold = 0.0;
};

/// `phi` and `psi` are cell functions supported on Q (a cube of the grid of
/// `gq`) and R (of `gr`); phi must have mu-mean zero.
LongRangeReport long_range_ratio(const RealOperator& T, const GridMeasure& gq, const Cube& q, const GridMeasure& gr,
                                 const Cube& r, const Vector& phi, const Vector& psi, const DominatingFunction& lam,
                                 double alpha, double gamma);

struct SchurReport {
  double norm = 0.0;
  std::size_t rows = 0, cols = 0;
  int iterations = 0;
  bool converged = false;
};

/// The matrix T_QR over cubes of level <= max_level of both grids, zero
/// unless l(Q) <= l(R).
Matrix schur_matrix(const GridMeasure& first, const GridMeasure& second, const DominatingFunction& lam, double alpha,
                    int max_level);

/// Largest singular value of `schur_matrix` by power iteration on T^T T,
/// stopped when successive estimates agree to `tolerance` relative.
SchurReport schur_norm(const GridMeasure& first, const GridMeasure& second, const DominatingFunction& lam,
                       double alpha, int max_level, double tolerance = 1e-8);

struct MonteCarloReport {
  double fraction = 0.0;
  double standard_error = 0.0;
  std::size_t trials = 0;
  std::size_t hits = 0;
  std::uint64_t seed = 0;
  Cube placement;  // the fixed cube, in the template grid
};

/// The level-`level` cube of `grid` containing the cell just above the
/// centre of the top cube.
Cube central_cube(const Grid& grid, int level);

/// Fraction of shifted grids (shifts aligned to the template's cells,
/// uniform in [-L/4, L/4)^n) in which the central finest cube Q is within
/// threshold of the skeleton of some cube of side 2^k l(Q).
MonteCarloReport badness_probability_mc(int k, int r, double gamma, std::size_t trials, std::uint64_t seed,
                                        const Grid& tmpl);

/// Exact value of the same probability on the line, by counting the shift
/// residues whose skeleton points come within threshold.
double badness_probability_exact(int k, double gamma, const Grid& tmpl);

/// Least-squares slope of -log2(p) against k.
double fit_decay_exponent(const std::vector<int>& ks, const std::vector<double>& p);

/// Fraction of shifted grids in which x lies outside (1 - eta)Q for the
/// level-`level` cube Q containing it.
MonteCarloReport boundary_mass_mc(double eta, const Point& x, std::size_t trials, std::uint64_t seed,
                                  const Grid& tmpl, int level);

}  // namespace dytb
