#pragma once

#include "dytb/accretive.hpp"
#include "dytb/forest.hpp"
#include "dytb/measure.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dytb {

/// Denominators |<b>_Q'| below this multiple of the ess-sup of b are refused.
inline constexpr double kAccretivityMargin = 1e-10;

/// e0 + sum of deltas over cubes above `truncation_level`. Functions live on
/// grid leaves (Morton order); deltas[id] is stored on the leaves of cube id
/// only and is empty for cubes at or below the truncation level.
struct MartingaleCoefficients {
  Vector e0;
  std::vector<Vector> deltas;
  int truncation_level = 0;
};

struct SplitResidual {
  double residual = 0.0;  // max-norm of the identity's defect
  double scale = 0.0;     // max-norm of the largest term involved
};

/// The b-adapted martingale differences of one grid, built from one family
/// of an accretive system (b^1 for the first grid, b^2 for the second) and
/// its stopping forest.
class Martingale {
 public:
  Martingale(const AccretiveSystem& system, const StoppingForest& forest, const GridMeasure& gm, int family = 1);

  const Grid& grid() const { return gm_.grid(); }
  const GridMeasure& measure() const { return gm_; }
  const StoppingForest& forest() const { return forest_; }

  /// Delta_Q f on the leaves of Q.
  Vector delta(const Cube& q, const Vector& f) const;
  /// (Delta_Q)^* g on the leaves of Q.
  Vector delta_adjoint(const Cube& q, const Vector& g) const;
  /// E_{Q0} f = <f>_{Q0} / <b_{Q0}>_{Q0} b_{Q0}.
  Vector top_term(const Vector& f) const;
  /// b^{a}_k = sum over level-k cubes of chi_Q b_{Q^a}.
  Vector adapted_b(int k) const;
  /// E^a_k f = (E_k f / E_k b^a_k) b^a_k, evaluated cube by cube.
  Vector expectation(int k, const Vector& f) const;

  MartingaleCoefficients decompose(const Vector& f, int k) const;
  MartingaleCoefficients decompose(const Vector& f) const { return decompose(f, grid().depth()); }
  Vector reconstruct(const MartingaleCoefficients& c) const;

  /// sum_Q ||Delta_Q f||^2 / ||f||^2.
  double square_function_ratio(const Vector& f) const;
  /// sum_Q ||(Delta_Q)^* f||^2 over every cube, unnormalized.
  double dual_square_sum(const Vector& f) const;
  /// sum over Q with Q^a = P of ||(Delta_Q)^* f||^2, divided by ||chi_P f||^2.
  double restricted_dual_ratio(const Cube& p, const Vector& f) const;

  /// Delta_Q f - (Delta_Q)^2 f - sum of phi_P over stopping children P.
  SplitResidual phi_split(const Cube& q, const Vector& f) const;
  /// chi_{Q_i} Delta_Q f against its s/h/u pieces.
  struct ShuPieces {
    Vector s, h, u;  // the three pieces on the leaves of Q_i
    SplitResidual check;
  };
  ShuPieces shu_split(const Cube& q, int child, const Vector& f) const;

  /// Ancestor test function b_{Q^a} restricted to the leaves of Q.
  Vector ancestor_b(const Cube& q) const;
  /// <g>_R / <b_{R^a}>_R b_{R^a} on all leaves, with b_{R^a} kept on the
  /// whole of R^a.
  Vector averaged_b(const Cube& r, const Vector& g) const;
  /// b_P of a forest cube, extended by zero to all leaves.
  Vector forest_b(std::size_t id) const;

 private:
  Eigen::Ref<const Vector> b_on(std::size_t owner, const Cube& q) const;
  double checked_average_b(std::size_t owner, const Cube& q) const;
  double integral(const Vector& f, const Cube& q) const;
  double weighted_integral(std::size_t owner, const Vector& f, const Cube& q) const;
  double local_norm(const Vector& local, const Cube& q) const;

  const AccretiveSystem& system_;
  const StoppingForest& forest_;
  const GridMeasure& gm_;
  const std::vector<Vector>& b_;
  std::vector<double> sup_;  // ess-sup of b per forest cube
};

/// beta_Q = |<b_{Q^a}>_Q - <b_{Q^a}>_{parent}|^2 nu(Q) per cube id; the top
/// cube has no parent and gets 0.
std::vector<double> gcar_sequence(const AccretiveSystem& system, const StoppingForest& forest, const GridMeasure& gm);

struct DualGrowth {
  int N = 0;
  std::vector<double> A;           // A_0..A_N, measured
  std::vector<double> A_closed;    // A_0..A_N from the closed form
  std::vector<double> per_j;       // index j = 1..N; per_j[0] = 0
  std::vector<double> per_j_closed;
  double total = 0.0;              // sum of per_j
  double full_sum = 0.0;           // sum over all cubes of ||(Delta_Q)^* f||^2
  double norm_f = 0.0;             // ||f||_2^2
  double max_relative_error = 0.0; // per_j against per_j_closed
};

/// The dual square function growth on the counterexample system with
/// f = 2^{N/2} chi_{Q_N}. Every function involved is constant on the pieces
/// [0, 2^-N) and [2^-m-1, 2^-m), so averages are exact finite sums over
/// those pieces; no grid is built.
DualGrowth counterexample_dual_growth(int N);

/// The same quantities computed through `Martingale` on an actual 1D grid
/// of depth >= N.
DualGrowth counterexample_dual_growth(int N, const Grid& grid);

/// Rows kind,cube_id,cell_index,value with kind "e0" or "delta"; cell_index
/// is the global leaf index.
void write_coefficients_csv(const MartingaleCoefficients& c, const Grid& grid, std::ostream& out);

}  // namespace dytb
