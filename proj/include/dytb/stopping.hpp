#pragma once

#include "dytb/accretive.hpp"
#include "dytb/forest.hpp"
#include "dytb/operator.hpp"

#include <limits>
#include <vector>

namespace dytb {

/// Maximal cubes Q strictly inside each forest cube P with
/// |int_Q b_P dmu| < mu(Q)/2, iterated down to the finest level. `family`
/// selects b^1 (1) or b^2 (2).
StoppingForest build_linf(const AccretiveSystem& system, const GridMeasure& gm, int family = 1);

/// Maximal cubes Q strictly inside each forest cube P where
///   int_Q |M b_P|^2 > nu(Q)/delta,  or  int_Q |T b_P|^s > nu(Q)/delta,  or
///   |int_Q b_P| < delta nu(Q),
/// with T replaced by T* for family 2.
StoppingForest build_l2(const AccretiveSystem& system, const GridMeasure& gm, const RealOperator& T, double delta,
                        double s, int family = 1);

struct PackingReport {
  double tau = 0.0;              // max one-generation ratio over forest cubes
  std::size_t witness = 0;       // forest cube attaining tau
  std::vector<double> by_jump;   // by_jump[j]: max over cubes Q of the D^{t+j} mass ratio, j >= 1
  bool decay_holds = true;       // by_jump[j] <= tau^{j-1} for every j
};

PackingReport packing_ratio(const StoppingForest& forest, const GridMeasure& gm);

struct CarlesonReport {
  double constant = 0.0;
  std::size_t witness = 0;
  std::string sequence_id;
};

/// max over cubes Q of (sum_{S subset Q} a_S) / mu(Q); a is indexed by cube
/// id. Cubes of zero mass enclosing positive total give an infinite constant.
CarlesonReport carleson_constant(const std::vector<double>& a, const GridMeasure& gm, std::string sequence_id = "");

/// a_Q = mu(Q) on forest cubes and 0 elsewhere.
std::vector<double> mescar_sequence(const StoppingForest& forest, const GridMeasure& gm);

/// sum_Q a_Q |<f>_Q|^2 / ||f||^2 for a leaf function f.
double embedding_ratio(const std::vector<double>& a, const Vector& f, const GridMeasure& gm);

/// sum over cubes Q below the top of |<f>_Q - <f>_{Q^(1)}|^2 mu(Q).
double usfe_value(const Vector& f, const GridMeasure& gm);

}  // namespace dytb
