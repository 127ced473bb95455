#pragma once

#include "dytb/forest.hpp"
#include "dytb/measure.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dytb {

enum class AccretiveMode { Linf, L2 };

std::string to_string(AccretiveMode mode);
AccretiveMode accretive_mode_from_string(const std::string& name);

/// Test functions b^1_Q, b^2_Q per cube of one grid. Each b_Q is stored on
/// the leaves of Q only (Morton order), so it vanishes outside Q by
/// construction.
struct AccretiveSystem {
  Grid grid;
  AccretiveMode mode = AccretiveMode::Linf;
  double C = 1.0;
  double s = 4.0;
  std::string generator;
  std::vector<Vector> b1;  // indexed by cube id
  std::vector<Vector> b2;

  const Vector& first(const Cube& q) const { return b1[grid.id(q)]; }
  const Vector& second(const Cube& q) const { return b2[grid.id(q)]; }
  /// b_Q extended by zero to all leaves of the grid.
  Vector extended(const std::vector<Vector>& family, const Cube& q) const;
};

/// b^1_Q = b^2_Q = chi_Q.
AccretiveSystem t1_system(const Grid& grid);

/// b_Q = 1 + eps sigma_Q with sigma_Q a seeded balanced +-1 pattern on the
/// cells of Q of positive mass, rescaled on its heavier side so that
/// int_Q sigma_Q dmu = 0. Cubes with fewer than two massive cells get
/// sigma_Q = 0. b^1 and b^2 use independent per-cube seeds.
AccretiveSystem random_bounded_system(const GridMeasure& gm, double eps, std::uint64_t seed);

/// b_Q = 1 + (C - 1) sigma_Q where sigma_Q is +-1 on whole subcubes of Q
/// (at a seeded depth of one to three levels below Q), balanced and
/// rescaled like `random_bounded_system`. Many subcubes have average near
/// 2 - C, which makes the L-infinity stopping time fire. Needs 1 <= C <= 3.
AccretiveSystem block_sign_system(const GridMeasure& gm, double C, std::uint64_t seed);

struct CounterexampleSystem {
  AccretiveSystem system;
  StoppingForest forest;
};

/// The dyadic family on [0,1) with
///   b_{[0,2^-j)} = 2^{(N-j)/2} chi_{[0,2^-N)} + chi_{[2^-N, 2^-j)},  j = 0..N,
/// b_Q = chi_Q elsewhere, and the forest whose stopping cubes are exactly
/// Q_j = [0, 2^-j). b^2 equals b^1.
CounterexampleSystem counterexample_system(int N, const Grid& grid);

struct ValidationFailure {
  std::size_t cube_id = 0;
  int family = 1;
  std::string condition;
  double value = 0.0;
};

struct ValidationReport {
  double size_constant = 0.0;          // worst ess-sup |b|, or worst normalized L2 mass
  double normalization_error = 0.0;   // worst |int_Q b - mu(Q)| / mu(Q)
  std::size_t cubes_checked = 0;
  std::size_t zero_mass_cubes = 0;
  std::vector<ValidationFailure> failures;
  bool pass() const { return failures.empty(); }
};

/// Checks support, size against `system.C` and normalization for every cube
/// of positive mass.
ValidationReport validate(const AccretiveSystem& system, const GridMeasure& gm, double tolerance = kIdentityTolerance);

}  // namespace dytb
