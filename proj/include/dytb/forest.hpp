#pragma once

#include "dytb/lattice.hpp"

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace dytb {

struct ForestParams {
  std::string mode = "injected";
  double delta = 0.5;
  double s = 0.0;
  double tau_measured = std::numeric_limits<double>::quiet_NaN();
};

/// Stopping generations D^0 = {Q0}, D^1, ... of one grid and the ancestor
/// map Q -> Q^a (smallest forest cube containing Q). Cubes are grid ids.
class StoppingForest {
 public:
  using Params = ForestParams;

  StoppingForest() = default;
  /// Builds the ancestor map from explicit generations. generations[0] must
  /// be {top}; each later cube lies strictly inside a cube of the previous
  /// generation, and no cube appears twice.
  StoppingForest(const Grid& grid, std::vector<std::vector<std::size_t>> generations, Params params = {});

  /// Only the top cube.
  static StoppingForest trivial(const Grid& grid);

  const Grid& grid() const { return grid_; }
  const std::vector<std::vector<std::size_t>>& generations() const { return generations_; }
  const Params& params() const { return params_; }
  Params& params() { return params_; }

  std::size_t ancestor(std::size_t id) const { return ancestor_[id]; }
  Cube ancestor(const Cube& q) const { return grid_.cube(ancestor_[grid_.id(q)]); }
  /// Generation index of a forest cube, -1 otherwise.
  int generation(std::size_t id) const { return generation_[id]; }
  bool is_stopping(std::size_t id) const { return generation_[id] >= 0; }
  std::size_t size() const;

 private:
  Grid grid_;
  std::vector<std::vector<std::size_t>> generations_;
  std::vector<std::size_t> ancestor_;
  std::vector<int> generation_;
  Params params_;
};

}  // namespace dytb
