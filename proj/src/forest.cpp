#include "dytb/forest.hpp"

#include <sstream>

namespace dytb {

StoppingForest::StoppingForest(const Grid& grid, std::vector<std::vector<std::size_t>> generations, Params params)
    : grid_(grid), generations_(std::move(generations)), params_(std::move(params)) {
  require(!generations_.empty() && generations_[0].size() == 1 && generations_[0][0] == grid_.id(grid_.top()),
          "the first stopping generation must be the top cube alone");
  const std::size_t count = grid_.cube_count();
  generation_.assign(count, -1);
  for (std::size_t j = 0; j < generations_.size(); ++j) {
    for (std::size_t id : generations_[j]) {
      require(id < count, "stopping cube id out of range");
      require(generation_[id] < 0, "a cube appears twice in the stopping forest");
      generation_[id] = static_cast<int>(j);
    }
  }
  ancestor_.assign(count, 0);
  for (std::size_t id = 1; id < count; ++id) {
    const std::size_t parent = grid_.id(grid_.parent(grid_.cube(id)));
    ancestor_[id] = generation_[id] >= 0 ? id : ancestor_[parent];
  }
  for (std::size_t j = 1; j < generations_.size(); ++j) {
    for (std::size_t id : generations_[j]) {
      const std::size_t above = ancestor_[grid_.id(grid_.parent(grid_.cube(id)))];
      if (generation_[above] != static_cast<int>(j) - 1) {
        std::ostringstream msg;
        msg << "stopping cube " << id << " of generation " << j << " is not directly below generation " << j - 1;
        throw Error(msg.str());
      }
    }
  }
}

StoppingForest StoppingForest::trivial(const Grid& grid) {
  return StoppingForest(grid, {{grid.id(grid.top())}});
}

std::size_t StoppingForest::size() const {
  std::size_t n = 0;
  for (const auto& g : generations_) n += g.size();
  return n;
}

}  // namespace dytb
