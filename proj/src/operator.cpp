#include "dytb/operator.hpp"

#include "dytb/io.hpp"

namespace dytb {

RealKernel custom_matrix_kernel(const std::string& path, const CellSpace& space) {
  auto table = std::make_shared<Matrix>(read_matrix_csv(path));
  const auto n = static_cast<Eigen::Index>(space.size());
  if (table->rows() != n || table->cols() != n) {
    throw Error("custom kernel matrix '" + path + "' is " + std::to_string(table->rows()) + "x" +
                std::to_string(table->cols()) + ", expected " + std::to_string(n) + "x" + std::to_string(n));
  }
  RealKernel k;
  k.name = "custom_matrix:" + path;
  k.dimension = space.dimension();
  k.lam = DominatingFunction::lebesgue(space.dimension());
  k.table = table;
  k.diagonal = (*table)(0, 0);
  const Matrix centers = space.centers();
  k.evaluate = [table, centers](const Point& x, const Point& y) {
    Eigen::Index i = 0, j = 0;
    (centers.colwise() - x).colwise().squaredNorm().minCoeff(&i);
    (centers.colwise() - y).colwise().squaredNorm().minCoeff(&j);
    return (*table)(i, j);
  };
  return k;
}

RealKernel kernel_from_spec(const std::string& spec, const CellSpace& space) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "zero" && arg.empty()) return zero_kernel(space.dimension());
  if (name == "hilbert" && arg.empty()) {
    require(space.dimension() == 1, "the hilbert kernel is one-dimensional");
    return hilbert_kernel();
  }
  if (name == "hilbert_mollified") {
    double rho = space.finest_side();
    if (!arg.empty()) rho = parse_double(arg, "mollification radius");
    return hilbert_mollified_kernel(rho, space.dimension());
  }
  if (name == "custom_matrix" && !arg.empty()) return custom_matrix_kernel(arg, space);
  throw Error("unknown kernel '" + spec + "' (expected zero, hilbert, hilbert_mollified[:rho] or custom_matrix:path)");
}

}  // namespace dytb
