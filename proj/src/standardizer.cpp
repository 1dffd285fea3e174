#include "fanet/standardizer.hpp"

#include "fanet/error.hpp"

#include <cmath>

namespace fanet {

Standardizer Standardizer::fit(const Eigen::MatrixXd& columns) {
  require(columns.cols() > 0, ErrorKind::InvalidInput, "standardizer needs at least one sample");
  require(columns.allFinite(), ErrorKind::InvalidInput, "standardizer got non-finite features");
  Standardizer s;
  s.mean = columns.rowwise().mean();
  const Eigen::VectorXd var = (columns.colwise() - s.mean).array().square().rowwise().mean();
  s.inv_scale = var.unaryExpr([](double v) { return v > 1e-24 ? 1.0 / std::sqrt(v) : 1.0; });
  return s;
}

Standardizer Standardizer::identity(Eigen::Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

void Standardizer::store(nn::Checkpoint& ck, const std::string& prefix) const {
  ck.blocks.emplace_back(prefix + ".mean", mean);
  ck.blocks.emplace_back(prefix + ".inv_scale", inv_scale);
}

Standardizer Standardizer::load(const nn::Checkpoint& ck, const std::string& prefix) {
  Standardizer s{ck.block(prefix + ".mean"), ck.block(prefix + ".inv_scale")};
  require(s.mean.size() == s.inv_scale.size(), ErrorKind::Format, "standardizer blocks differ in size");
  return s;
}

}  // namespace fanet
