#ifndef FANET_STANDARDIZER_HPP
#define FANET_STANDARDIZER_HPP

#include "fanet/nn/checkpoint.hpp"

#include <Eigen/Dense>

#include <string>

namespace fanet {

/// Per-feature affine map to zero mean and unit variance, fitted on training
/// columns. Constant features keep unit scale.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_scale;

  static Standardizer fit(const Eigen::MatrixXd& columns);
  static Standardizer identity(Eigen::Index dim);

  Eigen::Index dim() const { return mean.size(); }

  template <typename Derived>
  Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& x) const {
    return ((x.derived().colwise() - mean).array().colwise() * inv_scale.array()).matrix();
  }

  void store(nn::Checkpoint& ck, const std::string& prefix) const;
  static Standardizer load(const nn::Checkpoint& ck, const std::string& prefix);
};

}  // namespace fanet

#endif  // FANET_STANDARDIZER_HPP
