#ifndef FANET_NN_GRAD_CHECK_HPP
#define FANET_NN_GRAD_CHECK_HPP

#include "fanet/nn/network.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fanet::nn {

/// One block of trainable values together with its analytic gradient.
struct ParameterView {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckOptions {
  double epsilon = 1e-4;
  std::size_t max_checks_per_view = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;               // picks coordinates when sampling
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, 1e-12) between analytic gradients and central
/// differences of `loss`. Every perturbed value is restored bit-exactly.
GradCheckResult grad_check(const std::function<double()>& loss, std::span<const ParameterView> views,
                           const GradCheckOptions& opts = {});

/// Loss on the network output; when `output_grad` is non-null it receives
/// d(loss)/d(output).
using OutputLoss = std::function<double(const Eigen::MatrixXd& output, Eigen::MatrixXd* output_grad)>;

/// Checks backward() of `net` under `loss_fn` on `batch` (input_size x n).
GradCheckResult grad_check(Network& net, const OutputLoss& loss_fn, const Eigen::MatrixXd& batch,
                           double epsilon, const GradCheckOptions& opts = {});

/// Views over the parameters of `net` paired with `grads`.
std::vector<ParameterView> parameter_views(Network& net, const Gradients& grads,
                                           const std::string& prefix = "");

}  // namespace fanet::nn

#endif  // FANET_NN_GRAD_CHECK_HPP
