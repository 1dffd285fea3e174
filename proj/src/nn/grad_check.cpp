#include "fanet/nn/grad_check.hpp"

#include "fanet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fanet::nn {

GradCheckResult grad_check(const std::function<double()>& loss, std::span<const ParameterView> views,
                           const GradCheckOptions& opts) {
  require(opts.epsilon >= 1e-6 && opts.epsilon <= 1e-3, ErrorKind::InvalidInput,
          "grad_check epsilon must lie in [1e-6, 1e-3]");
  GradCheckResult result;
  std::mt19937_64 rng(opts.seed);
  for (const auto& view : views) {
    require(view.values.size() == view.analytic.size(), ErrorKind::InvalidInput,
            "parameter view '" + view.name + "' has mismatched gradient size");
    std::vector<std::size_t> indices(view.values.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (opts.max_checks_per_view > 0 && indices.size() > opts.max_checks_per_view) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(opts.max_checks_per_view);
    }
    for (std::size_t i : indices) {
      const double original = view.values[i];
      view.values[i] = original + opts.epsilon;
      const double up = loss();
      view.values[i] = original - opts.epsilon;
      const double down = loss();
      view.values[i] = original;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double analytic = view.analytic[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (result.checked == 1 || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = view.name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

std::vector<ParameterView> parameter_views(Network& net, const Gradients& grads,
                                           const std::string& prefix) {
  require(grads.layers.size() == net.size(), ErrorKind::InvalidInput,
          "gradients do not match network");
  std::vector<ParameterView> views;
  std::size_t k = 0;
  net.for_each_parameter([&](Eigen::MatrixXd& w, Eigen::VectorXd& b) {
    const auto& g = grads.layers[k];
    views.push_back({prefix + "layer" + std::to_string(k) + ".weights",
                     std::span<double>(w.data(), static_cast<std::size_t>(w.size())),
                     std::span<const double>(g.weights.data(), static_cast<std::size_t>(g.weights.size()))});
    views.push_back({prefix + "layer" + std::to_string(k) + ".bias",
                     std::span<double>(b.data(), static_cast<std::size_t>(b.size())),
                     std::span<const double>(g.bias.data(), static_cast<std::size_t>(g.bias.size()))});
    ++k;
  });
  return views;
}

GradCheckResult grad_check(Network& net, const OutputLoss& loss_fn, const Eigen::MatrixXd& batch,
                           double epsilon, const GradCheckOptions& opts) {
  const Activations acts = forward(net, batch);
  Eigen::MatrixXd output_grad;
  loss_fn(acts.output(), &output_grad);
  const Gradients grads = backward(net, acts, output_grad);
  const auto views = parameter_views(net, grads);
  GradCheckOptions o = opts;
  o.epsilon = epsilon;
  return grad_check([&] { return loss_fn(forward(net, batch).output(), nullptr); }, views, o);
}

}  // namespace fanet::nn
