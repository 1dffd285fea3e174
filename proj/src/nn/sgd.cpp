#include "fanet/nn/sgd.hpp"

#include <cmath>

namespace fanet::nn {

void SgdConfig::validate() const {
  require(std::isfinite(learning_rate) && learning_rate > 0, ErrorKind::InvalidInput,
          "learning rate must be positive");
  require(std::isfinite(momentum) && momentum >= 0 && momentum < 1, ErrorKind::InvalidInput,
          "momentum must lie in [0, 1)");
  require(std::isfinite(weight_decay) && weight_decay >= 0, ErrorKind::InvalidInput,
          "weight decay must be nonnegative");
  require(std::isfinite(decay_factor) && decay_factor > 0, ErrorKind::InvalidInput,
          "decay factor must be positive");
  require(decay_every > 0, ErrorKind::InvalidInput, "decay period must be positive");
}

double learning_rate_at(const SgdConfig& cfg, int epoch) {
  return cfg.learning_rate / std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

void Sgd::step(Network& net, const Gradients& grads, int epoch) {
  require(grads.layers.size() == net.size(), ErrorKind::InvalidInput,
          "gradient layer count does not match network");
  for (const auto& g : grads.layers)
    require(g.weights.allFinite() && g.bias.allFinite(), ErrorKind::Numerical,
            "training diverged: non-finite gradient");
  if (velocity_.size() != net.size()) {
    velocity_.clear();
    net.for_each_parameter([&](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
      velocity_.push_back({Eigen::MatrixXd::Zero(w.rows(), w.cols()), Eigen::VectorXd::Zero(b.size())});
    });
  }
  const double lr = learning_rate_at(cfg_, epoch);
  std::size_t k = 0;
  net.for_each_parameter([&](Eigen::MatrixXd& w, Eigen::VectorXd& b) {
    require(grads.layers[k].weights.rows() == w.rows() && grads.layers[k].weights.cols() == w.cols() &&
                grads.layers[k].bias.size() == b.size(),
            ErrorKind::InvalidInput, "gradient shape does not match parameter shape");
    sgd_step(w, grads.layers[k].weights, velocity_[k].weights, cfg_, lr);
    sgd_step(b, grads.layers[k].bias, velocity_[k].bias, cfg_, lr);
    ++k;
  });
}

}  // namespace fanet::nn
