#ifndef FANET_NN_SGD_HPP
#define FANET_NN_SGD_HPP

#include "fanet/error.hpp"
#include "fanet/nn/network.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fanet::nn {

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double decay_factor = 5.0;  // lr is divided by this every `decay_every` epochs
  int decay_every = 10;

  void validate() const;
};

/// lr0 / decay_factor^floor(epoch / decay_every), epochs counted from 0.
double learning_rate_at(const SgdConfig& cfg, int epoch);

/// Classical momentum with L2 decay folded into the gradient:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
/// Throws ErrorKind::Numerical before touching anything if grad is not finite.
template <typename Param, typename Grad, typename Velocity>
void sgd_step(Eigen::DenseBase<Param>& param, const Eigen::DenseBase<Grad>& grad,
              Eigen::DenseBase<Velocity>& velocity, const SgdConfig& cfg, double lr) {
  require(grad.allFinite(), ErrorKind::Numerical, "training diverged: non-finite gradient");
  velocity.derived().array() = cfg.momentum * velocity.derived().array() + grad.derived().array() +
                               cfg.weight_decay * param.derived().array();
  param.derived().array() -= lr * velocity.derived().array();
}

/// Optimizer state for every parameter of one network.
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const SgdConfig& config() const { return cfg_; }

  /// One update of all network parameters with the learning rate for `epoch`.
  /// Gradients are checked for finiteness before any parameter changes.
  void step(Network& net, const Gradients& grads, int epoch);

 private:
  SgdConfig cfg_;
  std::vector<LayerGradient> velocity_;
};

}  // namespace fanet::nn

#endif  // FANET_NN_SGD_HPP
