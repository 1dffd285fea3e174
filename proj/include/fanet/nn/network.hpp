#ifndef FANET_NN_NETWORK_HPP
#define FANET_NN_NETWORK_HPP

#include "fanet/nn/layers.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <variant>
#include <vector>

namespace fanet::nn {

using Layer = std::variant<DenseLayer, ConvLayer>;

Eigen::Index input_size(const Layer& layer);
Eigen::Index output_size(const Layer& layer);

/// Feed-forward layer sequence. Every instance carries an identity and a version
/// counter so that activations can be matched against the exact parameters that
/// produced them.
class Network {
 public:
  Network();
  explicit Network(std::vector<Layer> layers);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// Appends a layer; its input size must equal the current output size.
  void add(Layer layer);

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access invalidates outstanding activations.
  Layer& mutable_layer(std::size_t i);

  Eigen::Index input_size() const;
  Eigen::Index output_size() const;
  std::size_t parameter_count() const;
  /// Multiply-accumulate count of one forward pass for one sample.
  double macs() const;

  std::uint64_t id() const { return id_; }
  std::uint64_t version() const { return version_; }

  /// Calls f(weights, bias) for every layer, then bumps the version.
  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto& layer : layers_)
      std::visit([&](auto& l) { f(l.weights, l.bias); }, layer);
    ++version_;
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    for (const auto& layer : layers_)
      std::visit([&](const auto& l) { f(l.weights, l.bias); }, layer);
  }

 private:
  std::vector<Layer> layers_;
  std::uint64_t id_;
  std::uint64_t version_ = 0;
};

/// Outputs of every layer for a column-stacked batch; values[0] is the input.
struct Activations {
  std::vector<Eigen::MatrixXd> values;
  std::uint64_t network_id = 0;
  std::uint64_t network_version = 0;

  const Eigen::MatrixXd& output() const { return values.back(); }
};

struct LayerGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  Eigen::MatrixXd input;  // same shape as the forward input
};

/// Runs the batch (input_size x batch) through the network.
Activations forward(const Network& net, const Eigen::MatrixXd& input);

/// Chain rule from d(loss)/d(output) back to every parameter and the input.
/// Gradients are summed over the batch columns.
Gradients backward(const Network& net, const Activations& acts, const Eigen::MatrixXd& output_grad);

/// Zero-valued gradients shaped like the network parameters.
Gradients zero_gradients(const Network& net);

/// Flattens a plane row-major (index y * width + x), the single-channel layout
/// ConvLayer expects.
Eigen::VectorXd flatten(const Eigen::MatrixXd& plane);

}  // namespace fanet::nn

#endif  // FANET_NN_NETWORK_HPP
