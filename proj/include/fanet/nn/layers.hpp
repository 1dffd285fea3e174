#ifndef FANET_NN_LAYERS_HPP
#define FANET_NN_LAYERS_HPP

#include <Eigen/Dense>

#include <random>
#include <string>

namespace fanet::nn {

enum class Activation { Identity, Relu, Sigmoid };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// Applies the activation in place.
void activate(Activation act, Eigen::Ref<Eigen::MatrixXd> z);

/// Multiplies `grad` in place by the activation derivative, expressed through the
/// activation output.
void activation_backward(Activation act, const Eigen::MatrixXd& output,
                         Eigen::Ref<Eigen::MatrixXd> grad);

/// Fully connected layer y = act(W x + b). Batches are column-stacked.
struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Identity;

  DenseLayer() = default;
  DenseLayer(Eigen::Index in, Eigen::Index out, Activation act);

  Eigen::Index input_size() const { return weights.cols(); }
  Eigen::Index output_size() const { return weights.rows(); }
  double macs() const { return static_cast<double>(weights.size()); }
};

/// Square-kernel 2-D convolution. Activations are flattened channel-major, then
/// row-major within a channel: index = (c * height + y) * width + x.
struct ConvLayer {
  Eigen::Index in_channels = 0, in_height = 0, in_width = 0;
  Eigen::Index out_channels = 0, kernel = 0, stride = 1, padding = 0;
  Eigen::MatrixXd weights;  // out_channels x (in_channels * kernel * kernel)
  Eigen::VectorXd bias;     // out_channels
  Activation activation = Activation::Identity;

  ConvLayer() = default;
  ConvLayer(Eigen::Index in_ch, Eigen::Index in_h, Eigen::Index in_w, Eigen::Index out_ch,
            Eigen::Index kernel_size, Eigen::Index stride, Eigen::Index padding, Activation act);

  Eigen::Index out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
  Eigen::Index out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
  Eigen::Index input_size() const { return in_channels * in_height * in_width; }
  Eigen::Index output_size() const { return out_channels * out_height() * out_width(); }
  double macs() const {
    return static_cast<double>(out_height() * out_width()) * static_cast<double>(weights.size());
  }

  /// Patch matrix of one sample: (out_h * out_w) x (in_ch * k * k), zero padded.
  Eigen::MatrixXd im2col(const Eigen::Ref<const Eigen::VectorXd>& input) const;
  /// Scatter-adds a patch-matrix gradient back onto an input gradient.
  void col2im(const Eigen::MatrixXd& cols, Eigen::Ref<Eigen::VectorXd> input_grad) const;
};

/// He-uniform for relu layers, Xavier-uniform otherwise; biases start at zero.
void initialize(DenseLayer& layer, std::mt19937_64& rng);
void initialize(ConvLayer& layer, std::mt19937_64& rng);

}  // namespace fanet::nn

#endif  // FANET_NN_LAYERS_HPP
