#include "fanet/nn/network.hpp"

#include "fanet/error.hpp"

#include <atomic>

namespace fanet::nn {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

std::uint64_t next_network_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

void dense_forward(const DenseLayer& l, const MatrixXd& in, MatrixXd& out) {
  out.noalias() = l.weights * in;
  out.colwise() += l.bias;
  activate(l.activation, out);
}

void conv_forward(const ConvLayer& l, const MatrixXd& in, MatrixXd& out) {
  const Index positions = l.out_height() * l.out_width();
  out.resize(l.output_size(), in.cols());
  for (Index s = 0; s < in.cols(); ++s) {
    const MatrixXd cols = l.im2col(in.col(s));
    Eigen::Map<MatrixXd> o(out.col(s).data(), positions, l.out_channels);
    o.noalias() = cols * l.weights.transpose();
    o.rowwise() += l.bias.transpose();
  }
  activate(l.activation, out);
}

LayerGradient dense_backward(const DenseLayer& l, const MatrixXd& in, const MatrixXd& out,
                             MatrixXd grad, MatrixXd& input_grad) {
  activation_backward(l.activation, out, grad);
  LayerGradient g;
  g.weights.noalias() = grad * in.transpose();
  g.bias = grad.rowwise().sum();
  input_grad.noalias() = l.weights.transpose() * grad;
  return g;
}

LayerGradient conv_backward(const ConvLayer& l, const MatrixXd& in, const MatrixXd& out,
                            MatrixXd grad, MatrixXd& input_grad) {
  activation_backward(l.activation, out, grad);
  const Index positions = l.out_height() * l.out_width();
  LayerGradient g{MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                  Eigen::VectorXd::Zero(l.out_channels)};
  input_grad = MatrixXd::Zero(in.rows(), in.cols());
  for (Index s = 0; s < in.cols(); ++s) {
    const MatrixXd cols = l.im2col(in.col(s));
    Eigen::Map<const MatrixXd> dz(grad.col(s).data(), positions, l.out_channels);
    g.weights.noalias() += dz.transpose() * cols;
    g.bias += dz.colwise().sum().transpose();
    const MatrixXd dcols = dz * l.weights;
    l.col2im(dcols, input_grad.col(s));
  }
  return g;
}

}  // namespace

Index input_size(const Layer& layer) {
  return std::visit([](const auto& l) { return l.input_size(); }, layer);
}

Index output_size(const Layer& layer) {
  return std::visit([](const auto& l) { return l.output_size(); }, layer);
}

Network::Network() : id_(next_network_id()) {}

Network::Network(std::vector<Layer> layers) : Network() {
  for (auto& l : layers) add(std::move(l));
}

Network::Network(const Network& other)
    : layers_(other.layers_), id_(next_network_id()), version_(0) {}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    layers_ = other.layers_;
    id_ = next_network_id();
    version_ = 0;
  }
  return *this;
}

void Network::add(Layer layer) {
  if (!layers_.empty())
    require(nn::input_size(layer) == output_size(), ErrorKind::InvalidInput,
            "layer input size " + std::to_string(nn::input_size(layer)) +
                " does not match previous output size " + std::to_string(output_size()));
  layers_.push_back(std::move(layer));
  ++version_;
}

Layer& Network::mutable_layer(std::size_t i) {
  ++version_;
  return layers_.at(i);
}

Index Network::input_size() const { return layers_.empty() ? 0 : nn::input_size(layers_.front()); }

Index Network::output_size() const { return layers_.empty() ? 0 : nn::output_size(layers_.back()); }

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter([&](const MatrixXd& w, const Eigen::VectorXd& b) {
    n += static_cast<std::size_t>(w.size() + b.size());
  });
  return n;
}

double Network::macs() const {
  double total = 0.0;
  for (const auto& layer : layers_) total += std::visit([](const auto& l) { return l.macs(); }, layer);
  return total;
}

Activations forward(const Network& net, const MatrixXd& input) {
  require(!net.empty(), ErrorKind::ModelNotReady, "forward through an empty network");
  require(input.rows() == net.input_size(), ErrorKind::InvalidInput,
          "input has " + std::to_string(input.rows()) + " rows, network expects " +
              std::to_string(net.input_size()));
  Activations acts;
  acts.network_id = net.id();
  acts.network_version = net.version();
  acts.values.reserve(net.size() + 1);
  acts.values.push_back(input);
  for (std::size_t i = 0; i < net.size(); ++i) {
    MatrixXd out;
    std::visit(
        [&](const auto& l) {
          if constexpr (std::is_same_v<std::decay_t<decltype(l)>, DenseLayer>)
            dense_forward(l, acts.values.back(), out);
          else
            conv_forward(l, acts.values.back(), out);
        },
        net.layer(i));
    acts.values.push_back(std::move(out));
  }
  return acts;
}

Gradients backward(const Network& net, const Activations& acts, const MatrixXd& output_grad) {
  require(acts.network_id == net.id() && acts.network_version == net.version() &&
              acts.values.size() == net.size() + 1,
          ErrorKind::State, "activations were not produced by this network state");
  require(output_grad.rows() == acts.output().rows() && output_grad.cols() == acts.output().cols(),
          ErrorKind::InvalidInput, "output gradient shape does not match network output");
  Gradients grads;
  grads.layers.resize(net.size());
  MatrixXd grad = output_grad;
  for (std::size_t k = net.size(); k-- > 0;) {
    MatrixXd input_grad;
    grads.layers[k] = std::visit(
        [&](const auto& l) {
          if constexpr (std::is_same_v<std::decay_t<decltype(l)>, DenseLayer>)
            return dense_backward(l, acts.values[k], acts.values[k + 1], std::move(grad), input_grad);
          else
            return conv_backward(l, acts.values[k], acts.values[k + 1], std::move(grad), input_grad);
        },
        net.layer(k));
    grad = std::move(input_grad);
  }
  grads.input = std::move(grad);
  return grads;
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  net.for_each_parameter([&](const MatrixXd& w, const Eigen::VectorXd& b) {
    g.layers.push_back({MatrixXd::Zero(w.rows(), w.cols()), Eigen::VectorXd::Zero(b.size())});
  });
  g.input = MatrixXd::Zero(net.input_size(), 1);
  return g;
}

Eigen::VectorXd flatten(const MatrixXd& plane) {
  Eigen::VectorXd v(plane.size());
  for (Index y = 0; y < plane.rows(); ++y)
    for (Index x = 0; x < plane.cols(); ++x) v(y * plane.cols() + x) = plane(y, x);
  return v;
}

}  // namespace fanet::nn
