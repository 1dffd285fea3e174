#include "fanet/nn/layers.hpp"

#include "fanet/error.hpp"

#include <cmath>

namespace fanet::nn {

using Eigen::Index;

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  fail(ErrorKind::Format, "unknown activation '" + name + "'");
}

void activate(Activation act, Eigen::Ref<Eigen::MatrixXd> z) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Sigmoid:
      z = z.unaryExpr([](double v) {
        // split branches keep exp() from overflowing
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
      break;
  }
}

void activation_backward(Activation act, const Eigen::MatrixXd& output,
                         Eigen::Ref<Eigen::MatrixXd> grad) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Relu: grad = (output.array() > 0.0).select(grad, 0.0); break;
    case Activation::Sigmoid:
      grad = (grad.array() * output.array() * (1.0 - output.array())).matrix();
      break;
  }
}

DenseLayer::DenseLayer(Index in, Index out, Activation act)
    : weights(Eigen::MatrixXd::Zero(out, in)), bias(Eigen::VectorXd::Zero(out)), activation(act) {
  require(in > 0 && out > 0, ErrorKind::InvalidInput, "dense layer needs positive dimensions");
}

ConvLayer::ConvLayer(Index in_ch, Index in_h, Index in_w, Index out_ch, Index kernel_size,
                     Index stride_, Index padding_, Activation act)
    : in_channels(in_ch), in_height(in_h), in_width(in_w), out_channels(out_ch),
      kernel(kernel_size), stride(stride_), padding(padding_),
      weights(Eigen::MatrixXd::Zero(out_ch, in_ch * kernel_size * kernel_size)),
      bias(Eigen::VectorXd::Zero(out_ch)), activation(act) {
  require(in_ch > 0 && in_h > 0 && in_w > 0 && out_ch > 0 && kernel_size > 0 && stride_ > 0 &&
              padding_ >= 0,
          ErrorKind::InvalidInput, "conv layer needs positive geometry");
  require(out_height() > 0 && out_width() > 0, ErrorKind::InvalidInput,
          "conv kernel larger than padded input");
}

Eigen::MatrixXd ConvLayer::im2col(const Eigen::Ref<const Eigen::VectorXd>& input) const {
  const Index oh = out_height(), ow = out_width();
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(oh * ow, in_channels * kernel * kernel);
  for (Index c = 0; c < in_channels; ++c) {
    const double* plane = input.data() + c * in_height * in_width;
    for (Index ky = 0; ky < kernel; ++ky) {
      for (Index kx = 0; kx < kernel; ++kx) {
        double* col = cols.col((c * kernel + ky) * kernel + kx).data();
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride + ky - padding;
          if (iy < 0 || iy >= in_height) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride + kx - padding;
            if (ix < 0 || ix >= in_width) continue;
            col[oy * ow + ox] = plane[iy * in_width + ix];
          }
        }
      }
    }
  }
  return cols;
}

void ConvLayer::col2im(const Eigen::MatrixXd& cols, Eigen::Ref<Eigen::VectorXd> input_grad) const {
  const Index oh = out_height(), ow = out_width();
  for (Index c = 0; c < in_channels; ++c) {
    double* plane = input_grad.data() + c * in_height * in_width;
    for (Index ky = 0; ky < kernel; ++ky) {
      for (Index kx = 0; kx < kernel; ++kx) {
        const double* col = cols.col((c * kernel + ky) * kernel + kx).data();
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride + ky - padding;
          if (iy < 0 || iy >= in_height) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride + kx - padding;
            if (ix < 0 || ix >= in_width) continue;
            plane[iy * in_width + ix] += col[oy * ow + ox];
          }
        }
      }
    }
  }
}

namespace {

void fill_uniform(Eigen::MatrixXd& m, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

double init_limit(Activation act, double fan_in, double fan_out) {
  if (act == Activation::Relu) return std::sqrt(6.0 / fan_in);
  return std::sqrt(6.0 / (fan_in + fan_out));
}

}  // namespace

void initialize(DenseLayer& layer, std::mt19937_64& rng) {
  const double limit = init_limit(layer.activation, static_cast<double>(layer.input_size()),
                                  static_cast<double>(layer.output_size()));
  fill_uniform(layer.weights, limit, rng);
  layer.bias.setZero();
}

void initialize(ConvLayer& layer, std::mt19937_64& rng) {
  const double area = static_cast<double>(layer.kernel * layer.kernel);
  const double limit = init_limit(layer.activation, area * static_cast<double>(layer.in_channels),
                                  area * static_cast<double>(layer.out_channels));
  fill_uniform(layer.weights, limit, rng);
  layer.bias.setZero();
}

}  // namespace fanet::nn
