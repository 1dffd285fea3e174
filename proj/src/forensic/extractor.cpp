#include "fanet/forensic/extractor.hpp"

#include "fanet/error.hpp"
#include "fanet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace fanet::forensic {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr const char* kKind = "forensic-extractor";

nn::Network build_trunk(const ExtractorConfig& cfg) {
  nn::Network net;
  Index ch = 1, side = cfg.input_size;
  for (Index out : cfg.channels) {
    nn::ConvLayer conv(ch, side, side, out, 3, 2, 1, nn::Activation::Relu);
    side = conv.out_height();
    ch = out;
    net.add(std::move(conv));
  }
  net.add(nn::DenseLayer(ch * side * side, cfg.hidden, nn::Activation::Relu));
  net.add(nn::DenseLayer(cfg.hidden, kForensicDim, nn::Activation::Relu));
  return net;
}

nn::Network build_head() {
  nn::Network net;
  net.add(nn::DenseLayer(kForensicDim, 2, nn::Activation::Identity));
  return net;
}

void randomize(nn::Network& net, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < net.size(); ++i)
    std::visit([&](auto& l) { nn::initialize(l, rng); }, net.mutable_layer(i));
}

MatrixXd softmax_columns(const MatrixXd& logits) {
  MatrixXd p = logits;
  for (Index s = 0; s < p.cols(); ++s) {
    p.col(s).array() -= p.col(s).maxCoeff();
    p.col(s) = p.col(s).array().exp().matrix();
    p.col(s) /= p.col(s).sum();
  }
  return p;
}

void require_ready(const ForensicExtractor& model) {
  require(model.ready(), ErrorKind::ModelNotReady, "forensic extractor is not trained or loaded");
}

MatrixXd batch_inputs(const ForensicExtractor& model, const std::vector<LabeledImage>& corpus,
                      const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                      std::vector<int>& labels) {
  MatrixXd x(model.trunk().input_size(), static_cast<Index>(end - begin));
  labels.clear();
  for (std::size_t i = begin; i < end; ++i) {
    x.col(static_cast<Index>(i - begin)) = model_input(model, corpus[order[i]].image.pixels());
    labels.push_back(corpus[order[i]].label);
  }
  return x;
}

}  // namespace

void ExtractorConfig::validate() const {
  require(input_size >= 8, ErrorKind::InvalidInput, "extractor input size must be at least 8");
  for (Index c : channels) require(c > 0, ErrorKind::InvalidInput, "channel counts must be positive");
  require(hidden > 0, ErrorKind::InvalidInput, "hidden width must be positive");
}

ForensicExtractor::ForensicExtractor(const ExtractorConfig& cfg, nn::Network trunk, nn::Network head)
    : cfg_(cfg), trunk_(std::move(trunk)), head_(std::move(head)) {}

ForensicExtractor ForensicExtractor::zeros(const ExtractorConfig& cfg) {
  cfg.validate();
  nn::Network trunk = build_trunk(cfg), head = build_head();
  const auto clear = [](MatrixXd& w, VectorXd& b) {
    w.setZero();
    b.setZero();
  };
  trunk.for_each_parameter(clear);
  head.for_each_parameter(clear);
  return {cfg, std::move(trunk), std::move(head)};
}

ForensicExtractor ForensicExtractor::random(const ExtractorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  nn::Network trunk = build_trunk(cfg), head = build_head();
  randomize(trunk, rng);
  randomize(head, rng);
  return {cfg, std::move(trunk), std::move(head)};
}

nn::Checkpoint ForensicExtractor::to_checkpoint() const {
  require_ready(*this);
  nn::Checkpoint ck;
  ck.kind = kKind;
  ck.meta.emplace_back("input_size", std::to_string(cfg_.input_size));
  ck.networks.emplace_back("trunk", trunk_);
  ck.networks.emplace_back("head", head_);
  return ck;
}

ForensicExtractor ForensicExtractor::from_checkpoint(const nn::Checkpoint& ckpt) {
  require(ckpt.kind == kKind, ErrorKind::Format,
          "checkpoint holds '" + ckpt.kind + "', expected " + kKind);
  const nn::Network& trunk = ckpt.network("trunk");
  const nn::Network& head = ckpt.network("head");
  require(trunk.size() == 7, ErrorKind::Format, "extractor trunk must have 7 layers");
  ExtractorConfig cfg;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto* conv = std::get_if<nn::ConvLayer>(&trunk.layer(i));
    require(conv != nullptr, ErrorKind::Format, "extractor trunk layer " + std::to_string(i) + " is not a convolution");
    if (i == 0) cfg.input_size = conv->in_height;
    cfg.channels[i] = conv->out_channels;
  }
  const auto* hidden = std::get_if<nn::DenseLayer>(&trunk.layer(5));
  require(hidden != nullptr, ErrorKind::Format, "extractor trunk layer 5 is not dense");
  cfg.hidden = hidden->output_size();
  cfg.validate();
  // the stored layers must match what the config would build
  const nn::Network expect = build_trunk(cfg);
  for (std::size_t i = 0; i < expect.size(); ++i)
    require(nn::input_size(expect.layer(i)) == nn::input_size(trunk.layer(i)) &&
                nn::output_size(expect.layer(i)) == nn::output_size(trunk.layer(i)),
            ErrorKind::Format, "extractor trunk layer " + std::to_string(i) + " has unexpected shape");
  require(head.input_size() == kForensicDim && head.output_size() == 2, ErrorKind::Format,
          "extractor head must map 128 features to 2 logits");
  return {cfg, trunk, head};
}

VectorXd model_input(const ForensicExtractor& model, const Plane& img) {
  require_ready(model);
  const Index n = model.config().input_size;
  const Plane resized = (img.rows() == n && img.cols() == n) ? img : resize_bilinear(img, n, n);
  return nn::flatten(resized).array() - 0.5;
}

VectorXd extract(const ForensicExtractor& model, const GrayImage& img) {
  const nn::Activations acts = nn::forward(model.trunk(), model_input(model, img.pixels()));
  return acts.output().col(0);
}

VectorXd extract(const ForensicExtractor& model, const Plane& r, const Plane& g, const Plane& b) {
  return extract(model, GrayImage(luma(r, g, b)));
}

MatrixXd extract_batch(const ForensicExtractor& model, const std::vector<GrayImage>& imgs, unsigned jobs) {
  require_ready(model);
  MatrixXd out(kForensicDim, static_cast<Index>(imgs.size()));
  parallel_for(imgs.size(), jobs, [&](std::size_t i) { out.col(static_cast<Index>(i)) = extract(model, imgs[i]); });
  return out;
}

Eigen::Vector2d class_probabilities(const ForensicExtractor& model,
                                    const Eigen::Ref<const VectorXd>& features) {
  require_ready(model);
  require(features.size() == kForensicDim, ErrorKind::InvalidInput,
          "forensic features must have 128 values, got " + std::to_string(features.size()));
  const MatrixXd logits = nn::forward(model.head(), MatrixXd(features)).output();
  return softmax_columns(logits).col(0);
}

double classifier_loss(const ForensicExtractor& model, const MatrixXd& inputs, const std::vector<int>& labels,
                       nn::Gradients* trunk_grad, nn::Gradients* head_grad) {
  require_ready(model);
  require(static_cast<Index>(labels.size()) == inputs.cols() && inputs.cols() > 0, ErrorKind::InvalidInput,
          "one label per input column required");
  const nn::Activations body = nn::forward(model.trunk(), inputs);
  const nn::Activations top = nn::forward(model.head(), body.output());
  const MatrixXd p = softmax_columns(top.output());
  const double n = static_cast<double>(inputs.cols());
  double loss = 0;
  MatrixXd grad = p / n;
  for (Index s = 0; s < inputs.cols(); ++s) {
    const int y = labels[static_cast<std::size_t>(s)];
    require(y == 0 || y == 1, ErrorKind::InvalidInput, "labels must be 0 or 1");
    loss -= std::log(std::max(p(y, s), 1e-300));
    grad(y, s) -= 1.0 / n;
  }
  if (trunk_grad != nullptr || head_grad != nullptr) {
    nn::Gradients hg = nn::backward(model.head(), top, grad);
    if (trunk_grad != nullptr) *trunk_grad = nn::backward(model.trunk(), body, hg.input);
    if (head_grad != nullptr) *head_grad = std::move(hg);
  }
  return loss / n;
}

ExtractorTrainResult train_extractor(const std::vector<LabeledImage>& corpus, const ExtractorTrainConfig& cfg) {
  cfg.sgd.validate();
  require(cfg.epochs >= 0 && cfg.batch_size > 0, ErrorKind::InvalidInput, "epochs and batch size must be positive");
  const auto genuine = std::count_if(corpus.begin(), corpus.end(), [](const LabeledImage& s) { return s.label == 1; });
  const auto spoof = std::count_if(corpus.begin(), corpus.end(), [](const LabeledImage& s) { return s.label == 0; });
  require(genuine + spoof == static_cast<std::ptrdiff_t>(corpus.size()), ErrorKind::InvalidInput,
          "labels must be 0 (spoof) or 1 (genuine)");
  require(genuine > 0 && spoof > 0, ErrorKind::InvalidInput,
          "rejected corpus: training needs both genuine and spoof images");

  ExtractorTrainResult result;
  result.model = ForensicExtractor::random(cfg.arch, cfg.seed);
  ForensicExtractor& model = result.model;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<int> labels;

  const auto corpus_loss = [&](double* accuracy) {
    std::vector<std::size_t> all(corpus.size());
    std::iota(all.begin(), all.end(), 0);
    double total = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < all.size(); b += bs) {
      const std::size_t e = std::min(all.size(), b + bs);
      const MatrixXd x = batch_inputs(model, corpus, all, b, e, labels);
      total += classifier_loss(model, x, labels) * static_cast<double>(e - b);
      if (accuracy != nullptr) {
        const MatrixXd feats = nn::forward(model.trunk(), x).output();
        const MatrixXd logits = nn::forward(model.head(), feats).output();
        for (Index s = 0; s < logits.cols(); ++s)
          correct += static_cast<std::size_t>((logits(1, s) > logits(0, s) ? 1 : 0) == labels[static_cast<std::size_t>(s)]);
      }
    }
    if (accuracy != nullptr) *accuracy = static_cast<double>(correct) / static_cast<double>(corpus.size());
    return total / static_cast<double>(corpus.size());
  };

  result.initial_loss = corpus_loss(nullptr);
  nn::Sgd trunk_opt(cfg.sgd), head_opt(cfg.sgd);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      const std::size_t e = std::min(order.size(), b + bs);
      const MatrixXd x = batch_inputs(model, corpus, order, b, e, labels);
      nn::Gradients tg, hg;
      total += classifier_loss(model, x, labels, &tg, &hg) * static_cast<double>(e - b);
      trunk_opt.step(model.trunk(), tg, epoch);
      head_opt.step(model.head(), hg, epoch);
    }
    result.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  corpus_loss(&result.train_accuracy);
  return result;
}

}  // namespace fanet::forensic
