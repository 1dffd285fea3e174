#ifndef FANET_FORENSIC_EXTRACTOR_HPP
#define FANET_FORENSIC_EXTRACTOR_HPP

#include "fanet/image.hpp"
#include "fanet/nn/checkpoint.hpp"
#include "fanet/nn/network.hpp"
#include "fanet/nn/sgd.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace fanet::forensic {

inline constexpr Eigen::Index kForensicDim = 128;

/// Five 3x3 stride-2 relu convolutions, a relu dense layer of `hidden` units and
/// the 128-unit relu feature layer; a 2-way linear classifier sits on top.
struct ExtractorConfig {
  Eigen::Index input_size = 128;
  std::array<Eigen::Index, 5> channels = {16, 32, 64, 64, 64};
  Eigen::Index hidden = 4096;

  void validate() const;
};

class ForensicExtractor {
 public:
  /// Not ready; extract() throws until a model is built or loaded.
  ForensicExtractor() = default;

  /// All weights and biases zero.
  static ForensicExtractor zeros(const ExtractorConfig& cfg);
  /// Seeded He/Xavier initialization.
  static ForensicExtractor random(const ExtractorConfig& cfg, std::uint64_t seed);

  bool ready() const { return !trunk_.empty(); }
  const ExtractorConfig& config() const { return cfg_; }

  /// Layers up to and including the 128-unit feature layer.
  const nn::Network& trunk() const { return trunk_; }
  nn::Network& trunk() { return trunk_; }
  /// 128 -> 2 logits; index 1 is the genuine class.
  const nn::Network& head() const { return head_; }
  nn::Network& head() { return head_; }

  nn::Checkpoint to_checkpoint() const;
  static ForensicExtractor from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  ForensicExtractor(const ExtractorConfig& cfg, nn::Network trunk, nn::Network head);

  ExtractorConfig cfg_;
  nn::Network trunk_;
  nn::Network head_;
};

/// Resizes to the model input, shifts pixels to [-0.5, 0.5] and flattens.
Eigen::VectorXd model_input(const ForensicExtractor& model, const Plane& img);

/// 128-dim feature layer output.
Eigen::VectorXd extract(const ForensicExtractor& model, const GrayImage& img);
Eigen::VectorXd extract(const ForensicExtractor& model, const Plane& r, const Plane& g, const Plane& b);
/// One column per image, extracted on up to `jobs` threads.
Eigen::MatrixXd extract_batch(const ForensicExtractor& model, const std::vector<GrayImage>& imgs,
                              unsigned jobs = 1);

/// Softmax over the 2-way head: (spoof, genuine).
Eigen::Vector2d class_probabilities(const ForensicExtractor& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& features);

struct LabeledImage {
  GrayImage image;
  int label;  // 1 genuine, 0 spoof/recaptured
};

struct ExtractorTrainConfig {
  ExtractorConfig arch;
  nn::SgdConfig sgd;
  int epochs = 20;
  Eigen::Index batch_size = 32;
  std::uint64_t seed = 1;
};

struct ExtractorTrainResult {
  ForensicExtractor model;
  double initial_loss = 0;          // mean cross-entropy before the first step
  std::vector<double> epoch_loss;   // mean cross-entropy over each epoch's batches
  double train_accuracy = 0;        // after the last epoch
};

/// Softmax cross-entropy over both classes with seeded shuffling. The corpus must
/// hold both labels.
ExtractorTrainResult train_extractor(const std::vector<LabeledImage>& corpus,
                                     const ExtractorTrainConfig& cfg);

/// Mean cross-entropy of the full model and, optionally, its gradients (trunk
/// layers first, then the head) for a column-stacked input batch.
double classifier_loss(const ForensicExtractor& model, const Eigen::MatrixXd& inputs,
                       const std::vector<int>& labels, nn::Gradients* trunk_grad = nullptr,
                       nn::Gradients* head_grad = nullptr);

}  // namespace fanet::forensic

#endif  // FANET_FORENSIC_EXTRACTOR_HPP
