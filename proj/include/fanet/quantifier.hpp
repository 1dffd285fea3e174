#ifndef FANET_QUANTIFIER_HPP
#define FANET_QUANTIFIER_HPP

#include "fanet/nn/checkpoint.hpp"
#include "fanet/nn/network.hpp"
#include "fanet/nn/sgd.hpp"
#include "fanet/standardizer.hpp"
#include "fanet/supervision.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fanet::quant {

inline constexpr Eigen::Index kQualityInput = 94;
inline constexpr Eigen::Index kForensicInput = 128;
inline constexpr Eigen::Index kInputDim = kQualityInput + kForensicInput;
static_assert(kInputDim == 222);

enum class Label { HighPositive = 0, HighNegative = 1, Low = 2 };

std::string to_string(Label label);

enum class Ablation { Full, NoLowClass, RandomCenters, QualityOnly };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& name);

using Point = Eigen::Vector2d;
using CenterMatrix = Eigen::Matrix<double, 2, 3>;  // columns e1, e2, e3

/// exp(-||lambda .* (y_hat - center)||^2 / (2 sigma^2))
template <typename Y, typename C, typename L>
double rbf_kernel(const Eigen::MatrixBase<Y>& y_hat, const Eigen::MatrixBase<C>& center,
                  const Eigen::MatrixBase<L>& lambda, double sigma) {
  const double d2 = (lambda.derived().array() * (y_hat.derived() - center.derived()).array()).matrix().squaredNorm();
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

/// Three class centers in (quality, forensic) space with per-center kernel
/// weights and the running sums of the moving-average center update.
struct CenterSet {
  CenterMatrix centers;
  CenterMatrix lambda = CenterMatrix::Ones();
  double sigma = 0.1;
  CenterMatrix sums;        // m_c
  Eigen::Vector3d weights;  // N_c accumulator

  /// e1 = (1, 1), e2 = (1, 0), e3 = (0, 0.5); sums = centers, weights = 1.
  static CenterSet initial(double sigma = 0.1);
  /// Centers drawn from a seeded standard normal.
  static CenterSet random(std::uint64_t seed, double sigma = 0.1);

  Point center(Label c) const { return centers.col(static_cast<int>(c)); }
};

/// Euclidean distance from y to each center.
Eigen::Vector3d distances(const Point& y, const CenterSet& centers);

/// The ceil(low_fraction * n) pairs nearest to e3 are Low (ties by index); every
/// other pair goes to the nearer of e1 (HighPositive) and e2 (HighNegative),
/// e1 on ties. With `use_low` false no pair is Low.
std::vector<Label> assign_labels(const std::vector<supervision::ScorePair>& pairs, const CenterSet& centers,
                                 double low_fraction = 0.3, bool use_low = true);

inline constexpr double kKernelClamp = 1e-12;

struct LossTerms {
  double loss = 0;
  Eigen::Vector3d kernels = Eigen::Vector3d::Zero();
  Point grad_y = Point::Zero();
  CenterMatrix grad_lambda = CenterMatrix::Zero();
};

/// Sum over centers of binary cross-entropy between the one-hot label and the
/// kernel value, kernels clamped to [1e-12, 1 - 1e-12]. Clamped terms carry no
/// gradient. With `use_low` false only e1 and e2 take part.
LossTerms fanet_loss(const Point& y_hat, Label label, const CenterSet& centers, bool use_low = true);

/// Moving-average update for every class present in the batch (columns of
/// y_hat): m_c <- eta m_c + (1 - eta) sum y, N_c <- eta N_c + (1 - eta) n_c,
/// e_c <- m_c / N_c. Classes without members are left alone.
void update_centers(CenterSet& centers, const Eigen::Matrix2Xd& y_hat, const std::vector<Label>& labels,
                    double eta = 0.9);

struct FanetConfig {
  Ablation ablation = Ablation::Full;
  double beta = 0.5;
  double sigma = 0.1;
  double eta = 0.9;
  double low_fraction = 0.3;
  Eigen::Index hidden = 0;  // 0: single dense layer per branch
  nn::SgdConfig sgd;
  int epochs = 50;
  Eigen::Index batch_size = 128;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FanetModel {
  nn::Network smap_q;  // 94 -> 1 sigmoid
  nn::Network smap_f;  // 128 -> 1 sigmoid
  Standardizer std_q, std_f;
  CenterSet centers = CenterSet::initial();
  double beta = 0.5;
  double eta = 0.9;
  Ablation ablation = Ablation::Full;

  bool ready() const { return !smap_q.empty() && !smap_f.empty(); }
  bool use_low() const { return ablation != Ablation::NoLowClass; }

  nn::Checkpoint to_checkpoint() const;
  static FanetModel from_checkpoint(const nn::Checkpoint& ckpt);
};

/// Untrained score-mapping branches for `cfg` (seeded init, identity standardizers).
FanetModel make_model(const FanetConfig& cfg);

/// Joins 94 quality and 128 forensic features into the 222-dim model input.
Eigen::VectorXd model_input(const Eigen::Ref<const Eigen::VectorXd>& quality,
                            const Eigen::Ref<const Eigen::VectorXd>& forensic);

/// Branch inputs after standardization (and zeroing of the forensic half in
/// quality_only mode), for a 222 x n batch.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> branch_inputs(const FanetModel& model, const Eigen::MatrixXd& x);

/// (y_hat_q, y_hat_f) per column of a 222 x n batch.
Eigen::Matrix2Xd predict(const FanetModel& model, const Eigen::MatrixXd& x);

/// beta (1 - K3) + (1 - beta) |D1 - D2|, or |D1 - D2| alone without a low class.
double forensicability_score(const Point& y_hat, const CenterSet& centers, double beta,
                             Ablation ablation = Ablation::Full);
double forensicability_score(const FanetModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd forensicability_scores(const FanetModel& model, const Eigen::MatrixXd& x);

/// Arithmetic mean of frame scores.
double video_score(const std::vector<double>& frames);

/// Mean center loss of a batch and, optionally, gradients for both branches,
/// the kernel weights and the raw input (all averaged over the batch).
struct BatchGradients {
  nn::Gradients q, f;
  CenterMatrix lambda = CenterMatrix::Zero();
  Eigen::MatrixXd input;  // d loss / d x, 222 x n (raw, pre-standardization)
};
double batch_loss(const FanetModel& model, const Eigen::MatrixXd& x, const std::vector<Label>& labels,
                  BatchGradients* grads = nullptr, Eigen::Matrix2Xd* y_hat = nullptr);

struct TrainResult {
  FanetModel model;
  std::vector<Label> labels;
  std::array<std::size_t, 3> class_counts{};
  std::vector<double> epoch_loss;  // mean over each epoch's batches
  double final_loss = 0;           // mean over the whole set after training
};

/// Labels once from the supervision pairs, fits the feature standardizers, then
/// per mini-batch: forward, loss, backward into both branches and lambda, SGD
/// step, center update from the batch outputs.
TrainResult train_fanet(const Eigen::MatrixXd& features, const std::vector<supervision::ScorePair>& supervision,
                        const FanetConfig& cfg);

struct ScoreRecord {
  std::string id;
  double f = 0;
  Point y_hat = Point::Zero();
};

// Scores output: header "id\tF\ty_hat_q\ty_hat_f", then one row per id.
std::string score_records_text(const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> parse_score_records(const std::string& text, const std::string& name);

}  // namespace fanet::quant

#endif  // FANET_QUANTIFIER_HPP
