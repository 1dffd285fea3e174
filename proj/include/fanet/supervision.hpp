#ifndef FANET_SUPERVISION_HPP
#define FANET_SUPERVISION_HPP

#include "fanet/feature_file.hpp"
#include "fanet/forensic/extractor.hpp"
#include "fanet/image.hpp"
#include "fanet/iqa/features.hpp"
#include "fanet/nn/network.hpp"
#include "fanet/nn/sgd.hpp"
#include "fanet/standardizer.hpp"
#include "fanet/synth.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fanet::supervision {

/// Quality and forensic targets in [0, 1]; 0 = low quality / spoof.
struct ScorePair {
  double y_q = 0;
  double y_f = 0;
};

/// Standardized 94 quality features -> 16 relu -> 1 sigmoid.
class QualityHead {
 public:
  QualityHead() = default;
  QualityHead(nn::Network net, Standardizer standardizer);

  bool ready() const { return !net_.empty(); }
  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }
  const Standardizer& standardizer() const { return standardizer_; }

  nn::Checkpoint to_checkpoint() const;
  static QualityHead from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  nn::Network net_;
  Standardizer standardizer_;
};

double quality_score(const QualityHead& head, const Eigen::Ref<const Eigen::VectorXd>& q);
/// One score per column.
Eigen::VectorXd quality_scores(const QualityHead& head, const Eigen::MatrixXd& q);

/// Genuine-class probability of the extractor's 2-way head.
double forensic_score(const forensic::ForensicExtractor& extractor,
                      const Eigen::Ref<const Eigen::VectorXd>& f);

struct LadderConfig {
  /// Level 0 should be the undistorted image; severity grows with the index.
  std::vector<synth::Degradation> levels = {{0.0, 0.0}, {1.0, 0.01}, {2.0, 0.02}, {4.0, 0.04}};
  std::uint64_t seed = 1;
};

struct LadderSample {
  std::size_t base = 0;
  int level = 0;
  iqa::QualityVector features;
  double mos = 0;
};

/// 1 - level / (levels - 1).
double pseudo_mos(int level, int levels);

/// Every base image at every level, ordered by base then level.
std::vector<LadderSample> build_quality_ladder(const std::vector<GrayImage>& bases, const LadderConfig& cfg,
                                               unsigned jobs = 1);

struct QualityHeadTrainConfig {
  nn::SgdConfig sgd{0.05, 0.9, 1e-4, 5.0, 100};
  int epochs = 300;
  Eigen::Index batch_size = 16;
  Eigen::Index hidden = 16;
  std::uint64_t seed = 1;
};

/// Mean squared error regression onto the pseudo-MOS.
QualityHead train_quality_head(const std::vector<LadderSample>& samples, const QualityHeadTrainConfig& cfg);

double quality_mse(const QualityHead& head, const std::vector<LadderSample>& samples);

struct SupervisionRecord {
  std::string id;
  ScorePair scores;
  int label = -1;  // 1 genuine, 0 spoof, -1 unknown
};

struct LabeledId {
  std::string id;
  int label = -1;
};

/// One score pair per requested id from its 94 quality and 128 forensic
/// features. Ids without complete features are reported together.
std::vector<SupervisionRecord> build_supervision(const std::vector<LabeledId>& ids,
                                                 const std::vector<FeatureRecord>& features,
                                                 const QualityHead& quality,
                                                 const forensic::ForensicExtractor& extractor);

// Scores file: header line "id\ty_q\ty_f\tlabel", then one tab-separated row per
// image; label is "genuine", "spoof" or empty; ids percent-encoded.
std::string scores_text(const std::vector<SupervisionRecord>& records);
std::vector<SupervisionRecord> parse_scores(const std::string& text, const std::string& name);
void write_scores(const std::filesystem::path& path, const std::vector<SupervisionRecord>& records);
std::vector<SupervisionRecord> read_scores(const std::filesystem::path& path);

}  // namespace fanet::supervision

#endif  // FANET_SUPERVISION_HPP
