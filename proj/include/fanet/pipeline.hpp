#ifndef FANET_PIPELINE_HPP
#define FANET_PIPELINE_HPP

#include "fanet/feature_file.hpp"
#include "fanet/forensic/extractor.hpp"
#include "fanet/gate.hpp"
#include "fanet/supervision.hpp"
#include "fanet/synth.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fanet::pipeline {

/// Corpus samples as labeled images; `clean_only` drops degraded samples.
std::vector<forensic::LabeledImage> labeled_images(const synth::Corpus& corpus, bool clean_only);

/// Undegraded genuine samples, the bases of the quality ladder.
std::vector<GrayImage> ladder_bases(const synth::Corpus& corpus);

/// 94 quality features of every corpus sample (forensic half left empty).
std::vector<FeatureRecord> quality_features(const synth::Corpus& corpus, unsigned jobs);

/// 94 quality and 128 forensic features of every corpus sample, in corpus order.
std::vector<FeatureRecord> extract_features(const synth::Corpus& corpus,
                                            const forensic::ForensicExtractor& extractor, unsigned jobs);

/// 222 x n model inputs for `ids`; ids without both feature halves raise a
/// dependency error listing them.
Eigen::MatrixXd model_inputs(const std::vector<std::string>& ids, const std::vector<FeatureRecord>& features);

std::vector<supervision::LabeledId> labeled_ids(const synth::Corpus& corpus);
std::vector<gate::EvalSample> eval_samples(const synth::Corpus& corpus);

/// Score pairs aligned with `ids`.
std::vector<supervision::ScorePair> score_pairs(const std::vector<std::string>& ids,
                                                const std::vector<supervision::SupervisionRecord>& records);

}  // namespace fanet::pipeline

#endif  // FANET_PIPELINE_HPP
