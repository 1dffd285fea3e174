#include "fanet/pipeline.hpp"

#include "fanet/error.hpp"
#include "fanet/iqa/features.hpp"
#include "fanet/parallel.hpp"
#include "fanet/quantifier.hpp"

#include <map>

namespace fanet::pipeline {

namespace {

std::string id_list(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

std::vector<forensic::LabeledImage> labeled_images(const synth::Corpus& corpus, bool clean_only) {
  std::vector<forensic::LabeledImage> out;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    if (clean_only && corpus.entries[i].degradation.active()) continue;
    out.push_back({GrayImage(corpus.images[i]), corpus.entries[i].label});
  }
  return out;
}

std::vector<GrayImage> ladder_bases(const synth::Corpus& corpus) {
  std::vector<GrayImage> out;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i)
    if (corpus.entries[i].label == 1 && !corpus.entries[i].degradation.active()) out.emplace_back(corpus.images[i]);
  return out;
}

std::vector<FeatureRecord> quality_features(const synth::Corpus& corpus, unsigned jobs) {
  std::vector<FeatureRecord> out(corpus.entries.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i].id = corpus.entries[i].id;
    out[i].quality = iqa::quality_feature_vector(GrayImage(corpus.images[i])).concat();
  });
  return out;
}

std::vector<FeatureRecord> extract_features(const synth::Corpus& corpus,
                                            const forensic::ForensicExtractor& extractor, unsigned jobs) {
  require(extractor.ready(), ErrorKind::ModelNotReady, "feature extraction needs a trained extractor");
  std::vector<FeatureRecord> out = quality_features(corpus, jobs);
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i].forensic = forensic::extract(extractor, GrayImage(corpus.images[i]));
  });
  return out;
}

Eigen::MatrixXd model_inputs(const std::vector<std::string>& ids, const std::vector<FeatureRecord>& features) {
  std::map<std::string, const FeatureRecord*> by_id;
  for (const auto& r : features) by_id[r.id] = &r;
  Eigen::MatrixXd x(quant::kInputDim, static_cast<Eigen::Index>(ids.size()));
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = by_id.find(ids[i]);
    if (it == by_id.end() || it->second->quality.size() != quant::kQualityInput ||
        it->second->forensic.size() != quant::kForensicInput) {
      missing.push_back(ids[i]);
      continue;
    }
    x.col(static_cast<Eigen::Index>(i)) = quant::model_input(it->second->quality, it->second->forensic);
  }
  require(missing.empty(), ErrorKind::Dependency,
          "partial corpus: no complete 94 + 128 features for " + id_list(missing));
  return x;
}

std::vector<supervision::LabeledId> labeled_ids(const synth::Corpus& corpus) {
  std::vector<supervision::LabeledId> out;
  for (const auto& e : corpus.entries) out.push_back({e.id, e.label});
  return out;
}

std::vector<gate::EvalSample> eval_samples(const synth::Corpus& corpus) {
  std::vector<gate::EvalSample> out;
  for (const auto& e : corpus.entries) out.push_back({e.id, e.group, e.label});
  return out;
}

std::vector<supervision::ScorePair> score_pairs(const std::vector<std::string>& ids,
                                                const std::vector<supervision::SupervisionRecord>& records) {
  std::map<std::string, supervision::ScorePair> by_id;
  for (const auto& r : records) by_id[r.id] = r.scores;
  std::vector<supervision::ScorePair> out;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      missing.push_back(id);
      continue;
    }
    out.push_back(it->second);
  }
  require(missing.empty(), ErrorKind::Dependency, "no supervision scores for " + id_list(missing));
  return out;
}

}  // namespace fanet::pipeline
