#include "fanet/supervision.hpp"

#include "fanet/error.hpp"
#include "fanet/nn/checkpoint.hpp"
#include "fanet/parallel.hpp"
#include "fanet/text_io.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace fanet::supervision {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr const char* kQualityKind = "quality-head";
constexpr const char* kScoresHeader = "id\ty_q\ty_f\tlabel";

void require_ready(const QualityHead& head) {
  require(head.ready(), ErrorKind::ModelNotReady, "quality head is not trained or loaded");
}

MatrixXd feature_matrix(const std::vector<LadderSample>& samples) {
  MatrixXd x(iqa::kQualityDim, static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) x.col(static_cast<Index>(i)) = samples[i].features;
  return x;
}

std::string label_name(int label) { return label == 1 ? "genuine" : label == 0 ? "spoof" : ""; }

}  // namespace

QualityHead::QualityHead(nn::Network net, Standardizer standardizer)
    : net_(std::move(net)), standardizer_(std::move(standardizer)) {
  require(net_.input_size() == iqa::kQualityDim && net_.output_size() == 1, ErrorKind::InvalidInput,
          "quality head must map 94 features to one score");
  require(standardizer_.dim() == iqa::kQualityDim, ErrorKind::InvalidInput, "quality standardizer must be 94-dim");
}

nn::Checkpoint QualityHead::to_checkpoint() const {
  require_ready(*this);
  nn::Checkpoint ck;
  ck.kind = kQualityKind;
  ck.networks.emplace_back("net", net_);
  standardizer_.store(ck, "input");
  return ck;
}

QualityHead QualityHead::from_checkpoint(const nn::Checkpoint& ckpt) {
  require(ckpt.kind == kQualityKind, ErrorKind::Format,
          "checkpoint holds '" + ckpt.kind + "', expected " + kQualityKind);
  try {
    return {ckpt.network("net"), Standardizer::load(ckpt, "input")};
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidInput) fail(ErrorKind::Format, e.what());
    throw;
  }
}

VectorXd quality_scores(const QualityHead& head, const MatrixXd& q) {
  require_ready(head);
  require(q.rows() == iqa::kQualityDim, ErrorKind::InvalidInput,
          "quality features must have 94 values, got " + std::to_string(q.rows()));
  return nn::forward(head.network(), head.standardizer().apply(q)).output().row(0).transpose();
}

double quality_score(const QualityHead& head, const Eigen::Ref<const VectorXd>& q) {
  return quality_scores(head, MatrixXd(q))(0);
}

double forensic_score(const forensic::ForensicExtractor& extractor, const Eigen::Ref<const VectorXd>& f) {
  return forensic::class_probabilities(extractor, f)(1);
}

double pseudo_mos(int level, int levels) {
  require(levels >= 2, ErrorKind::InvalidInput, "ladder needs at least two levels");
  require(level >= 0 && level < levels, ErrorKind::InvalidInput, "ladder level out of range");
  return 1.0 - static_cast<double>(level) / static_cast<double>(levels - 1);
}

std::vector<LadderSample> build_quality_ladder(const std::vector<GrayImage>& bases, const LadderConfig& cfg,
                                               unsigned jobs) {
  const int levels = static_cast<int>(cfg.levels.size());
  require(levels >= 2, ErrorKind::InvalidInput, "rejected ladder: at least two degradation levels required");
  require(!bases.empty(), ErrorKind::InvalidInput, "ladder needs at least one base image");
  std::vector<LadderSample> out(bases.size() * cfg.levels.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    const std::size_t b = i / cfg.levels.size();
    const int l = static_cast<int>(i % cfg.levels.size());
    const Plane img = synth::degrade(bases[b].pixels(), cfg.levels[static_cast<std::size_t>(l)], cfg.seed + i);
    out[i] = {b, l, iqa::quality_feature_vector(GrayImage(img)).concat(), pseudo_mos(l, levels)};
  });
  return out;
}

QualityHead train_quality_head(const std::vector<LadderSample>& samples, const QualityHeadTrainConfig& cfg) {
  cfg.sgd.validate();
  require(!samples.empty(), ErrorKind::InvalidInput, "no ladder samples to train on");
  require(cfg.epochs > 0 && cfg.batch_size > 0 && cfg.hidden > 0, ErrorKind::InvalidInput,
          "epochs, batch size and hidden width must be positive");
  const MatrixXd raw = feature_matrix(samples);
  Standardizer std_ = Standardizer::fit(raw);
  const MatrixXd x = std_.apply(raw);
  VectorXd y(static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y(static_cast<Index>(i)) = samples[i].mos;

  std::mt19937_64 rng(cfg.seed);
  nn::DenseLayer h(iqa::kQualityDim, cfg.hidden, nn::Activation::Relu), o(cfg.hidden, 1, nn::Activation::Sigmoid);
  nn::initialize(h, rng);
  nn::initialize(o, rng);
  nn::Network net({h, o});
  nn::Sgd opt(cfg.sgd);
  std::vector<Index> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<Index> idx(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(e));
      const MatrixXd xb = x(Eigen::all, idx);
      const nn::Activations acts = nn::forward(net, xb);
      const MatrixXd grad = (acts.output() - y(idx).transpose()) / static_cast<double>(idx.size());
      opt.step(net, nn::backward(net, acts, grad), epoch);
    }
  }
  return {std::move(net), std::move(std_)};
}

double quality_mse(const QualityHead& head, const std::vector<LadderSample>& samples) {
  require(!samples.empty(), ErrorKind::InvalidInput, "no samples to evaluate");
  const VectorXd pred = quality_scores(head, feature_matrix(samples));
  double sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = pred(static_cast<Index>(i)) - samples[i].mos;
    sum += d * d;
  }
  return sum / static_cast<double>(samples.size());
}

std::vector<SupervisionRecord> build_supervision(const std::vector<LabeledId>& ids,
                                                 const std::vector<FeatureRecord>& features,
                                                 const QualityHead& quality,
                                                 const forensic::ForensicExtractor& extractor) {
  require_ready(quality);
  require(extractor.ready(), ErrorKind::ModelNotReady, "forensic extractor is not trained or loaded");
  std::map<std::string, const FeatureRecord*> by_id;
  for (const auto& r : features) by_id[r.id] = &r;
  std::vector<std::string> missing;
  for (const auto& s : ids) {
    const auto it = by_id.find(s.id);
    if (it == by_id.end() || it->second->quality.size() != iqa::kQualityDim ||
        it->second->forensic.size() != forensic::kForensicDim)
      missing.push_back(s.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ...";
    fail(ErrorKind::Dependency, "partial corpus: " + std::to_string(missing.size()) +
                                    " id(s) lack quality or forensic features: " + list);
  }
  std::vector<SupervisionRecord> out;
  for (const auto& s : ids) {
    const FeatureRecord& r = *by_id.at(s.id);
    out.push_back({s.id, {quality_score(quality, r.quality), forensic_score(extractor, r.forensic)}, s.label});
  }
  return out;
}

std::string scores_text(const std::vector<SupervisionRecord>& records) {
  std::ostringstream out;
  out << kScoresHeader << '\n';
  for (const auto& r : records) {
    require(r.scores.y_q >= 0 && r.scores.y_q <= 1 && r.scores.y_f >= 0 && r.scores.y_f <= 1, ErrorKind::InvalidInput,
            "scores for '" + r.id + "' fall outside [0, 1]");
    out << nn::percent_encode(r.id) << '\t' << format_double(r.scores.y_q) << '\t' << format_double(r.scores.y_f)
        << '\t' << label_name(r.label) << '\n';
  }
  return out.str();
}

std::vector<SupervisionRecord> parse_scores(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  require(std::getline(in, line) && line == kScoresHeader, ErrorKind::Format,
          name + ": expected header '" + std::string("id\\ty_q\\ty_f\\tlabel") + "'");
  std::vector<SupervisionRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto c = split(line, '\t');
    require(c.size() == 4, ErrorKind::Format, where + ": expected 4 columns");
    SupervisionRecord r;
    r.id = nn::percent_decode(c[0]);
    r.scores = {parse_double(c[1], where), parse_double(c[2], where)};
    require(r.scores.y_q >= 0 && r.scores.y_q <= 1 && r.scores.y_f >= 0 && r.scores.y_f <= 1, ErrorKind::Format,
            where + ": scores must lie in [0, 1]");
    if (c[3] == "genuine") r.label = 1;
    else if (c[3] == "spoof") r.label = 0;
    else require(c[3].empty(), ErrorKind::Format, where + ": label must be genuine, spoof or empty");
    out.push_back(std::move(r));
  }
  return out;
}

void write_scores(const std::filesystem::path& path, const std::vector<SupervisionRecord>& records) {
  write_file_atomic(path, scores_text(records));
}

std::vector<SupervisionRecord> read_scores(const std::filesystem::path& path) {
  return parse_scores(read_file(path), path.string());
}

}  // namespace fanet::supervision
