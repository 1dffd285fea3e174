#include "fanet/quantifier.hpp"

#include "fanet/error.hpp"
#include "fanet/text_io.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace fanet::quant {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr const char* kKind = "fanet";
constexpr const char* kScoresHeader = "id\tF\ty_hat_q\ty_hat_f";

nn::Network make_branch(Index in, Index hidden, std::mt19937_64& rng) {
  nn::Network net;
  if (hidden > 0) {
    nn::DenseLayer h(in, hidden, nn::Activation::Relu);
    nn::initialize(h, rng);
    net.add(std::move(h));
    in = hidden;
  }
  nn::DenseLayer out(in, 1, nn::Activation::Sigmoid);
  nn::initialize(out, rng);
  net.add(std::move(out));
  return net;
}

void require_ready(const FanetModel& m) {
  require(m.ready(), ErrorKind::ModelNotReady, "FANet model is not trained or loaded");
}

VectorXd flat(const CenterMatrix& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

CenterMatrix unflat(const VectorXd& v, const std::string& name) {
  require(v.size() == 6, ErrorKind::Format, "checkpoint block '" + name + "' must hold 6 values");
  return Eigen::Map<const CenterMatrix>(v.data());
}

}  // namespace

std::string to_string(Label label) {
  switch (label) {
    case Label::HighPositive: return "high_positive";
    case Label::HighNegative: return "high_negative";
    case Label::Low: return "low";
  }
  return "?";
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoLowClass: return "no_low_class";
    case Ablation::RandomCenters: return "random_centers";
    case Ablation::QualityOnly: return "quality_only";
  }
  return "?";
}

Ablation ablation_from_string(const std::string& name) {
  for (Ablation a : {Ablation::Full, Ablation::NoLowClass, Ablation::RandomCenters, Ablation::QualityOnly})
    if (to_string(a) == name) return a;
  fail(ErrorKind::InvalidInput,
       "unknown ablation '" + name + "' (full, no_low_class, random_centers, quality_only)");
}

CenterSet CenterSet::initial(double sigma) {
  CenterSet c;
  c.centers << 1, 1, 0, 1, 0, 0.5;
  c.sigma = sigma;
  c.sums = c.centers;
  c.weights.setOnes();
  return c;
}

CenterSet CenterSet::random(std::uint64_t seed, double sigma) {
  CenterSet c = initial(sigma);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Index j = 0; j < 3; ++j)
    for (Index i = 0; i < 2; ++i) c.centers(i, j) = n(rng);
  c.sums = c.centers;
  return c;
}

Eigen::Vector3d distances(const Point& y, const CenterSet& centers) {
  return (centers.centers.colwise() - y).colwise().norm().transpose();
}

std::vector<Label> assign_labels(const std::vector<supervision::ScorePair>& pairs, const CenterSet& centers,
                                 double low_fraction, bool use_low) {
  require(!pairs.empty(), ErrorKind::InvalidInput, "rejected: no score pairs to label");
  require(low_fraction > 0 && low_fraction < 1, ErrorKind::InvalidInput, "low fraction must lie in (0, 1)");
  const std::size_t n = pairs.size();
  std::vector<Eigen::Vector3d> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = distances(Point(pairs[i].y_q, pairs[i].y_f), centers);
  std::vector<Label> out(n);
  std::vector<bool> low(n, false);
  if (use_low) {
    const auto k = static_cast<std::size_t>(std::ceil(low_fraction * static_cast<double>(n) - 1e-9));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a](2) < d[b](2); });
    for (std::size_t j = 0; j < k && j < n; ++j) low[order[j]] = true;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = low[i] ? Label::Low : d[i](0) <= d[i](1) ? Label::HighPositive : Label::HighNegative;
  return out;
}

LossTerms fanet_loss(const Point& y_hat, Label label, const CenterSet& centers, bool use_low) {
  require(use_low || label != Label::Low, ErrorKind::InvalidInput, "low label without a low-forensicability center");
  LossTerms t;
  const double s2 = centers.sigma * centers.sigma;
  const int classes = use_low ? 3 : 2;
  for (int c = 0; c < classes; ++c) {
    const Point d = y_hat - centers.centers.col(c);
    const Point lam = centers.lambda.col(c);
    const double q = (lam.array() * d.array()).matrix().squaredNorm() / (2.0 * s2);
    const double k = std::exp(-q);
    const double one_minus_k = -std::expm1(-q);
    t.kernels(c) = k;
    const Point dq_dy = (lam.array().square() * d.array()).matrix() / s2;
    const Point dq_dlam = (lam.array() * d.array().square()).matrix() / s2;
    const bool low_clamp = k < kKernelClamp, high_clamp = one_minus_k < kKernelClamp;
    if (static_cast<int>(label) == c) {
      // -log K = q
      if (low_clamp) {
        t.loss -= std::log(kKernelClamp);
      } else if (high_clamp) {
        t.loss -= std::log1p(-kKernelClamp);
      } else {
        t.loss += q;
        t.grad_y += dq_dy;
        t.grad_lambda.col(c) += dq_dlam;
      }
    } else if (low_clamp) {
      t.loss -= std::log1p(-kKernelClamp);
    } else if (high_clamp) {
      t.loss -= std::log(kKernelClamp);
    } else {
      // d(-log(1 - K))/dq = -K / (1 - K)
      t.loss -= k < 0.5 ? std::log1p(-k) : std::log(one_minus_k);
      const double r = -k / one_minus_k;
      t.grad_y += r * dq_dy;
      t.grad_lambda.col(c) += r * dq_dlam;
    }
  }
  return t;
}

void update_centers(CenterSet& centers, const Eigen::Matrix2Xd& y_hat, const std::vector<Label>& labels, double eta) {
  require(static_cast<Index>(labels.size()) == y_hat.cols(), ErrorKind::InvalidInput,
          "one label per batch output required");
  require(eta >= 0 && eta <= 1, ErrorKind::InvalidInput, "center momentum must lie in [0, 1]");
  CenterMatrix sum = CenterMatrix::Zero();
  Eigen::Vector3d count = Eigen::Vector3d::Zero();
  for (Index i = 0; i < y_hat.cols(); ++i) {
    const int c = static_cast<int>(labels[static_cast<std::size_t>(i)]);
    sum.col(c) += y_hat.col(i);
    count(c) += 1;
  }
  for (int c = 0; c < 3; ++c) {
    if (count(c) == 0) continue;
    centers.sums.col(c) = eta * centers.sums.col(c) + (1.0 - eta) * sum.col(c);
    centers.weights(c) = eta * centers.weights(c) + (1.0 - eta) * count(c);
    if (centers.weights(c) > 0) centers.centers.col(c) = centers.sums.col(c) / centers.weights(c);
  }
}

void FanetConfig::validate() const {
  require(beta >= 0 && beta <= 1, ErrorKind::InvalidInput, "beta must lie in [0, 1]");
  require(std::isfinite(sigma) && sigma > 0, ErrorKind::InvalidInput, "kernel sigma must be positive");
  require(eta >= 0 && eta <= 1, ErrorKind::InvalidInput, "center momentum must lie in [0, 1]");
  require(low_fraction > 0 && low_fraction < 1, ErrorKind::InvalidInput, "low fraction must lie in (0, 1)");
  require(hidden >= 0, ErrorKind::InvalidInput, "hidden width must be nonnegative");
  require(epochs >= 0 && batch_size > 0, ErrorKind::InvalidInput, "epochs and batch size must be positive");
  sgd.validate();
}

FanetModel make_model(const FanetConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  FanetModel m;
  m.smap_q = make_branch(kQualityInput, cfg.hidden, rng);
  m.smap_f = make_branch(kForensicInput, cfg.hidden, rng);
  m.std_q = Standardizer::identity(kQualityInput);
  m.std_f = Standardizer::identity(kForensicInput);
  m.centers = cfg.ablation == Ablation::RandomCenters ? CenterSet::random(cfg.seed ^ 0x5bd1e995ULL, cfg.sigma)
                                                      : CenterSet::initial(cfg.sigma);
  m.beta = cfg.beta;
  m.eta = cfg.eta;
  m.ablation = cfg.ablation;
  return m;
}

VectorXd model_input(const Eigen::Ref<const VectorXd>& quality, const Eigen::Ref<const VectorXd>& forensic) {
  require(quality.size() == kQualityInput, ErrorKind::InvalidInput,
          "dimension contract: expected 94 quality features, got " + std::to_string(quality.size()));
  require(forensic.size() == kForensicInput, ErrorKind::InvalidInput,
          "dimension contract: expected 128 forensic features, got " + std::to_string(forensic.size()));
  VectorXd x(kInputDim);
  x << quality, forensic;
  return x;
}

std::pair<MatrixXd, MatrixXd> branch_inputs(const FanetModel& model, const MatrixXd& x) {
  require(x.rows() == kInputDim, ErrorKind::InvalidInput,
          "dimension contract: FANet input must be 222-dim, got " + std::to_string(x.rows()));
  MatrixXd q = model.std_q.apply(x.topRows(kQualityInput));
  MatrixXd f = model.ablation == Ablation::QualityOnly ? MatrixXd::Zero(kForensicInput, x.cols())
                                                       : model.std_f.apply(x.bottomRows(kForensicInput));
  return {std::move(q), std::move(f)};
}

Eigen::Matrix2Xd predict(const FanetModel& model, const MatrixXd& x) {
  require_ready(model);
  const auto [q, f] = branch_inputs(model, x);
  Eigen::Matrix2Xd y(2, x.cols());
  y.row(0) = nn::forward(model.smap_q, q).output().row(0);
  y.row(1) = nn::forward(model.smap_f, f).output().row(0);
  return y;
}

double forensicability_score(const Point& y_hat, const CenterSet& centers, double beta, Ablation ablation) {
  const Eigen::Vector3d d = distances(y_hat, centers);
  const double gap = std::abs(d(0) - d(1));
  if (ablation == Ablation::NoLowClass) return gap;
  const double k3 = rbf_kernel(y_hat, centers.centers.col(2), centers.lambda.col(2), centers.sigma);
  return beta * (1.0 - k3) + (1.0 - beta) * gap;
}

VectorXd forensicability_scores(const FanetModel& model, const MatrixXd& x) {
  const Eigen::Matrix2Xd y = predict(model, x);
  VectorXd out(y.cols());
  for (Index i = 0; i < y.cols(); ++i)
    out(i) = forensicability_score(y.col(i), model.centers, model.beta, model.ablation);
  return out;
}

double forensicability_score(const FanetModel& model, const Eigen::Ref<const VectorXd>& x) {
  return forensicability_scores(model, MatrixXd(x))(0);
}

double video_score(const std::vector<double>& frames) {
  require(!frames.empty(), ErrorKind::InvalidInput, "rejected: video without frame scores");
  return std::accumulate(frames.begin(), frames.end(), 0.0) / static_cast<double>(frames.size());
}

double batch_loss(const FanetModel& model, const MatrixXd& x, const std::vector<Label>& labels,
                  BatchGradients* grads, Eigen::Matrix2Xd* y_hat) {
  require_ready(model);
  require(static_cast<Index>(labels.size()) == x.cols() && x.cols() > 0, ErrorKind::InvalidInput,
          "one label per input column required");
  const auto [q, f] = branch_inputs(model, x);
  const nn::Activations aq = nn::forward(model.smap_q, q), af = nn::forward(model.smap_f, f);
  const double n = static_cast<double>(x.cols());
  Eigen::Matrix2Xd y(2, x.cols());
  y.row(0) = aq.output().row(0);
  y.row(1) = af.output().row(0);
  MatrixXd gy(2, x.cols());
  CenterMatrix glam = CenterMatrix::Zero();
  double loss = 0;
  for (Index i = 0; i < x.cols(); ++i) {
    const LossTerms t = fanet_loss(y.col(i), labels[static_cast<std::size_t>(i)], model.centers, model.use_low());
    loss += t.loss;
    gy.col(i) = t.grad_y / n;
    glam += t.grad_lambda / n;
  }
  if (y_hat != nullptr) *y_hat = y;
  if (grads != nullptr) {
    grads->q = nn::backward(model.smap_q, aq, gy.row(0));
    grads->f = nn::backward(model.smap_f, af, gy.row(1));
    grads->lambda = glam;
    grads->input.resize(kInputDim, x.cols());
    grads->input.topRows(kQualityInput) = (grads->q.input.array().colwise() * model.std_q.inv_scale.array()).matrix();
    if (model.ablation == Ablation::QualityOnly)
      grads->input.bottomRows(kForensicInput).setZero();
    else
      grads->input.bottomRows(kForensicInput) =
          (grads->f.input.array().colwise() * model.std_f.inv_scale.array()).matrix();
  }
  return loss / n;
}

TrainResult train_fanet(const MatrixXd& features, const std::vector<supervision::ScorePair>& supervision,
                        const FanetConfig& cfg) {
  cfg.validate();
  require(features.rows() == kInputDim, ErrorKind::InvalidInput,
          "dimension contract: FANet input must be 222-dim, got " + std::to_string(features.rows()));
  require(static_cast<std::size_t>(features.cols()) == supervision.size(), ErrorKind::InvalidInput,
          "features and supervision are not aligned");
  require(features.allFinite(), ErrorKind::InvalidInput, "non-finite training features");

  TrainResult r;
  r.model = make_model(cfg);
  FanetModel& m = r.model;
  r.labels = assign_labels(supervision, m.centers, cfg.low_fraction, m.use_low());
  for (Label l : r.labels) ++r.class_counts[static_cast<std::size_t>(l)];
  for (int c = 0; c < (m.use_low() ? 3 : 2); ++c)
    require(r.class_counts[static_cast<std::size_t>(c)] >= 3, ErrorKind::Numerical,
            "training failed: class " + to_string(static_cast<Label>(c)) + " has " +
                std::to_string(r.class_counts[static_cast<std::size_t>(c)]) + " samples (counts " +
                std::to_string(r.class_counts[0]) + "/" + std::to_string(r.class_counts[1]) + "/" +
                std::to_string(r.class_counts[2]) + "), at least 3 per class required");

  m.std_q = Standardizer::fit(features.topRows(kQualityInput));
  m.std_f = Standardizer::fit(features.bottomRows(kForensicInput));

  nn::Sgd opt_q(cfg.sgd), opt_f(cfg.sgd);
  CenterMatrix lambda_velocity = CenterMatrix::Zero();
  std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
  std::vector<Index> order(static_cast<std::size_t>(features.cols()));
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      const std::size_t e = std::min(order.size(), b + bs);
      const std::vector<Index> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                   order.begin() + static_cast<std::ptrdiff_t>(e));
      std::vector<Label> lb;
      for (Index i : idx) lb.push_back(r.labels[static_cast<std::size_t>(i)]);
      BatchGradients g;
      Eigen::Matrix2Xd y;
      const double loss = batch_loss(m, features(Eigen::all, idx), lb, &g, &y);
      require(std::isfinite(loss), ErrorKind::Numerical, "training diverged: non-finite loss");
      total += loss * static_cast<double>(idx.size());
      opt_q.step(m.smap_q, g.q, epoch);
      opt_f.step(m.smap_f, g.f, epoch);
      nn::sgd_step(m.centers.lambda, g.lambda, lambda_velocity, cfg.sgd, nn::learning_rate_at(cfg.sgd, epoch));
      update_centers(m.centers, y, lb, cfg.eta);
      require(m.centers.centers.allFinite(), ErrorKind::Numerical, "training failed: centers became non-finite");
    }
    r.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  r.final_loss = batch_loss(m, features, r.labels);
  return r;
}

nn::Checkpoint FanetModel::to_checkpoint() const {
  require_ready(*this);
  nn::Checkpoint ck;
  ck.kind = kKind;
  ck.meta.emplace_back("ablation", to_string(ablation));
  ck.networks.emplace_back("smap_q", smap_q);
  ck.networks.emplace_back("smap_f", smap_f);
  std_q.store(ck, "std_q");
  std_f.store(ck, "std_f");
  ck.blocks.emplace_back("centers", flat(centers.centers));
  ck.blocks.emplace_back("lambda", flat(centers.lambda));
  ck.blocks.emplace_back("center_sums", flat(centers.sums));
  ck.blocks.emplace_back("center_weights", VectorXd(centers.weights));
  ck.blocks.emplace_back("scalars", (VectorXd(3) << centers.sigma, beta, eta).finished());
  return ck;
}

FanetModel FanetModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  require(ckpt.kind == kKind, ErrorKind::Format, "checkpoint holds '" + ckpt.kind + "', expected " + kKind);
  FanetModel m;
  m.ablation = ablation_from_string(ckpt.meta_value("ablation"));
  m.smap_q = ckpt.network("smap_q");
  m.smap_f = ckpt.network("smap_f");
  require(m.smap_q.input_size() == kQualityInput && m.smap_q.output_size() == 1 &&
              m.smap_f.input_size() == kForensicInput && m.smap_f.output_size() == 1,
          ErrorKind::Format, "dimension contract: score-mapping branches must be 94->1 and 128->1");
  m.std_q = Standardizer::load(ckpt, "std_q");
  m.std_f = Standardizer::load(ckpt, "std_f");
  require(m.std_q.dim() == kQualityInput && m.std_f.dim() == kForensicInput, ErrorKind::Format,
          "standardizer dimensions do not match the branches");
  m.centers.centers = unflat(ckpt.block("centers"), "centers");
  m.centers.lambda = unflat(ckpt.block("lambda"), "lambda");
  m.centers.sums = unflat(ckpt.block("center_sums"), "center_sums");
  const VectorXd& w = ckpt.block("center_weights");
  const VectorXd& s = ckpt.block("scalars");
  require(w.size() == 3 && s.size() == 3, ErrorKind::Format, "malformed center blocks");
  m.centers.weights = w;
  m.centers.sigma = s(0);
  m.beta = s(1);
  m.eta = s(2);
  return m;
}

std::string score_records_text(const std::vector<ScoreRecord>& records) {
  std::ostringstream out;
  out << kScoresHeader << '\n';
  for (const auto& r : records)
    out << nn::percent_encode(r.id) << '\t' << format_double(r.f) << '\t' << format_double(r.y_hat(0)) << '\t'
        << format_double(r.y_hat(1)) << '\n';
  return out.str();
}

std::vector<ScoreRecord> parse_score_records(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  require(std::getline(in, line) && line == kScoresHeader, ErrorKind::Format, name + ": unexpected header");
  std::vector<ScoreRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto c = split(line, '\t');
    require(c.size() == 4, ErrorKind::Format, where + ": expected 4 columns");
    out.push_back({nn::percent_decode(c[0]), parse_double(c[1], where),
                   Point(parse_double(c[2], where), parse_double(c[3], where))});
  }
  return out;
}

}  // namespace fanet::quant
