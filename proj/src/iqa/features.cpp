#include "fanet/iqa/features.hpp"

#include "fanet/error.hpp"
#include "fanet/iqa/ggd.hpp"

#include <array>
#include <cmath>

namespace fanet::iqa {

using Eigen::ArrayXd;
using Eigen::Index;

namespace {

Eigen::Map<const ArrayXd> samples(const Plane& p) { return {p.data(), p.size()}; }

// Shifting by the top-left pixel keeps flat regions exactly zero after linear
// filtering; every consumer below is shift invariant.
Plane centered(const Plane& p) { return p.array() - p(0, 0); }

// CDF 9/7 analysis filters (JPEG 2000 irreversible transform), DC gain 1.
const Eigen::VectorXd& cdf97_lowpass() {
  static const Eigen::VectorXd h = (Eigen::VectorXd(9) << 0.026748757411, -0.016864118443,
                                    -0.078223266529, 0.266864118443, 0.602949018236,
                                    0.266864118443, -0.078223266529, -0.016864118443,
                                    0.026748757411)
                                       .finished();
  return h;
}

const Eigen::VectorXd& cdf97_highpass() {
  static const Eigen::VectorXd g = (Eigen::VectorXd(7) << 0.091271763114, -0.057543526229,
                                    -0.591271763114, 1.115087052457, -0.591271763114,
                                    -0.057543526229, 0.091271763114)
                                       .finished();
  return g;
}

Plane decimate(const Plane& p) {
  Plane out((p.rows() + 1) / 2, (p.cols() + 1) / 2);
  for (Index x = 0; x < out.cols(); ++x)
    for (Index y = 0; y < out.rows(); ++y) out(y, x) = p(2 * y, 2 * x);
  return out;
}

Plane product(const Plane& m, Index dy, Index dx) {
  const Index x0 = dx < 0 ? -dx : 0;
  const Index x1 = dx > 0 ? m.cols() - dx : m.cols();
  Plane out(m.rows() - dy, x1 - x0);
  for (Index x = x0; x < x1; ++x)
    for (Index y = 0; y + dy < m.rows(); ++y) out(y, x - x0) = m(y, x) * m(y + dy, x + dx);
  return out;
}

void brisque_scale(const Plane& img, BrisqueVector& out, Index offset) {
  require(img.rows() >= 7 && img.cols() >= 7, ErrorKind::InvalidInput,
          "image too small for the downscaled BRISQUE statistics");
  const Plane m = mscn_map(img, 7);
  const GgdParams g = fit_ggd_lenient(samples(m));
  out(offset) = g.alpha;
  out(offset + 1) = g.sigma * g.sigma;
  static constexpr std::array<std::array<Index, 2>, 4> shifts = {{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
  for (std::size_t k = 0; k < shifts.size(); ++k) {
    const Plane p = product(m, shifts[k][0], shifts[k][1]);
    const AggdParams a = fit_aggd_lenient(samples(p));
    const Index o = offset + 2 + static_cast<Index>(4 * k);
    out(o) = a.alpha;
    out(o + 1) = a.mean;
    out(o + 2) = a.sigma_left * a.sigma_left;
    out(o + 3) = a.sigma_right * a.sigma_right;
  }
}

Eigen::MatrixXd log_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::MatrixXd k(2 * r + 1, 2 * r + 1);
  const double s2 = sigma * sigma;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double d = x * x + y * y;
      k(y + r, x + r) = (d - 2.0 * s2) / (s2 * s2) * std::exp(-d / (2.0 * s2));
    }
  k.array() -= k.mean();
  // same L1 mass as the Prewitt pair so neither response dominates the joint norm
  return 2.0 * k / k.cwiseAbs().sum();
}

int quantize(double v) {
  const int bin = static_cast<int>(std::abs(v) / kGmlogBinWidth);
  return std::min(bin, kGmlogLevels - 1);
}

}  // namespace

QualityVector QualityFeatures::concat() const {
  QualityVector v;
  v << biqi, gmlog, brisque;
  return v;
}

Plane mscn_map(const Plane& img, int window) {
  require(window > 0 && window % 2 == 1, ErrorKind::InvalidInput, "MSCN window must be odd");
  require(window <= img.rows() && window <= img.cols(), ErrorKind::InvalidInput,
          "MSCN window larger than image");
  const Eigen::VectorXd w = gaussian_kernel(window / 6.0, window / 2);
  const Plane c = centered(img);
  // local statistics exclude the centre pixel
  const double wc = w(window / 2) * w(window / 2);
  const Eigen::ArrayXXd mu = (filter_separable(c, w, w).array() - wc * c.array()) / (1.0 - wc);
  const Plane sq = c.array().square().matrix();
  const Eigen::ArrayXXd ex2 = (filter_separable(sq, w, w).array() - wc * c.array().square()) / (1.0 - wc);
  const Eigen::ArrayXXd sigma = (ex2 - mu.square()).max(0.0).sqrt();
  return ((c.array() - mu) / (sigma + 1.0 / 255.0)).matrix();
}

BrisqueVector brisque_features(const GrayImage& img) {
  BrisqueVector out;
  brisque_scale(img.pixels(), out, 0);
  brisque_scale(downsample2(img.pixels()), out, 18);
  return out;
}

BiqiVector biqi_features(const GrayImage& img) {
  require(img.width() >= 8 && img.height() >= 8, ErrorKind::InvalidInput,
          "image too small for a three-level wavelet decomposition");
  const auto& lo = cdf97_lowpass();
  const auto& hi = cdf97_highpass();
  BiqiVector out;
  Plane approx = centered(img.pixels());
  for (int level = 0; level < 3; ++level) {
    // horizontal filter first argument, vertical second
    const std::array<Plane, 3> bands = {decimate(filter_separable(approx, lo, hi)),
                                        decimate(filter_separable(approx, hi, lo)),
                                        decimate(filter_separable(approx, hi, hi))};
    for (int b = 0; b < 3; ++b) {
      const GgdParams g = fit_ggd_lenient(samples(bands[static_cast<std::size_t>(b)]));
      out(6 * level + 2 * b) = g.alpha;
      out(6 * level + 2 * b + 1) = g.sigma;
    }
    approx = decimate(filter_separable(approx, lo, lo));
  }
  return out;
}

GmlogVector gmlog_features(const GrayImage& img) {
  const Plane c = centered(img.pixels());
  Eigen::Matrix3d prewitt;
  prewitt << 1, 0, -1, 1, 0, -1, 1, 0, -1;
  prewitt /= 3.0;
  const Plane gx = correlate(c, prewitt);
  const Plane gy = correlate(c, prewitt.transpose());
  const Plane gm = (gx.array().square() + gy.array().square()).sqrt().matrix();
  const Plane lg = correlate(c, log_kernel(0.5));

  const Eigen::VectorXd w = gaussian_kernel(1.0, 3);
  const Plane energy = (gm.array().square() + lg.array().square()).matrix();
  const Plane norm = filter_separable(energy, w, w).array().max(0.0).sqrt().matrix();
  constexpr double eps = 0.2 / 255.0;

  Eigen::Matrix<double, kGmlogLevels, kGmlogLevels> joint = Eigen::Matrix<double, kGmlogLevels, kGmlogLevels>::Zero();
  for (Index x = 0; x < c.cols(); ++x)
    for (Index y = 0; y < c.rows(); ++y) {
      const double d = norm(y, x) + eps;
      joint(quantize(gm(y, x) / d), quantize(lg(y, x) / d)) += 1.0;
    }
  const double total = joint.sum();

  GmlogVector out = GmlogVector::Zero();
  out.segment<kGmlogLevels>(0) = joint.rowwise().sum() / total;
  out.segment<kGmlogLevels>(kGmlogLevels) = joint.colwise().sum().transpose() / total;
  // average over occupied conditioning bins of P(G | L = n) and P(L | G = m)
  int occupied = 0;
  for (int n = 0; n < kGmlogLevels; ++n) {
    const double col = joint.col(n).sum();
    if (col > 0) {
      out.segment<kGmlogLevels>(2 * kGmlogLevels) += joint.col(n) / col;
      ++occupied;
    }
  }
  out.segment<kGmlogLevels>(2 * kGmlogLevels) /= occupied;
  occupied = 0;
  for (int m = 0; m < kGmlogLevels; ++m) {
    const double row = joint.row(m).sum();
    if (row > 0) {
      out.segment<kGmlogLevels>(3 * kGmlogLevels) += joint.row(m).transpose() / row;
      ++occupied;
    }
  }
  out.segment<kGmlogLevels>(3 * kGmlogLevels) /= occupied;
  return out;
}

QualityFeatures quality_feature_vector(const GrayImage& img) {
  return {biqi_features(img), gmlog_features(img), brisque_features(img)};
}

QualityFeatures quality_feature_vector(const Plane& r, const Plane& g, const Plane& b) {
  return quality_feature_vector(GrayImage(luma(r, g, b)));
}

}  // namespace fanet::iqa
