#ifndef FANET_IQA_FEATURES_HPP
#define FANET_IQA_FEATURES_HPP

#include "fanet/image.hpp"

#include <Eigen/Dense>

namespace fanet::iqa {

inline constexpr int kBiqiDim = 18;
inline constexpr int kGmlogDim = 40;
inline constexpr int kBrisqueDim = 36;
inline constexpr int kQualityDim = kBiqiDim + kGmlogDim + kBrisqueDim;
static_assert(kQualityDim == 94);

using BiqiVector = Eigen::Matrix<double, kBiqiDim, 1>;
using GmlogVector = Eigen::Matrix<double, kGmlogDim, 1>;
using BrisqueVector = Eigen::Matrix<double, kBrisqueDim, 1>;
using QualityVector = Eigen::Matrix<double, kQualityDim, 1>;

struct QualityFeatures {
  BiqiVector biqi;
  GmlogVector gmlog;
  BrisqueVector brisque;

  /// [biqi | gmlog | brisque]
  QualityVector concat() const;
};

/// Mean-subtracted contrast-normalized coefficients with a Gaussian window
/// (sigma = window / 6, centre pixel left out of the local mean and deviation)
/// and C = 1/255. Works on any plane at least `window` wide.
Plane mscn_map(const Plane& img, int window = 7);

/// Two scales (full, 2x2-averaged). Per scale: MSCN GGD (alpha, sigma^2), then
/// for the horizontal, vertical, main-diagonal and anti-diagonal neighbour
/// products AGGD (alpha, mean, sigma_left^2, sigma_right^2).
BrisqueVector brisque_features(const GrayImage& img);

/// Three-level separable CDF 9/7 wavelet decomposition; GGD (alpha, sigma) of
/// the LH, HL, HH subbands, finest level first.
BiqiVector biqi_features(const GrayImage& img);

/// Prewitt gradient magnitude and Laplacian of Gaussian (sigma 0.5), jointly
/// normalized, quantized to 10 levels each. Emits the GM marginal, the LOG
/// marginal, then the GM and LOG conditional-dependency profiles.
GmlogVector gmlog_features(const GrayImage& img);

QualityFeatures quality_feature_vector(const GrayImage& img);

/// RGB input converted with BT.601 luma first.
QualityFeatures quality_feature_vector(const Plane& r, const Plane& g, const Plane& b);

/// Uniform quantizer for normalized GM and |LOG| values; the last bin is open ended.
inline constexpr double kGmlogBinWidth = 0.2;
inline constexpr int kGmlogLevels = 10;

}  // namespace fanet::iqa

#endif  // FANET_IQA_FEATURES_HPP
