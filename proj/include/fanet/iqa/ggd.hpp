#ifndef FANET_IQA_GGD_HPP
#define FANET_IQA_GGD_HPP

#include <Eigen/Dense>

namespace fanet::iqa {

inline constexpr double kAlphaMin = 0.05;
inline constexpr double kAlphaMax = 10.0;
inline constexpr double kSigmaFloor = 1e-6;
inline constexpr Eigen::Index kMinFitSamples = 64;

/// Zero-mean generalized Gaussian, moment matched.
struct GgdParams {
  double alpha = kAlphaMin;
  double sigma = kSigmaFloor;
};

/// Asymmetric generalized Gaussian. `one_sided` marks fits where one half had no
/// samples and its scale was clamped to kSigmaFloor.
struct AggdParams {
  double alpha = kAlphaMin;
  double sigma_left = kSigmaFloor;
  double sigma_right = kSigmaFloor;
  double mean = 0.0;
  bool one_sided = false;
};

/// Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)), increasing in a.
double ggd_ratio(double alpha);

/// Inverts ggd_ratio over [kAlphaMin, kAlphaMax]: table lookup brackets the root,
/// bisection refines it. Ratios outside the table range clamp to the ends.
double solve_ggd_shape(double ratio);

using Samples = Eigen::Ref<const Eigen::ArrayXd>;

/// Requires at least kMinFitSamples values, not all zero.
GgdParams fit_ggd(const Samples& x);
AggdParams fit_aggd(const Samples& x);

/// Same estimators without the sample-count precondition; an all-zero input
/// yields the default (degenerate) parameters instead of an error.
GgdParams fit_ggd_lenient(const Samples& x);
AggdParams fit_aggd_lenient(const Samples& x);

}  // namespace fanet::iqa

#endif  // FANET_IQA_GGD_HPP
