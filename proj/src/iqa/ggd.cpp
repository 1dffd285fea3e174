#include "fanet/iqa/ggd.hpp"

#include "fanet/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fanet::iqa {

namespace {

constexpr double kTableStep = 0.001;

const std::vector<double>& ratio_table() {
  static const std::vector<double> table = [] {
    const auto n = static_cast<std::size_t>(std::lround((kAlphaMax - kAlphaMin) / kTableStep)) + 1;
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = ggd_ratio(kAlphaMin + static_cast<double>(i) * kTableStep);
    return t;
  }();
  return table;
}

GgdParams fit_ggd_moments(const Samples& x) {
  const double second = x.square().mean();
  if (!(second > 0.0)) return {};
  const double first = x.abs().mean();
  return {solve_ggd_shape(first * first / second), std::sqrt(second)};
}

AggdParams fit_aggd_moments(const Samples& x) {
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  Eigen::Index left_n = 0, right_n = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    if (v < 0) {
      left_sq += v * v;
      ++left_n;
    } else if (v > 0) {
      right_sq += v * v;
      ++right_n;
    }
    abs_sum += std::abs(v);
    sq_sum += v * v;
  }
  if (!(sq_sum > 0.0)) return {};
  AggdParams p;
  p.one_sided = left_n == 0 || right_n == 0;
  p.sigma_left = left_n > 0 ? std::sqrt(left_sq / static_cast<double>(left_n)) : kSigmaFloor;
  p.sigma_right = right_n > 0 ? std::sqrt(right_sq / static_cast<double>(right_n)) : kSigmaFloor;
  const double n = static_cast<double>(x.size());
  const double r = (abs_sum / n) * (abs_sum / n) / (sq_sum / n);
  const double g = p.sigma_left / p.sigma_right;
  const double adjusted = r * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
  p.alpha = solve_ggd_shape(adjusted);
  const double a = p.alpha;
  p.mean = (p.sigma_right - p.sigma_left) *
           std::exp(std::lgamma(2.0 / a) - 0.5 * (std::lgamma(1.0 / a) + std::lgamma(3.0 / a)));
  return p;
}

void check_fit_input(const Samples& x) {
  require(x.size() >= kMinFitSamples, ErrorKind::InvalidInput,
          "distribution fit needs at least 64 samples, got " + std::to_string(x.size()));
  require(x.allFinite(), ErrorKind::InvalidInput, "distribution fit got non-finite samples");
  require((x != 0.0).any(), ErrorKind::InvalidInput, "degenerate input: all samples are zero");
}

}  // namespace

double ggd_ratio(double alpha) {
  return std::exp(2.0 * std::lgamma(2.0 / alpha) - std::lgamma(1.0 / alpha) - std::lgamma(3.0 / alpha));
}

double solve_ggd_shape(double ratio) {
  const auto& table = ratio_table();
  if (!(ratio > table.front())) return kAlphaMin;
  if (ratio >= table.back()) return kAlphaMax;
  const auto it = std::upper_bound(table.begin(), table.end(), ratio);
  const auto i = static_cast<std::size_t>(it - table.begin());
  double lo = kAlphaMin + static_cast<double>(i - 1) * kTableStep;
  double hi = std::min(kAlphaMin + static_cast<double>(i) * kTableStep, kAlphaMax);
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (ggd_ratio(mid) < ratio ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

GgdParams fit_ggd(const Samples& x) {
  check_fit_input(x);
  return fit_ggd_moments(x);
}

AggdParams fit_aggd(const Samples& x) {
  check_fit_input(x);
  return fit_aggd_moments(x);
}

GgdParams fit_ggd_lenient(const Samples& x) { return fit_ggd_moments(x); }

AggdParams fit_aggd_lenient(const Samples& x) { return fit_aggd_moments(x); }

}  // namespace fanet::iqa
