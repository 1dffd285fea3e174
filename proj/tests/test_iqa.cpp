#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fanet/error.hpp"
#include "fanet/iqa/features.hpp"
#include "fanet/iqa/ggd.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace fanet;
using namespace fanet::iqa;
using Eigen::ArrayXd;

namespace {

// Generalized Gaussian sampler: |X|^alpha ~ Gamma(1/alpha, 1), random sign.
ArrayXd sample_ggd(double alpha, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(1.0 / alpha, 1.0);
  std::bernoulli_distribution sign(0.5);
  ArrayXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = (sign(rng) ? 1.0 : -1.0) * std::pow(gamma(rng), 1.0 / alpha);
  return x;
}

ArrayXd sample_normal(Eigen::Index n, std::uint64_t seed, double mean = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, 1.0);
  ArrayXd x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

Plane noise_image(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Plane p(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) p(i, j) = d(rng);
  return p;
}

// Smooth texture plus detail, values inside [0.1, 0.5].
Plane texture_image(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  const Plane n = gaussian_blur(noise_image(rows, cols, seed), 1.0);
  Plane p(rows, cols);
  for (Eigen::Index x = 0; x < cols; ++x)
    for (Eigen::Index y = 0; y < rows; ++y)
      p(y, x) = 0.3 + 0.1 * std::sin(0.3 * x + 0.1 * y) + 0.2 * (n(y, x) - 0.5);
  return p.cwiseMax(0.0).cwiseMin(1.0);
}

// Gaussian white noise around 0.5, clipped into [0, 1].
Plane gaussian_noise_image(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.5, 0.1);
  Plane p(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) p(i, j) = std::clamp(d(rng), 0.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("MSCN of a constant image is zero") {
  const Plane m = mscn_map(Plane::Constant(40, 40, 0.37));
  CHECK(m.isZero(0.0));
}

TEST_CASE("MSCN of a checkerboard is symmetric about zero") {
  Plane board(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) board(y, x) = (x + y) % 2;
  const Plane m = mscn_map(board);
  CHECK(std::abs(m.mean()) <= 1e-6);
  CHECK(m.maxCoeff() > 0.5);
}

TEST_CASE("MSCN of white noise has roughly unit spread") {
  const Plane m = mscn_map(noise_image(128, 128, 5));
  const double mean = m.mean();
  const double sd = std::sqrt((m.array() - mean).square().mean());
  CHECK(sd > 0.8);
  CHECK(sd < 1.2);
}

TEST_CASE("MSCN rejects windows larger than the image") {
  CHECK_THROWS_AS(mscn_map(Plane::Zero(5, 5), 7), Error);
  CHECK_THROWS_AS(mscn_map(Plane::Zero(10, 10), 4), Error);
}

TEST_CASE("GGD shape ratio is increasing and invertible") {
  double prev = 0.0;
  for (double a = kAlphaMin; a <= kAlphaMax; a += 0.05) {
    const double r = ggd_ratio(a);
    CHECK(r > prev);
    prev = r;
    CHECK(solve_ggd_shape(r) == doctest::Approx(a).epsilon(1e-9));
  }
  CHECK(ggd_ratio(2.0) == doctest::Approx(2.0 / M_PI).epsilon(1e-12));
  CHECK(ggd_ratio(1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("GGD fit recovers gaussian and laplacian shapes") {
  const GgdParams g = fit_ggd(sample_normal(100000, 1));
  CHECK(g.alpha >= 1.9);
  CHECK(g.alpha <= 2.1);
  CHECK(g.sigma == doctest::Approx(1.0).epsilon(0.02));
  const GgdParams l = fit_ggd(sample_ggd(1.0, 100000, 2));
  CHECK(l.alpha >= 0.95);
  CHECK(l.alpha <= 1.05);
}

TEST_CASE("GGD fit round trip over shapes") {
  for (double alpha : {0.7, 1.0, 2.0, 4.0}) {
    const GgdParams p = fit_ggd(sample_ggd(alpha, 100000, static_cast<std::uint64_t>(alpha * 100)));
    CHECK(p.alpha == doctest::Approx(alpha).epsilon(0.10));
  }
}

TEST_CASE("GGD fit edge cases") {
  ArrayXd two_point(64);
  for (Eigen::Index i = 0; i < 64; ++i) two_point(i) = i % 2 ? 1.0 : -1.0;
  CHECK(fit_ggd(two_point).alpha == kAlphaMax);
  CHECK_THROWS_AS(fit_ggd(ArrayXd::Zero(100)), Error);
  CHECK_THROWS_AS(fit_ggd(ArrayXd::Ones(63)), Error);
}

TEST_CASE("AGGD fit on symmetric samples") {
  const AggdParams p = fit_aggd(sample_normal(100000, 3));
  CHECK(p.sigma_left == doctest::Approx(p.sigma_right).epsilon(0.05));
  CHECK(std::abs(p.mean) < 0.02);
  CHECK(p.alpha == doctest::Approx(2.0).epsilon(0.05));
  CHECK_FALSE(p.one_sided);
}

TEST_CASE("AGGD fit on one-sided samples") {
  const AggdParams p = fit_aggd(sample_normal(1000, 4, 10.0));
  CHECK(p.mean > 0);
  CHECK(p.one_sided);
  CHECK(p.sigma_left == kSigmaFloor);
  CHECK(std::isfinite(p.alpha));
}

TEST_CASE("AGGD fit mirrors under negation") {
  ArrayXd x = sample_ggd(1.3, 5000, 6);
  x = (x > 0).select(2.0 * x, x);  // skew it
  const AggdParams a = fit_aggd(x);
  const AggdParams b = fit_aggd(-x);
  CHECK(a.sigma_left == b.sigma_right);
  CHECK(a.sigma_right == b.sigma_left);
  CHECK(a.mean == doctest::Approx(-b.mean).epsilon(1e-9));
  CHECK(a.alpha == doctest::Approx(b.alpha).epsilon(1e-9));
  CHECK(a.mean > 0);
}

TEST_CASE("BRISQUE features") {
  SUBCASE("constant image yields finite degenerate values") {
    const BrisqueVector f = brisque_features(GrayImage(Plane::Constant(48, 48, 0.5)));
    CHECK(f.allFinite());
    CHECK(f(0) == kAlphaMin);
  }
  SUBCASE("quarter turn swaps horizontal and vertical pair statistics") {
    const Plane img = texture_image(64, 48, 7);
    const BrisqueVector a = brisque_features(GrayImage(img));
    const BrisqueVector b = brisque_features(GrayImage(rotate90(img)));
    for (int scale = 0; scale < 2; ++scale) {
      const int h = 18 * scale + 2, v = 18 * scale + 6;
      for (int k = 0; k < 4; ++k) {
        CHECK(a(h + k) == doctest::Approx(b(v + k)).epsilon(1e-9));
        CHECK(a(v + k) == doctest::Approx(b(h + k)).epsilon(1e-9));
      }
    }
  }
  SUBCASE("white noise MSCN is near gaussian") {
    const BrisqueVector f = brisque_features(GrayImage(gaussian_noise_image(128, 128, 8)));
    CHECK(f(0) >= 1.7);
    CHECK(f(0) <= 2.3);
  }
  SUBCASE("invariant to a constant offset") {
    const Plane img = texture_image(64, 64, 9);
    const BrisqueVector a = brisque_features(GrayImage(img));
    const BrisqueVector b = brisque_features(GrayImage((img.array() + 0.25).matrix()));
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("BIQI features") {
  SUBCASE("constant image yields finite degenerate values") {
    const BiqiVector f = biqi_features(GrayImage(Plane::Constant(32, 32, 0.8)));
    CHECK(f.allFinite());
    for (int i = 0; i < 9; ++i) CHECK(f(2 * i) == kAlphaMin);
  }
  SUBCASE("contrast doubling scales sigma and keeps alpha") {
    const Plane img = texture_image(64, 64, 10);
    const BiqiVector a = biqi_features(GrayImage(img));
    const BiqiVector b = biqi_features(GrayImage(2.0 * img));
    for (int i = 0; i < 9; ++i) {
      CHECK(b(2 * i) == doctest::Approx(a(2 * i)).epsilon(1e-6));
      CHECK(b(2 * i + 1) == doctest::Approx(2.0 * a(2 * i + 1)).epsilon(1e-12));
    }
  }
  SUBCASE("noise image shapes are strictly interior") {
    const BiqiVector f = biqi_features(GrayImage(noise_image(96, 96, 11)));
    for (int i = 0; i < 9; ++i) {
      CHECK(f(2 * i) > kAlphaMin);
      CHECK(f(2 * i) < kAlphaMax);
    }
  }
}

TEST_CASE("GM-LOG features") {
  SUBCASE("marginals and dependency profiles each sum to one") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const GmlogVector f = gmlog_features(GrayImage(noise_image(40, 56, seed)));
      for (int k = 0; k < 4; ++k) CHECK(f.segment<10>(10 * k).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("constant image puts all mass in bin 0") {
    const GmlogVector f = gmlog_features(GrayImage(Plane::Constant(32, 32, 0.3)));
    CHECK(f(0) == 1.0);
    CHECK(f(10) == 1.0);
    CHECK(f.segment<9>(1).isZero(0.0));
    CHECK(f.segment<9>(11).isZero(0.0));
  }
  SUBCASE("step edge has more mass in the upper GM bins than a flat image") {
    Plane edge = Plane::Constant(64, 64, 0.2);
    edge.rightCols(32).setConstant(0.8);
    const GmlogVector e = gmlog_features(GrayImage(edge));
    const GmlogVector c = gmlog_features(GrayImage(Plane::Constant(64, 64, 0.2)));
    CHECK(e.segment<5>(5).sum() > c.segment<5>(5).sum());
  }
}

TEST_CASE("quality feature vector") {
  const Plane img = texture_image(64, 64, 12);
  const QualityVector a = quality_feature_vector(GrayImage(img)).concat();
  CHECK(a.size() == 94);
  CHECK(a == quality_feature_vector(GrayImage(img)).concat());
  const QualityVector blurred = quality_feature_vector(GrayImage(gaussian_blur(img, 3.0))).concat();
  CHECK((a - blurred).norm() > 0);

  const auto rgb = quality_feature_vector(img, img, img).concat();
  CHECK((rgb - a).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("quality features never produce NaN or Inf") {
  std::mt19937_64 rng(13);
  std::vector<Plane> images = {Plane::Zero(32, 32), Plane::Ones(33, 47), Plane::Constant(40, 40, 0.5),
                               noise_image(32, 32, 1), noise_image(50, 37, 2)};
  Plane impulse = Plane::Zero(45, 45);
  impulse(22, 22) = 1.0;
  images.push_back(impulse);
  Plane saturated = noise_image(64, 64, 3);
  saturated = (saturated.array() > 0.5).select(1.0, saturated);
  images.push_back(saturated);
  Plane binary = noise_image(64, 32, 4);
  binary = (binary.array() > 0.5).cast<double>();
  images.push_back(binary);
  for (int i = 0; i < 10; ++i) images.push_back(texture_image(32 + 7 * i, 64 - 3 * i, 20 + i));
  for (const auto& img : images) CHECK(quality_feature_vector(GrayImage(img)).concat().allFinite());
}

TEST_CASE("gray images enforce their invariants") {
  CHECK_THROWS_AS(GrayImage(Plane::Zero(31, 64)), Error);
  CHECK_THROWS_AS(GrayImage(Plane::Constant(32, 32, 1.5)), Error);
  Plane nan = Plane::Zero(32, 32);
  nan(3, 3) = std::nan("");
  CHECK_THROWS_AS(GrayImage{nan}, Error);
}
