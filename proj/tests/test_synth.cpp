#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fanet/error.hpp"
#include "fanet/synth.hpp"
#include "fanet/text_io.hpp"

#include <filesystem>

using namespace fanet;
using namespace fanet::synth;

namespace {

double laplacian_energy(const Plane& p) {
  double e = 0;
  for (Eigen::Index x = 1; x + 1 < p.cols(); ++x)
    for (Eigen::Index y = 1; y + 1 < p.rows(); ++y) {
      const double l = p(y - 1, x) + p(y + 1, x) + p(y, x - 1) + p(y, x + 1) - 4 * p(y, x);
      e += l * l;
    }
  return e;
}

SynthParams identity_params() { return {}; }

std::vector<NamedImage> sources(const std::string& prefix, int n, Eigen::Index side, bool genuine) {
  std::vector<NamedImage> out;
  for (int i = 0; i < n; ++i)
    out.push_back({prefix + std::to_string(i), genuine ? procedural_genuine(side, side, 100 + i)
                                                       : procedural_background(side, side, 200 + i)});
  return out;
}

}  // namespace

TEST_CASE("identity pipeline reproduces the input bit-exactly") {
  const Plane g = procedural_genuine(64, 48, 1), b = procedural_background(64, 48, 2);
  const Plane out = synthesize_spoof(g, b, identity_params());
  REQUIRE(out.rows() == 64);
  REQUIRE(out.cols() == 48);
  CHECK((out.array() == g.array()).all());
}

TEST_CASE("blur lowers Laplacian energy") {
  const Plane g = procedural_genuine(64, 64, 3), b = procedural_background(64, 64, 4);
  SynthParams p;
  p.blur_sigma = 3;
  CHECK(laplacian_energy(synthesize_spoof(g, b, p)) < laplacian_energy(g));
}

TEST_CASE("alpha zero leaves the warped and cropped background") {
  const Plane g = procedural_genuine(64, 64, 5), b = procedural_background(64, 64, 6);
  std::mt19937_64 rng(7);
  SynthParams p = sample_params(rng, {}, 64, 64);
  p.blend_alpha = 0;
  const Plane out = synthesize_spoof(g, b, p);
  SynthParams bg_only = p;
  bg_only.blur_sigma = 0;
  const Plane expect = synthesize_spoof(b, b, bg_only);
  CHECK((out - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("warp samples bilinearly and fills from the background") {
  Plane g(32, 32), b = Plane::Constant(32, 32, 0.25);
  for (Eigen::Index x = 0; x < 32; ++x) g.col(x).setConstant(static_cast<double>(x) / 31.0);
  SynthParams p;
  p.homography(0, 2) = 0.5;  // shift right by half a pixel
  const Plane out = synthesize_spoof(g, b, p);
  CHECK(out(3, 0) == 0.25);
  CHECK(std::abs(out(3, 10) - 9.5 / 31.0) <= 1e-12);
}

TEST_CASE("degenerate homography is rejected") {
  const Plane g = procedural_genuine(32, 32, 8);
  SynthParams p;
  p.homography.setZero();
  CHECK_THROWS_AS(synthesize_spoof(g, g, p), Error);
  p.homography = Eigen::Matrix3d::Identity();
  p.homography.row(1) = p.homography.row(0);
  CHECK_THROWS_AS(synthesize_spoof(g, g, p), Error);
}

TEST_CASE("crop outside the frame is rejected") {
  const Plane g = procedural_genuine(32, 32, 9);
  SynthParams p;
  p.crop = {10, 10, 30, 5};
  CHECK_THROWS_AS(synthesize_spoof(g, g, p), Error);
  p.crop_enabled = false;
  CHECK(synthesize_spoof(g, g, p).cols() == 32);
}

TEST_CASE("homography from corners maps the corners") {
  Eigen::Matrix<double, 4, 2> c;
  c << 2, 1, 60, 3, 58, 40, 1, 44;
  const Eigen::Matrix3d h = homography_from_corners(45, 63, c);
  const Eigen::Matrix<double, 4, 2> src = (Eigen::Matrix<double, 4, 2>() << 0, 0, 62, 0, 62, 44, 0, 44).finished();
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d q = h * Eigen::Vector3d(src(i, 0), src(i, 1), 1);
    CHECK(std::abs(q(0) / q(2) - c(i, 0)) <= 1e-9);
    CHECK(std::abs(q(1) / q(2) - c(i, 1)) <= 1e-9);
  }
}

TEST_CASE("sample_params is seeded and stays in range") {
  std::mt19937_64 a(11), b(11), c(12);
  const SynthParams pa = sample_params(a, {}, 100, 80), pb = sample_params(b, {}, 100, 80);
  const SynthParams pc = sample_params(c, {}, 100, 80);
  CHECK(pa.blur_sigma == pb.blur_sigma);
  CHECK(pa.homography == pb.homography);
  CHECK(pa.seed == pb.seed);
  CHECK(pa.blur_sigma != pc.blur_sigma);

  std::mt19937_64 rng(13);
  const SynthRanges r;
  for (int i = 0; i < 10000; ++i) {
    const SynthParams p = sample_params(rng, r, 100, 80);
    CHECK_MESSAGE(p.blur_sigma >= 0.5, i);
    CHECK_MESSAGE(p.blur_sigma <= 3.0, i);
    CHECK_MESSAGE(p.blend_alpha >= 0.85, i);
    CHECK_MESSAGE(p.blend_alpha <= 1.0, i);
    CHECK_MESSAGE(p.crop.width >= std::llround(0.70 * 80), i);
    CHECK_MESSAGE(p.crop.width <= std::llround(0.95 * 80), i);
    CHECK_MESSAGE(p.crop.x + p.crop.width <= 80, i);
    CHECK_MESSAGE(p.crop.y + p.crop.height <= 100, i);
    const Eigen::Vector3d tl = p.homography * Eigen::Vector3d(0, 0, 1);
    CHECK_MESSAGE(std::abs(tl(0) / tl(2)) <= 0.08 * 79 + 1e-9, i);
    CHECK_MESSAGE(std::abs(tl(1) / tl(2)) <= 0.08 * 99 + 1e-9, i);
  }
}

TEST_CASE("empty ranges are rejected") {
  std::mt19937_64 rng(1);
  SynthRanges r;
  r.blur_sigma = {2.0, 1.0};
  CHECK_THROWS_AS(sample_params(rng, r, 32, 32), Error);
}

TEST_CASE("corpus holds exactly the requested spoofs") {
  CorpusConfig cfg;
  cfg.n_spoof = 100;
  const Corpus c = build_corpus(sources("g", 3, 40, true), sources("b", 2, 40, false), cfg);
  std::size_t spoof = 0, genuine = 0;
  for (const auto& e : c.entries) (e.label == 0 ? spoof : genuine)++;
  CHECK(spoof == 100);
  CHECK(genuine == 3);
  CHECK(c.images.size() == c.entries.size());
}

TEST_CASE("patch mode tiles 512x512 into sixteen 128x128 patches") {
  const NamedImage big{"big", procedural_genuine(512, 512, 17)};
  CHECK(tile(big, 128).size() == 16);
  CorpusConfig cfg;
  cfg.n_spoof = 5;
  cfg.patch_mode = true;
  cfg.patch_size = 128;
  const Corpus c = build_corpus({big}, {{"bg", procedural_background(256, 256, 18)}}, cfg);
  std::size_t genuine = 0;
  for (const auto& e : c.entries)
    if (e.label == 1) {
      ++genuine;
      CHECK(e.group == "genuine:big");
    }
  CHECK(genuine == 16);
}

TEST_CASE("corpus rebuild with the same seed gives the same manifest and images") {
  CorpusConfig cfg;
  cfg.n_spoof = 20;
  cfg.degrade_fraction = 0.3;
  const auto g = sources("g", 4, 48, true), b = sources("b", 2, 48, false);
  const Corpus c1 = build_corpus(g, b, cfg), c2 = build_corpus(g, b, cfg);
  CHECK(manifest_text(c1.entries) == manifest_text(c2.entries));
  for (std::size_t i = 0; i < c1.images.size(); ++i) CHECK((c1.images[i].array() == c2.images[i].array()).all());
  std::size_t degraded = 0;
  for (const auto& e : c1.entries) degraded += e.degradation.active();
  CHECK(degraded == 7);  // round(0.3 * 24)
  cfg.seed = 2;
  CHECK(manifest_text(build_corpus(g, b, cfg).entries) != manifest_text(c1.entries));
}

TEST_CASE("every manifest entry re-synthesizes bit-identically") {
  CorpusConfig cfg;
  cfg.n_spoof = 15;
  cfg.degrade_fraction = 0.5;
  const auto g = sources("g", 3, 48, true), b = sources("b", 2, 48, false);
  const Corpus c = build_corpus(g, b, cfg);
  const auto entries = parse_manifest(manifest_text(c.entries), "manifest");
  std::map<std::string, Plane> gm, bm;
  for (const auto& s : g) gm[s.id] = s.pixels;
  for (const auto& s : b) bm[s.id] = s.pixels;
  REQUIRE(entries.size() == c.entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    CHECK((render(entries[i], gm, bm).array() == c.images[i].array()).all());
}

TEST_CASE("corpus on disk round-trips through 8-bit images") {
  CorpusConfig cfg;
  cfg.n_spoof = 4;
  const Corpus c = build_corpus(sources("g", 2, 40, true), sources("b", 1, 40, false), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "fanet_test_corpus";
  std::filesystem::remove_all(dir);
  write_corpus(dir, c);
  const Corpus back = read_corpus(dir);
  CHECK(manifest_text(back.entries) == manifest_text(c.entries));
  for (std::size_t i = 0; i < c.images.size(); ++i)
    CHECK((back.images[i].array() == quantize8(c.images[i]).array()).all());
  std::filesystem::remove_all(dir);
}

TEST_CASE("zero spoofs and missing sources are rejected") {
  CorpusConfig cfg;
  cfg.n_spoof = 0;
  CHECK_THROWS_AS(build_corpus(sources("g", 1, 40, true), sources("b", 1, 40, false), cfg), Error);
  cfg.n_spoof = 1;
  CHECK_THROWS_AS(build_corpus({}, sources("b", 1, 40, false), cfg), Error);
  CHECK_THROWS_AS(build_corpus(sources("g", 1, 40, true), {}, cfg), Error);
}

TEST_CASE("degradation is seeded and clipped") {
  const Plane g = procedural_genuine(40, 40, 30);
  const Plane a = degrade(g, {2.0, 0.3}, 5), b = degrade(g, {2.0, 0.3}, 5), c = degrade(g, {2.0, 0.3}, 6);
  CHECK((a.array() == b.array()).all());
  CHECK((a.array() != c.array()).any());
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);
  CHECK((degrade(g, {}, 1).array() == g.array()).all());
}
