#include "fanet/synth.hpp"

#include "fanet/error.hpp"
#include "fanet/nn/checkpoint.hpp"
#include "fanet/text_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

namespace fanet::synth {

using Eigen::Index;

namespace {

constexpr const char* kManifestHeader =
    "id\tlabel\tgenuine\tbackground\tgroup\tblur\talpha\th00\th01\th02\th10\th11\th12\th20\th21\th22\t"
    "crop_x\tcrop_y\tcrop_w\tcrop_h\tcrop_enabled\tseed\tdegrade_blur\tdegrade_noise";
constexpr std::size_t kManifestColumns = 24;

double uniform(std::mt19937_64& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

bool full_frame(const CropRect& c) { return c.width == 0 || c.height == 0; }

// Bilinear lookup; nullopt-style flag when (sx, sy) falls outside the plane.
bool sample(const Plane& p, double sx, double sy, double& out) {
  const double maxx = static_cast<double>(p.cols() - 1), maxy = static_cast<double>(p.rows() - 1);
  if (!(sx >= 0.0 && sy >= 0.0 && sx <= maxx && sy <= maxy)) return false;
  const auto x0 = static_cast<Index>(std::floor(sx)), y0 = static_cast<Index>(std::floor(sy));
  const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
  const Index x1 = fx > 0 ? x0 + 1 : x0, y1 = fy > 0 ? y0 + 1 : y0;
  if (fx == 0 && fy == 0) {
    out = p(y0, x0);
    return true;
  }
  const double top = (1 - fx) * p(y0, x0) + fx * p(y0, x1);
  const double bottom = (1 - fx) * p(y1, x0) + fx * p(y1, x1);
  out = (1 - fy) * top + fy * bottom;
  return true;
}

Plane fit_to(const Plane& img, Index rows, Index cols) {
  return img.rows() == rows && img.cols() == cols ? img : resize_bilinear(img, rows, cols);
}

Plane white_noise(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Plane p(rows, cols);
  for (Index x = 0; x < cols; ++x)
    for (Index y = 0; y < rows; ++y) p(y, x) = n(rng);
  return p;
}

Plane rescale(const Plane& p, double lo, double hi) {
  const double mn = p.minCoeff(), mx = p.maxCoeff();
  if (mx - mn < 1e-12) return Plane::Constant(p.rows(), p.cols(), 0.5 * (lo + hi));
  return ((p.array() - mn) / (mx - mn) * (hi - lo) + lo).matrix();
}

std::string field(const std::string& s) { return nn::percent_encode(s); }

}  // namespace

void validate(const SynthParams& p, Index rows, Index cols) {
  require(std::isfinite(p.blur_sigma) && p.blur_sigma >= 0, ErrorKind::InvalidInput,
          "rejected params: blur sigma must be finite and nonnegative");
  require(p.blend_alpha >= 0 && p.blend_alpha <= 1, ErrorKind::InvalidInput,
          "rejected params: blend alpha must lie in [0, 1]");
  require(p.homography.allFinite() && std::abs(p.homography.determinant()) > 1e-9, ErrorKind::InvalidInput,
          "rejected params: degenerate homography");
  if (p.crop_enabled && !full_frame(p.crop))
    require(p.crop.x >= 0 && p.crop.y >= 0 && p.crop.width > 0 && p.crop.height > 0 &&
                p.crop.x + p.crop.width <= cols && p.crop.y + p.crop.height <= rows,
            ErrorKind::InvalidInput, "rejected params: crop rectangle outside the image");
}

Plane synthesize_spoof(const Plane& genuine, const Plane& background, const SynthParams& p) {
  const Index rows = genuine.rows(), cols = genuine.cols();
  require(rows > 1 && cols > 1 && background.size() > 0, ErrorKind::InvalidInput, "empty synthesis input");
  validate(p, rows, cols);
  const Plane bg = fit_to(background, rows, cols);
  const Plane blurred = gaussian_blur(genuine, p.blur_sigma);
  const Plane blended = p.blend_alpha * blurred + (1.0 - p.blend_alpha) * bg;

  const Eigen::Matrix3d inv = p.homography.inverse();
  Plane warped(rows, cols);
  for (Index x = 0; x < cols; ++x)
    for (Index y = 0; y < rows; ++y) {
      const Eigen::Vector3d s = inv * Eigen::Vector3d(static_cast<double>(x), static_cast<double>(y), 1.0);
      double v = 0;
      warped(y, x) = std::abs(s(2)) > 1e-12 && sample(blended, s(0) / s(2), s(1) / s(2), v) ? v : bg(y, x);
    }
  if (!p.crop_enabled || full_frame(p.crop)) return warped;
  return warped.block(p.crop.y, p.crop.x, p.crop.height, p.crop.width);
}

Plane degrade(const Plane& img, const Degradation& d, std::uint64_t seed) {
  require(d.blur_sigma >= 0 && d.noise_sigma >= 0, ErrorKind::InvalidInput,
          "degradation strengths must be nonnegative");
  Plane out = gaussian_blur(img, d.blur_sigma);
  if (d.noise_sigma > 0) {
    std::mt19937_64 rng(seed);
    out += d.noise_sigma * white_noise(out.rows(), out.cols(), rng);
  }
  return out.array().max(0.0).min(1.0).matrix();
}

Eigen::Matrix3d homography_from_corners(Index rows, Index cols, const Eigen::Matrix<double, 4, 2>& corners) {
  const double w = static_cast<double>(cols - 1), h = static_cast<double>(rows - 1);
  const Eigen::Matrix<double, 4, 2> src = (Eigen::Matrix<double, 4, 2>() << 0, 0, w, 0, w, h, 0, h).finished();
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src(i, 0), y = src(i, 1), u = corners(i, 0), v = corners(i, 1);
    a.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h8 = a.fullPivLu().solve(b);
  Eigen::Matrix3d hm;
  hm << h8(0), h8(1), h8(2), h8(3), h8(4), h8(5), h8(6), h8(7), 1.0;
  return hm;
}

void SynthRanges::validate() const {
  for (const Range& r : {blur_sigma, blend_alpha, crop_fraction})
    require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi, ErrorKind::InvalidInput,
            "rejected ranges: empty or non-finite range");
  require(blur_sigma.lo >= 0, ErrorKind::InvalidInput, "rejected ranges: negative blur");
  require(blend_alpha.lo >= 0 && blend_alpha.hi <= 1, ErrorKind::InvalidInput, "rejected ranges: alpha outside [0, 1]");
  require(corner_jitter >= 0 && corner_jitter < 0.25, ErrorKind::InvalidInput,
          "rejected ranges: corner jitter must lie in [0, 0.25)");
  require(crop_fraction.lo > 0 && crop_fraction.hi <= 1, ErrorKind::InvalidInput,
          "rejected ranges: crop fraction outside (0, 1]");
}

SynthParams sample_params(std::mt19937_64& rng, const SynthRanges& ranges, Index rows, Index cols) {
  ranges.validate();
  require(rows > 1 && cols > 1, ErrorKind::InvalidInput, "image too small for parameter sampling");
  SynthParams p;
  p.blur_sigma = uniform(rng, ranges.blur_sigma);
  p.blend_alpha = uniform(rng, ranges.blend_alpha);
  const double w = static_cast<double>(cols - 1), h = static_cast<double>(rows - 1);
  Eigen::Matrix<double, 4, 2> corners;
  corners << 0, 0, w, 0, w, h, 0, h;
  const Range jx{-ranges.corner_jitter * w, ranges.corner_jitter * w};
  const Range jy{-ranges.corner_jitter * h, ranges.corner_jitter * h};
  for (int i = 0; i < 4; ++i) {
    corners(i, 0) += uniform(rng, jx);
    corners(i, 1) += uniform(rng, jy);
  }
  p.homography = homography_from_corners(rows, cols, corners);
  const double f = uniform(rng, ranges.crop_fraction);
  p.crop.width = std::clamp<Index>(std::llround(f * static_cast<double>(cols)), 1, cols);
  p.crop.height = std::clamp<Index>(std::llround(f * static_cast<double>(rows)), 1, rows);
  p.crop.x = std::uniform_int_distribution<Index>(0, cols - p.crop.width)(rng);
  p.crop.y = std::uniform_int_distribution<Index>(0, rows - p.crop.height)(rng);
  p.seed = rng();
  return p;
}

std::vector<NamedImage> tile(const NamedImage& img, Index size) {
  require(size > 0, ErrorKind::InvalidInput, "patch size must be positive");
  require(img.pixels.rows() >= size && img.pixels.cols() >= size, ErrorKind::InvalidInput,
          "image '" + img.id + "' is smaller than one patch");
  std::vector<NamedImage> out;
  for (Index r = 0; r + size <= img.pixels.rows(); r += size)
    for (Index c = 0; c + size <= img.pixels.cols(); c += size)
      out.push_back({img.id + "#" + std::to_string(r / size) + "_" + std::to_string(c / size),
                     img.pixels.block(r, c, size, size)});
  return out;
}

Corpus build_corpus(const std::vector<NamedImage>& genuine, const std::vector<NamedImage>& backgrounds,
                    const CorpusConfig& cfg) {
  require(!genuine.empty(), ErrorKind::InvalidInput, "corpus needs at least one genuine image");
  require(!backgrounds.empty(), ErrorKind::InvalidInput, "corpus needs at least one background image");
  require(cfg.n_spoof > 0, ErrorKind::InvalidInput, "rejected: n_spoof must be positive");
  require(cfg.degrade_fraction >= 0 && cfg.degrade_fraction <= 1, ErrorKind::InvalidInput,
          "degrade fraction must lie in [0, 1]");
  require(cfg.degrade_fraction == 0 || !cfg.degrade_levels.empty(), ErrorKind::InvalidInput,
          "degrade fraction set without degrade levels");
  cfg.ranges.validate();

  std::vector<NamedImage> gsrc, bsrc;
  std::map<std::string, std::string> parent;
  for (const auto& g : genuine) {
    if (!cfg.patch_mode) {
      gsrc.push_back(g);
      continue;
    }
    for (auto& t : tile(g, cfg.patch_size)) {
      parent[t.id] = g.id;
      gsrc.push_back(std::move(t));
    }
  }
  for (const auto& b : backgrounds) {
    if (!cfg.patch_mode) {
      bsrc.push_back(b);
      continue;
    }
    for (auto& t : tile(b, cfg.patch_size)) bsrc.push_back(std::move(t));
  }
  std::map<std::string, Plane> gmap, bmap;
  for (const auto& g : gsrc) require(gmap.emplace(g.id, g.pixels).second, ErrorKind::InvalidInput, "duplicate genuine id '" + g.id + "'");
  for (const auto& b : bsrc) require(bmap.emplace(b.id, b.pixels).second, ErrorKind::InvalidInput, "duplicate background id '" + b.id + "'");

  std::mt19937_64 rng(cfg.seed);
  Corpus corpus;
  char id[32];
  for (std::size_t i = 0; i < gsrc.size(); ++i) {
    CorpusEntry e;
    std::snprintf(id, sizeof id, "g%05zu", i);
    e.id = id;
    e.label = 1;
    e.genuine_id = gsrc[i].id;
    if (cfg.patch_mode) e.group = "genuine:" + parent[gsrc[i].id];
    e.params.crop_enabled = cfg.crop;
    e.params.seed = rng();
    corpus.entries.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < cfg.n_spoof; ++i) {
    CorpusEntry e;
    std::snprintf(id, sizeof id, "s%05zu", i);
    e.id = id;
    e.label = 0;
    const auto& g = gsrc[std::uniform_int_distribution<std::size_t>(0, gsrc.size() - 1)(rng)];
    e.genuine_id = g.id;
    e.background_id = bsrc[std::uniform_int_distribution<std::size_t>(0, bsrc.size() - 1)(rng)].id;
    if (cfg.patch_mode) e.group = "spoof:" + parent[g.id];
    e.params = sample_params(rng, cfg.ranges, g.pixels.rows(), g.pixels.cols());
    e.params.crop_enabled = cfg.crop;
    corpus.entries.push_back(std::move(e));
  }

  const std::size_t total = corpus.entries.size();
  const auto k = static_cast<std::size_t>(std::llround(cfg.degrade_fraction * static_cast<double>(total)));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t j = 0; j < k; ++j) {
    const auto level = std::uniform_int_distribution<std::size_t>(0, cfg.degrade_levels.size() - 1)(rng);
    corpus.entries[order[j]].degradation = cfg.degrade_levels[level];
  }

  for (const auto& e : corpus.entries) corpus.images.push_back(render(e, gmap, bmap));
  return corpus;
}

Plane render(const CorpusEntry& e, const std::map<std::string, Plane>& genuine,
             const std::map<std::string, Plane>& backgrounds) {
  const auto g = genuine.find(e.genuine_id);
  require(g != genuine.end(), ErrorKind::Dependency, "sample " + e.id + ": unknown genuine source '" + e.genuine_id + "'");
  Plane img;
  if (e.label == 1) {
    img = g->second;
  } else {
    const auto b = backgrounds.find(e.background_id);
    require(b != backgrounds.end(), ErrorKind::Dependency,
            "sample " + e.id + ": unknown background source '" + e.background_id + "'");
    img = synthesize_spoof(g->second, b->second, e.params);
  }
  if (e.degradation.active()) img = degrade(img, e.degradation, e.params.seed ^ 0xd6e8feb86659fd93ULL);
  return img;
}

std::string manifest_text(const std::vector<CorpusEntry>& entries) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& e : entries) {
    const auto& p = e.params;
    out << field(e.id) << '\t' << e.label << '\t' << field(e.genuine_id) << '\t' << field(e.background_id) << '\t'
        << field(e.group) << '\t' << format_double(p.blur_sigma) << '\t' << format_double(p.blend_alpha);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << '\t' << format_double(p.homography(r, c));
    out << '\t' << p.crop.x << '\t' << p.crop.y << '\t' << p.crop.width << '\t' << p.crop.height << '\t'
        << (p.crop_enabled ? 1 : 0) << '\t' << p.seed << '\t' << format_double(e.degradation.blur_sigma) << '\t'
        << format_double(e.degradation.noise_sigma) << '\n';
  }
  return out.str();
}

std::vector<CorpusEntry> parse_manifest(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  require(std::getline(in, line) && line == kManifestHeader, ErrorKind::Format,
          name + ": missing or unexpected manifest header");
  std::vector<CorpusEntry> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto c = split(line, '\t');
    require(c.size() == kManifestColumns, ErrorKind::Format,
            where + ": expected " + std::to_string(kManifestColumns) + " columns, got " + std::to_string(c.size()));
    CorpusEntry e;
    e.id = nn::percent_decode(c[0]);
    e.label = static_cast<int>(parse_integer(c[1], where));
    require(e.label == 0 || e.label == 1, ErrorKind::Format, where + ": label must be 0 or 1");
    e.genuine_id = nn::percent_decode(c[2]);
    e.background_id = nn::percent_decode(c[3]);
    e.group = nn::percent_decode(c[4]);
    e.params.blur_sigma = parse_double(c[5], where);
    e.params.blend_alpha = parse_double(c[6], where);
    for (int k = 0; k < 9; ++k) e.params.homography(k / 3, k % 3) = parse_double(c[7 + static_cast<std::size_t>(k)], where);
    e.params.crop = {parse_integer(c[16], where), parse_integer(c[17], where), parse_integer(c[18], where),
                     parse_integer(c[19], where)};
    e.params.crop_enabled = parse_integer(c[20], where) != 0;
    std::uint64_t seed = 0;
    std::istringstream(c[21]) >> seed;
    require(std::to_string(seed) == c[21], ErrorKind::Format, where + ": bad seed '" + c[21] + "'");
    e.params.seed = seed;
    e.degradation = {parse_double(c[22], where), parse_double(c[23], where)};
    out.push_back(std::move(e));
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  require(corpus.entries.size() == corpus.images.size(), ErrorKind::InvalidInput, "corpus entries and images differ in count");
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < corpus.entries.size(); ++i)
    write_pgm(dir / "images" / (corpus.entries[i].id + ".pgm"), corpus.images[i]);
  write_file_atomic(dir / "manifest.tsv", manifest_text(corpus.entries));
}

Corpus read_corpus(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.tsv";
  require(std::filesystem::exists(manifest), ErrorKind::Dependency, "missing corpus manifest " + manifest.string());
  Corpus c;
  c.entries = parse_manifest(read_file(manifest), manifest.string());
  for (const auto& e : c.entries) {
    const auto path = dir / "images" / (e.id + ".pgm");
    require(std::filesystem::exists(path), ErrorKind::Dependency, "missing corpus image " + path.string());
    c.images.push_back(read_pnm(path));
  }
  return c;
}

Plane procedural_genuine(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Plane img(rows, cols);
  const double gx = u(rng) - 0.5, gy = u(rng) - 0.5;
  for (Index x = 0; x < cols; ++x)
    for (Index y = 0; y < rows; ++y)
      img(y, x) = gx * static_cast<double>(x) / static_cast<double>(cols) + gy * static_cast<double>(y) / static_cast<double>(rows);
  const int blobs = 4 + static_cast<int>(u(rng) * 6);
  for (int b = 0; b < blobs; ++b) {
    const double cx = u(rng) * static_cast<double>(cols), cy = u(rng) * static_cast<double>(rows);
    const double r = (0.08 + 0.25 * u(rng)) * static_cast<double>(std::min(rows, cols));
    const double amp = 1.6 * (u(rng) - 0.5);
    for (Index x = 0; x < cols; ++x)
      for (Index y = 0; y < rows; ++y) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        img(y, x) += amp / (1.0 + std::exp((std::sqrt(dx * dx + dy * dy) - r) / 1.5));
      }
  }
  const std::array<std::array<double, 2>, 3> octaves = {{{4.0, 0.5}, {1.5, 0.3}, {0.6, 0.12}}};
  for (const auto& [sigma, weight] : octaves) img += weight * gaussian_blur(white_noise(rows, cols, rng), sigma);
  return rescale(img, 0.05, 0.95);
}

Plane procedural_background(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double theta = u(rng) * std::numbers::pi, freq = 0.05 + 0.25 * u(rng), phase = u(rng) * 6.28;
  Plane img(rows, cols);
  for (Index x = 0; x < cols; ++x)
    for (Index y = 0; y < rows; ++y) {
      const double t = std::cos(theta) * static_cast<double>(x) + std::sin(theta) * static_cast<double>(y);
      img(y, x) = 0.5 * std::sin(freq * t + phase);
    }
  img += 3.0 * gaussian_blur(white_noise(rows, cols, rng), 6.0);
  return rescale(img, 0.1, 0.9);
}

}  // namespace fanet::synth
