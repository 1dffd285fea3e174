#ifndef FANET_SYNTH_HPP
#define FANET_SYNTH_HPP

#include "fanet/image.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace fanet::synth {

struct CropRect {
  Eigen::Index x = 0, y = 0, width = 0, height = 0;
};

/// Recapture simulation: blur, blend onto the background, warp, crop.
/// The homography maps blended-image pixel coordinates (x, y, 1) to output
/// coordinates. A crop with zero width or height means the full frame.
struct SynthParams {
  double blur_sigma = 0.0;
  double blend_alpha = 1.0;
  Eigen::Matrix3d homography = Eigen::Matrix3d::Identity();
  CropRect crop;
  bool crop_enabled = true;
  std::uint64_t seed = 0;
};

/// Post-capture quality loss applied to any sample: blur, then additive
/// Gaussian noise (seeded), then clipping to [0, 1].
struct Degradation {
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;

  bool active() const { return blur_sigma > 0 || noise_sigma > 0; }
};

void validate(const SynthParams& p, Eigen::Index rows, Eigen::Index cols);

Plane synthesize_spoof(const Plane& genuine, const Plane& background, const SynthParams& p);

Plane degrade(const Plane& img, const Degradation& d, std::uint64_t seed);

/// Maps the four source corners onto `corners` (x, y per row, clockwise from top-left).
Eigen::Matrix3d homography_from_corners(Eigen::Index rows, Eigen::Index cols,
                                        const Eigen::Matrix<double, 4, 2>& corners);

struct Range {
  double lo, hi;
};

struct SynthRanges {
  Range blur_sigma{0.5, 3.0};
  Range blend_alpha{0.85, 1.0};
  double corner_jitter = 0.08;  // fraction of the side
  Range crop_fraction{0.70, 0.95};

  void validate() const;
};

/// Uniform draws inside `ranges` for an image of the given size.
SynthParams sample_params(std::mt19937_64& rng, const SynthRanges& ranges, Eigen::Index rows,
                          Eigen::Index cols);

struct NamedImage {
  std::string id;
  Plane pixels;
};

/// Non-overlapping size x size tiles, row-major; ids are "<id>#<row>_<col>".
std::vector<NamedImage> tile(const NamedImage& img, Eigen::Index size);

struct CorpusConfig {
  std::size_t n_spoof = 100;
  bool patch_mode = false;
  Eigen::Index patch_size = 128;
  SynthRanges ranges;
  bool crop = true;
  double degrade_fraction = 0.0;
  std::vector<Degradation> degrade_levels = {{1.0, 0.01}, {2.0, 0.02}, {4.0, 0.04}};
  std::uint64_t seed = 1;
};

struct CorpusEntry {
  std::string id;
  int label = 1;  // 1 genuine, 0 spoof
  std::string genuine_id;
  std::string background_id;  // empty for genuine samples
  std::string group;          // source image in patch mode, otherwise empty
  SynthParams params;
  Degradation degradation;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  std::vector<Plane> images;  // aligned with entries
};

/// Genuine samples first (every input image or tile), then n_spoof spoofs with
/// random genuine/background sources. Exactly round(degrade_fraction * total)
/// samples get one of the degrade levels.
Corpus build_corpus(const std::vector<NamedImage>& genuine, const std::vector<NamedImage>& backgrounds,
                    const CorpusConfig& cfg);

/// Recomputes one sample from its entry and the (tiled) sources.
Plane render(const CorpusEntry& e, const std::map<std::string, Plane>& genuine,
             const std::map<std::string, Plane>& backgrounds);

/// Tab-separated manifest with a header line; doubles in shortest round-trip form.
std::string manifest_text(const std::vector<CorpusEntry>& entries);
std::vector<CorpusEntry> parse_manifest(const std::string& text, const std::string& name);

/// Writes images/<id>.pgm and manifest.tsv under `dir`.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
/// Reads manifest.tsv and the images it lists.
Corpus read_corpus(const std::filesystem::path& dir);

/// Smooth shading, soft blobs and fine texture; stands in for a captured photo.
Plane procedural_genuine(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);
/// Stripes and low-frequency clutter; stands in for a display or print surround.
Plane procedural_background(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

}  // namespace fanet::synth

#endif  // FANET_SYNTH_HPP
