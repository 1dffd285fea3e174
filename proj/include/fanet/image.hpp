#ifndef FANET_IMAGE_HPP
#define FANET_IMAGE_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <string>

namespace fanet {

/// Single-channel image; row index is y, column index is x.
using Plane = Eigen::MatrixXd;

/// Luminance image accepted by the quality features: at least 32x32, every pixel
/// finite and inside [0, 1].
class GrayImage {
 public:
  static constexpr Eigen::Index kMinSide = 32;

  explicit GrayImage(Plane pixels);

  const Plane& pixels() const { return pixels_; }
  Eigen::Index width() const { return pixels_.cols(); }
  Eigen::Index height() const { return pixels_.rows(); }

 private:
  Plane pixels_;
};

/// Normalized 1-D Gaussian taps of length 2*radius+1.
Eigen::VectorXd gaussian_kernel(double sigma, int radius);

/// Half-sample symmetric index reflection (d c b a | a b c d | d c b a).
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n);

/// Correlates rows with `horizontal` and columns with `vertical`, symmetric borders.
Plane filter_separable(const Plane& src, const Eigen::VectorXd& horizontal,
                       const Eigen::VectorXd& vertical);

/// Full 2-D correlation with an odd-sized kernel, symmetric borders.
Plane correlate(const Plane& src, const Eigen::MatrixXd& kernel);

/// Gaussian blur with radius ceil(3 sigma); sigma == 0 returns the input unchanged.
Plane gaussian_blur(const Plane& src, double sigma);

/// Bilinear resample to rows x cols (pixel-center aligned).
Plane resize_bilinear(const Plane& src, Eigen::Index rows, Eigen::Index cols);

/// 2x2 box average; a trailing odd row/column is dropped.
Plane downsample2(const Plane& src);

/// Counter-clockwise quarter turn.
Plane rotate90(const Plane& src);

/// ITU-R BT.601 luma.
Plane luma(const Plane& r, const Plane& g, const Plane& b);

/// Rounds to the 8-bit grid and back, i.e. what a PGM round trip yields.
Plane quantize8(const Plane& src);

/// Reads binary PGM (P5) or PPM (P6, converted to luma), 8-bit, scaled to [0, 1].
Plane read_pnm(const std::filesystem::path& path);

/// Writes binary 8-bit PGM after clamping to [0, 1].
void write_pgm(const std::filesystem::path& path, const Plane& img);

}  // namespace fanet

#endif  // FANET_IMAGE_HPP
