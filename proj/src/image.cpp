#include "fanet/image.hpp"

#include "fanet/error.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <vector>

namespace fanet {

using Eigen::Index;

GrayImage::GrayImage(Plane pixels) : pixels_(std::move(pixels)) {
  require(pixels_.rows() >= kMinSide && pixels_.cols() >= kMinSide, ErrorKind::InvalidInput,
          "gray image must be at least 32x32, got " + std::to_string(pixels_.cols()) + "x" +
              std::to_string(pixels_.rows()));
  require(pixels_.allFinite(), ErrorKind::InvalidInput, "gray image has non-finite pixels");
  require(pixels_.minCoeff() >= 0.0 && pixels_.maxCoeff() <= 1.0, ErrorKind::InvalidInput,
          "gray image pixels must lie in [0, 1]");
}

Eigen::VectorXd gaussian_kernel(double sigma, int radius) {
  require(sigma > 0 && radius >= 0, ErrorKind::InvalidInput, "gaussian kernel needs sigma > 0");
  Eigen::VectorXd k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k(i + radius) = std::exp(-0.5 * i * i / (sigma * sigma));
  return k / k.sum();
}

Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Plane filter_separable(const Plane& src, const Eigen::VectorXd& horizontal,
                       const Eigen::VectorXd& vertical) {
  const Index rows = src.rows(), cols = src.cols();
  const Index rh = horizontal.size() / 2, rv = vertical.size() / 2;
  Plane tmp(rows, cols);
  for (Index x = 0; x < cols; ++x) {
    for (Index y = 0; y < rows; ++y) {
      double acc = 0.0;
      for (Index t = -rh; t <= rh; ++t) acc += horizontal(t + rh) * src(y, reflect_index(x + t, cols));
      tmp(y, x) = acc;
    }
  }
  Plane out(rows, cols);
  for (Index x = 0; x < cols; ++x) {
    for (Index y = 0; y < rows; ++y) {
      double acc = 0.0;
      for (Index t = -rv; t <= rv; ++t) acc += vertical(t + rv) * tmp(reflect_index(y + t, rows), x);
      out(y, x) = acc;
    }
  }
  return out;
}

Plane correlate(const Plane& src, const Eigen::MatrixXd& kernel) {
  require(kernel.rows() % 2 == 1 && kernel.cols() % 2 == 1, ErrorKind::InvalidInput,
          "correlation kernel must have odd size");
  const Index rows = src.rows(), cols = src.cols();
  const Index ry = kernel.rows() / 2, rx = kernel.cols() / 2;
  Plane out(rows, cols);
  for (Index x = 0; x < cols; ++x) {
    for (Index y = 0; y < rows; ++y) {
      double acc = 0.0;
      for (Index dx = -rx; dx <= rx; ++dx) {
        const Index sx = reflect_index(x + dx, cols);
        for (Index dy = -ry; dy <= ry; ++dy)
          acc += kernel(dy + ry, dx + rx) * src(reflect_index(y + dy, rows), sx);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

Plane gaussian_blur(const Plane& src, double sigma) {
  require(sigma >= 0 && std::isfinite(sigma), ErrorKind::InvalidInput, "blur sigma must be >= 0");
  if (sigma == 0.0) return src;
  const auto k = gaussian_kernel(sigma, static_cast<int>(std::ceil(3.0 * sigma)));
  return filter_separable(src, k, k);
}

Plane resize_bilinear(const Plane& src, Index rows, Index cols) {
  require(rows > 0 && cols > 0 && src.size() > 0, ErrorKind::InvalidInput, "resize to empty plane");
  if (rows == src.rows() && cols == src.cols()) return src;
  Plane out(rows, cols);
  const double sy = static_cast<double>(src.rows()) / rows;
  const double sx = static_cast<double>(src.cols()) / cols;
  for (Index x = 0; x < cols; ++x) {
    const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.cols() - 1));
    const Index x0 = static_cast<Index>(fx);
    const Index x1 = std::min(x0 + 1, src.cols() - 1);
    const double ax = fx - x0;
    for (Index y = 0; y < rows; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.rows() - 1));
      const Index y0 = static_cast<Index>(fy);
      const Index y1 = std::min(y0 + 1, src.rows() - 1);
      const double ay = fy - y0;
      out(y, x) = (1 - ay) * ((1 - ax) * src(y0, x0) + ax * src(y0, x1)) +
                  ay * ((1 - ax) * src(y1, x0) + ax * src(y1, x1));
    }
  }
  return out;
}

Plane downsample2(const Plane& src) {
  const Index rows = src.rows() / 2, cols = src.cols() / 2;
  require(rows > 0 && cols > 0, ErrorKind::InvalidInput, "plane too small to downsample");
  Plane out(rows, cols);
  for (Index x = 0; x < cols; ++x)
    for (Index y = 0; y < rows; ++y)
      out(y, x) = 0.25 * (src(2 * y, 2 * x) + src(2 * y + 1, 2 * x) + src(2 * y, 2 * x + 1) +
                          src(2 * y + 1, 2 * x + 1));
  return out;
}

Plane rotate90(const Plane& src) {
  Plane out(src.cols(), src.rows());
  for (Index y = 0; y < out.rows(); ++y)
    for (Index x = 0; x < out.cols(); ++x) out(y, x) = src(x, src.cols() - 1 - y);
  return out;
}

Plane luma(const Plane& r, const Plane& g, const Plane& b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

Plane quantize8(const Plane& src) {
  return src.unaryExpr([](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; });
}

namespace {

int read_header_int(std::istream& in) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = -1;
  in >> value;
  return value;
}

}  // namespace

Plane read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "cannot open image " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  require(magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'), ErrorKind::Format,
          path.string() + ": only binary PGM (P5) and PPM (P6) are supported");
  const int channels = magic[1] == '5' ? 1 : 3;
  const int width = read_header_int(in);
  const int height = read_header_int(in);
  const int maxval = read_header_int(in);
  require(width > 0 && height > 0 && maxval == 255, ErrorKind::Format,
          path.string() + ": expected 8-bit image with positive size");
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raster(static_cast<size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  require(in.gcount() == static_cast<std::streamsize>(raster.size()), ErrorKind::Format,
          path.string() + ": truncated raster");
  if (channels == 1) {
    Plane out(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out(y, x) = raster[static_cast<size_t>(y) * width + x] / 255.0;
    return out;
  }
  Plane r(height, width), g(height, width), b(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const size_t o = (static_cast<size_t>(y) * width + x) * 3;
      r(y, x) = raster[o] / 255.0;
      g(y, x) = raster[o + 1] / 255.0;
      b(y, x) = raster[o + 2] / 255.0;
    }
  }
  return luma(r, g, b);
}

void write_pgm(const std::filesystem::path& path, const Plane& img) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Dependency, "cannot write image " + path.string());
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  std::vector<unsigned char> raster(static_cast<size_t>(img.size()));
  for (Index y = 0; y < img.rows(); ++y)
    for (Index x = 0; x < img.cols(); ++x)
      raster[static_cast<size_t>(y * img.cols() + x)] =
          static_cast<unsigned char>(std::lround(std::clamp(img(y, x), 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

}  // namespace fanet
