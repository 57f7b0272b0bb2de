#pragma once

#include <vector>

#include "dak/errors.hpp"

namespace dak {

// Dense row-major H x W x C grid. Intensity images live in [0, 1]; the same
// container also carries per-pixel gradients, which are unconstrained, so
// the range is only checked by validate().
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c = 1, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  // Contract check for intensity images: finite values in [0, 1].
  void validate() const;
};

// Dense row-major H x W grid of positive depths.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  DepthMap() = default;
  DepthMap(int h, int w, double fill = 1.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  // Contract check: finite, strictly positive.
  void validate() const;
};

}  // namespace dak
