#include "dak/image.hpp"

#include <cmath>

namespace dak {

void Image::validate() const {
  if (height < 0 || width < 0 || channels < 1) throw DataError("Image: bad dimensions");
  if (data.size() != static_cast<std::size_t>(height) * width * channels)
    throw DataError("Image: buffer size mismatch");
  for (double v : data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw DataError("Image: intensity outside [0, 1]");
  }
}

void DepthMap::validate() const {
  if (height < 0 || width < 0) throw DataError("DepthMap: bad dimensions");
  if (data.size() != static_cast<std::size_t>(height) * width)
    throw DataError("DepthMap: buffer size mismatch");
  for (double v : data) {
    if (!std::isfinite(v) || v <= 0.0) throw DataError("DepthMap: depths must be positive");
  }
}

}  // namespace dak
