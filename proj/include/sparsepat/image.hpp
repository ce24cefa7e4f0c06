#pragma once

#include <cmath>
#include <vector>

#include "sparsepat/common.hpp"
#include "sparsepat/tensor.hpp"

namespace sparsepat {

// Square real-valued pixel grid. Serves as phantom (ground truth), time
// reversal reconstruction (network input) and network output.
struct Image2D {
  int size = 0;
  double pixel_spacing = 1e-4;  // meters per pixel
  std::vector<float> pixels;    // row-major, size*size

  Image2D() = default;
  explicit Image2D(int n, double spacing = 1e-4)
      : size(n), pixel_spacing(spacing), pixels(static_cast<size_t>(n) * n, 0.0f) {}

  float& at(int row, int col) { return pixels[static_cast<size_t>(row) * size + col]; }
  float at(int row, int col) const { return pixels[static_cast<size_t>(row) * size + col]; }

  float max_value() const {
    float m = pixels.empty() ? 0.0f : pixels[0];
    for (float v : pixels) m = std::max(m, v);
    return m;
  }
  float min_value() const {
    float m = pixels.empty() ? 0.0f : pixels[0];
    for (float v : pixels) m = std::min(m, v);
    return m;
  }
  bool all_finite() const {
    for (float v : pixels)
      if (!std::isfinite(v)) return false;
    return true;
  }

  TensorF to_tensor() const {
    return TensorF({size, size}, std::vector<float>(pixels.begin(), pixels.end()));
  }
  static Image2D from_tensor(const TensorF& t, double spacing = 1e-4) {
    if (t.rank() != 2 || t.dim(0) != t.dim(1))
      throw InvalidArgument("Image2D expects a square rank-2 tensor, got " + t.shape_string());
    Image2D img(static_cast<int>(t.dim(0)), spacing);
    img.pixels.assign(t.data(), t.data() + t.numel());
    return img;
  }
};

}  // namespace sparsepat
