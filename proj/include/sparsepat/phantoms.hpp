#pragma once

#include <array>
#include <cstdint>

#include "sparsepat/image.hpp"
#include "sparsepat/rng.hpp"

namespace sparsepat {

// Scale/rotate/crop/shift parameters for the augmentation protocol.
struct AugmentParams {
  double scale = 1.0;       // in [0.5, 2]
  double rotation_deg = 0;  // in [0, 359]
  int crop_row = 0;         // crop offset inside the transformed canvas
  int crop_col = 0;
  int shift_x = 0;          // in [0, 10]; content moves right, vacated columns zeroed
  int shift_y = 0;          // in [0, 10]; content moves down, vacated rows zeroed
};

// One standard Shepp-Logan ellipse: additive intensity, semi-axes, center and
// rotation in the [-1, 1]^2 phantom frame.
struct SheppLoganEllipse {
  double intensity, a, b, x0, y0, phi_deg;
};
const std::array<SheppLoganEllipse, 10>& shepp_logan_ellipses();

// Stroke constants of the procedural vasculature generator. The held-out
// variant feeds the mismatched test sets.
struct VesselStyle {
  int min_roots = 2, max_roots = 4;
  double min_width = 3.0, max_width = 5.0;  // px, decays x0.8 per branch depth
  double turn_sigma_deg = 10.0;
  double branch_prob = 0.05;
  int max_depth = 4;
  double min_intensity = 0.5, max_intensity = 1.0;

  static VesselStyle standard() { return {}; }
  static VesselStyle held_out();
};

// 1-5 binary disks, union-valued; pixel values are exactly 0 or 1.
Image2D gen_circles(uint64_t seed, int size);

// Ten-ellipse Shepp-Logan head phantom rescaled to [0, 1]. Deterministic.
Image2D gen_shepp_logan(int size);

// Procedural branching vasculature, anti-aliased strokes, values in [0, 1].
Image2D gen_vessels(uint64_t seed, int size);
Image2D gen_vessels(uint64_t seed, int size, const VesselStyle& style);

// Scale -> rotate (bilinear, zero fill) -> crop -> shift with zero padding.
Image2D augment(const Image2D& source, const AugmentParams& params, int out_size);

// Draws parameters that keep the crop window inside the transformed canvas.
AugmentParams sample_augment_params(Rng& rng, int source_size, int out_size);

// Sums 1-5 augmentations of the source and rescales the peak to 1.
Image2D compose_complex(uint64_t seed, const Image2D& source, int out_size);

}  // namespace sparsepat
