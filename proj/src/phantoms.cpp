#include "sparsepat/phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace sparsepat {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Image2D gen_circles(uint64_t seed, int size) {
  require(size >= 16, "gen_circles requires size >= 16");
  Rng rng(seed);
  Image2D img(size);
  int count = rng.uniform_int(1, 5);
  // Sources stay inside the region the default detector ring encloses
  // (radius size*30/64); detectors must surround the sample.
  const double sample_region = size * (30.0 / 64.0) - 2.0;
  for (int i = 0; i < count; ++i) {
    double radius = rng.uniform(size / 32.0, size / 8.0);
    double reach = std::max(1.0, sample_region - radius);
    double angle = rng.uniform(0.0, 2.0 * kPi);
    double dist = std::sqrt(rng.uniform()) * reach;  // uniform over the disk
    double cx = size / 2.0 + dist * std::cos(angle);
    double cy = size / 2.0 + dist * std::sin(angle);
    double r2 = radius * radius;
    int lo_r = std::max(0, static_cast<int>(std::floor(cy - radius)) - 1);
    int hi_r = std::min(size - 1, static_cast<int>(std::ceil(cy + radius)) + 1);
    int lo_c = std::max(0, static_cast<int>(std::floor(cx - radius)) - 1);
    int hi_c = std::min(size - 1, static_cast<int>(std::ceil(cx + radius)) + 1);
    for (int r = lo_r; r <= hi_r; ++r) {
      double dy = r + 0.5 - cy;
      for (int c = lo_c; c <= hi_c; ++c) {
        double dx = c + 0.5 - cx;
        if (dx * dx + dy * dy <= r2) img.at(r, c) = 1.0f;  // union of disks
      }
    }
  }
  return img;
}

const std::array<SheppLoganEllipse, 10>& shepp_logan_ellipses() {
  // Classic Shepp-Logan head phantom table: intensity, a, b, x0, y0, phi.
  static const std::array<SheppLoganEllipse, 10> table = {{
      {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
      {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
      {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
      {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
      {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
      {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
      {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
      {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
      {0.01, 0.0230, 0.0230, 0.00, -0.6050, 0.0},
      {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
  }};
  return table;
}

Image2D gen_shepp_logan(int size) {
  require(size >= 32, "gen_shepp_logan requires size >= 32");
  const auto& ellipses = shepp_logan_ellipses();
  Image2D img(size);
  double max_v = 0.0;
  std::vector<double> acc(static_cast<size_t>(size) * size, 0.0);
  for (int r = 0; r < size; ++r) {
    double y = (size - 2.0 * r - 1.0) / size;
    for (int c = 0; c < size; ++c) {
      double x = (2.0 * c + 1.0 - size) / size;
      double v = 0.0;
      for (const auto& e : ellipses) {
        double phi = e.phi_deg * kPi / 180.0;
        double dx = x - e.x0, dy = y - e.y0;
        double u = dx * std::cos(phi) + dy * std::sin(phi);
        double w = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.intensity;
      }
      acc[static_cast<size_t>(r) * size + c] = v;
      max_v = std::max(max_v, v);
    }
  }
  if (max_v > 0.0) {
    for (size_t i = 0; i < acc.size(); ++i)
      img.pixels[i] = static_cast<float>(std::max(0.0, acc[i]) / max_v);
  }
  return img;
}

VesselStyle VesselStyle::held_out() {
  VesselStyle s;
  s.min_width = 2.5;
  s.max_width = 4.5;
  s.turn_sigma_deg = 14.0;
  s.branch_prob = 0.07;
  s.min_intensity = 0.6;
  return s;
}

namespace {

struct Walker {
  double x, y, angle, width, intensity;
  int depth;
};

// Anti-aliased disk stamp, max-composited so crossings stay in [0, 1].
void stamp(Image2D& img, double cx, double cy, double width, double intensity) {
  double radius = width * 0.5;
  int lo_r = std::max(0, static_cast<int>(std::floor(cy - radius)) - 1);
  int hi_r = std::min(img.size - 1, static_cast<int>(std::ceil(cy + radius)) + 1);
  int lo_c = std::max(0, static_cast<int>(std::floor(cx - radius)) - 1);
  int hi_c = std::min(img.size - 1, static_cast<int>(std::ceil(cx + radius)) + 1);
  for (int r = lo_r; r <= hi_r; ++r) {
    for (int c = lo_c; c <= hi_c; ++c) {
      double d = std::hypot(c + 0.5 - cx, r + 0.5 - cy);
      double cov = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      float v = static_cast<float>(std::clamp(intensity * cov, 0.0, 1.0));
      img.at(r, c) = std::max(img.at(r, c), v);
    }
  }
}

}  // namespace

Image2D gen_vessels(uint64_t seed, int size) {
  return gen_vessels(seed, size, VesselStyle::standard());
}

Image2D gen_vessels(uint64_t seed, int size, const VesselStyle& style) {
  require(size >= 32, "gen_vessels requires size >= 32");
  Rng rng(seed);
  Image2D img(size);

  std::deque<Walker> queue;
  int roots = rng.uniform_int(style.min_roots, style.max_roots);
  for (int i = 0; i < roots; ++i) {
    // random border point, heading roughly inward
    int edge = rng.uniform_int(0, 3);
    double t = rng.uniform(0.0, static_cast<double>(size));
    double x = 0, y = 0, inward = 0;
    switch (edge) {
      case 0: x = t; y = 0; inward = kPi / 2; break;         // top, heading down
      case 1: x = t; y = size - 1; inward = -kPi / 2; break;  // bottom, heading up
      case 2: x = 0; y = t; inward = 0; break;                // left, heading right
      default: x = size - 1; y = t; inward = kPi; break;      // right, heading left
    }
    Walker w;
    w.x = x;
    w.y = y;
    w.angle = inward + rng.uniform(-0.7, 0.7);
    w.width = rng.uniform(style.min_width, style.max_width);
    w.intensity = rng.uniform(style.min_intensity, style.max_intensity);
    w.depth = 0;
    queue.push_back(w);
  }

  const int max_steps = size;  // one canvas crossing
  const int max_walkers = 16;
  int spawned = roots;
  while (!queue.empty()) {
    Walker w = queue.front();
    queue.pop_front();
    bool alive = true;
    for (int step = 0; step < max_steps && alive; ++step) {
      stamp(img, w.x, w.y, w.width, w.intensity);
      w.angle += rng.gaussian(0.0, style.turn_sigma_deg * kPi / 180.0);
      w.x += std::cos(w.angle);
      w.y += std::sin(w.angle);
      if (w.x < 0 || w.y < 0 || w.x >= size || w.y >= size) {
        if (w.depth == 0) {
          // root vessels stay in frame: reflect off the violated border
          if (w.x < 0 || w.x >= size) {
            w.x = std::clamp(w.x, 0.0, size - 1.0);
            w.angle = kPi - w.angle;
          }
          if (w.y < 0 || w.y >= size) {
            w.y = std::clamp(w.y, 0.0, size - 1.0);
            w.angle = -w.angle;
          }
        } else {
          alive = false;
        }
      }
      if (alive && w.depth < style.max_depth && spawned < max_walkers &&
          rng.uniform() < style.branch_prob) {
        Walker child = w;
        child.depth = w.depth + 1;
        child.width = std::max(0.8, w.width * 0.8);
        double turn = rng.uniform(20.0, 70.0) * kPi / 180.0;
        child.angle = w.angle + (rng.uniform() < 0.5 ? turn : -turn);
        child.intensity = rng.uniform(style.min_intensity, style.max_intensity);
        queue.push_back(child);
        ++spawned;
      }
    }
  }
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

Image2D augment(const Image2D& source, const AugmentParams& params, int out_size) {
  const int src = source.size;
  const int canvas = static_cast<int>(std::lround(src * params.scale));
  require(canvas >= 1, "augment scale collapses the source");
  require(params.crop_row >= 0 && params.crop_col >= 0 &&
              params.crop_row + out_size <= canvas && params.crop_col + out_size <= canvas,
          "augment crop window exceeds transformed bounds (canvas " + std::to_string(canvas) +
              ", crop " + std::to_string(params.crop_row) + "," + std::to_string(params.crop_col) +
              ", out " + std::to_string(out_size) + ")");

  const double theta = params.rotation_deg * kPi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double canvas_c = (canvas - 1) * 0.5;
  const double src_c = (src - 1) * 0.5;
  const double inv_scale = 1.0 / params.scale;

  Image2D cropped(out_size, source.pixel_spacing);
  for (int r = 0; r < out_size; ++r) {
    const double vy = params.crop_row + r - canvas_c;
    for (int c = 0; c < out_size; ++c) {
      const double vx = params.crop_col + c - canvas_c;
      // inverse map: un-rotate about the canvas center, then un-scale
      const double rx = (ct * vx + st * vy) * inv_scale + src_c;
      const double ry = (-st * vx + ct * vy) * inv_scale + src_c;
      const int x0 = static_cast<int>(std::floor(rx));
      const int y0 = static_cast<int>(std::floor(ry));
      const double fx = rx - x0, fy = ry - y0;
      double acc = 0.0;
      for (int dy = 0; dy <= 1; ++dy) {
        const int yy = y0 + dy;
        if (yy < 0 || yy >= src) continue;
        const double wy = dy ? fy : 1.0 - fy;
        for (int dx = 0; dx <= 1; ++dx) {
          const int xx = x0 + dx;
          if (xx < 0 || xx >= src) continue;
          const double wx = dx ? fx : 1.0 - fx;
          acc += wy * wx * source.at(yy, xx);
        }
      }
      cropped.at(r, c) = static_cast<float>(acc);
    }
  }

  if (params.shift_x == 0 && params.shift_y == 0) return cropped;
  Image2D shifted(out_size, source.pixel_spacing);
  for (int r = params.shift_y; r < out_size; ++r)
    for (int c = params.shift_x; c < out_size; ++c)
      shifted.at(r, c) = cropped.at(r - params.shift_y, c - params.shift_x);
  return shifted;
}

AugmentParams sample_augment_params(Rng& rng, int source_size, int out_size) {
  AugmentParams p;
  double min_scale = std::max(0.5, static_cast<double>(out_size) / source_size);
  p.scale = rng.uniform(min_scale, 2.0);
  p.rotation_deg = rng.uniform_int(0, 359);
  int canvas = static_cast<int>(std::lround(source_size * p.scale));
  if (canvas < out_size) {  // rounding edge at the minimum scale
    p.scale = static_cast<double>(out_size) / source_size + 1e-9;
    canvas = static_cast<int>(std::lround(source_size * p.scale));
  }
  p.crop_row = rng.uniform_int(0, canvas - out_size);
  p.crop_col = rng.uniform_int(0, canvas - out_size);
  p.shift_x = rng.uniform_int(0, 10);
  p.shift_y = rng.uniform_int(0, 10);
  return p;
}

Image2D compose_complex(uint64_t seed, const Image2D& source, int out_size) {
  Rng rng(seed);
  int iterations = rng.uniform_int(1, 5);
  Image2D sum(out_size, source.pixel_spacing);
  for (int i = 0; i < iterations; ++i) {
    // redraw parameters when the crop lands on empty background
    for (int attempt = 0; attempt < 100; ++attempt) {
      AugmentParams params = sample_augment_params(rng, source.size, out_size);
      Image2D piece = augment(source, params, out_size);
      if (piece.max_value() > 1e-3f || source.max_value() <= 0.0f) {
        for (size_t j = 0; j < sum.pixels.size(); ++j) sum.pixels[j] += piece.pixels[j];
        break;
      }
    }
  }
  float peak = sum.max_value();
  if (peak > 0.0f)
    for (float& v : sum.pixels) v /= peak;
  return sum;
}

}  // namespace sparsepat
