// Shared helpers for the test suites: random tensors, the central
// finite-difference gradient checker, and independent reference oracles.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sparsepat/autodiff.hpp"
#include "sparsepat/image.hpp"
#include "sparsepat/rng.hpp"
#include "sparsepat/tensor.hpp"

namespace testers {

using sparsepat::Rng;
using sparsepat::Tensor;

template <typename T>
Tensor<T> random_tensor(Rng& rng, std::vector<int64_t> shape, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Max relative error between an analytic gradient and central finite
// differences of a scalar-valued function of one tensor input.
inline double gradient_check(const std::function<double(const Tensor<double>&)>& f,
                             const Tensor<double>& x0, const Tensor<double>& analytic,
                             double step = 1e-5) {
  double worst = 0.0;
  Tensor<double> x = x0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    const double fd = (up - down) / (2.0 * step);
    const double denom = std::max({1e-6, std::abs(fd), std::abs(analytic[i])});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

// Direct six-nested-loop convolution, the independent conv2d oracle.
inline Tensor<double> conv2d_reference(const Tensor<double>& x, const Tensor<double>& w,
                                       const std::vector<double>& bias, int stride, int pad) {
  const int64_t bs = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (wd + 2 * pad - kw) / stride + 1;
  Tensor<double> out({bs, co, ho, wo});
  for (int64_t b = 0; b < bs; ++b)
    for (int64_t oc = 0; oc < co; ++oc)
      for (int64_t oy = 0; oy < ho; ++oy)
        for (int64_t ox = 0; ox < wo; ++ox) {
          double acc = bias[static_cast<size_t>(oc)];
          for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t ky = 0; ky < kh; ++ky)
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t iy = oy * stride - pad + ky;
                const int64_t ix = ox * stride - pad + kx;
                if (iy >= 0 && iy < h && ix >= 0 && ix < wd)
                  acc += x.at4(b, ic, iy, ix) * w.at4(oc, ic, ky, kx);
              }
          out.at4(b, oc, oy, ox) = acc;
        }
  return out;
}

// Direct-formula PSNR oracle (independent of the metrics module).
inline double psnr_reference(const sparsepat::Image2D& test, const sparsepat::Image2D& ref) {
  double peak = ref.pixels[0];
  for (float v : ref.pixels) peak = std::max(peak, static_cast<double>(v));
  double mse = 0.0;
  for (size_t i = 0; i < ref.pixels.size(); ++i) {
    const double d = static_cast<double>(test.pixels[i]) - ref.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ref.pixels.size());
  return 10.0 * std::log10(peak * peak / mse);
}

// Direct per-window SSIM oracle: non-separable, recomputes every window from
// scratch with explicit double loops.
inline double ssim_reference(const sparsepat::Image2D& test, const sparsepat::Image2D& ref) {
  const int win = 11;
  const double sigma = 1.5, k1 = 0.01, k2 = 0.03;
  double rmin = ref.pixels[0], rmax = ref.pixels[0];
  for (float v : ref.pixels) {
    rmin = std::min(rmin, static_cast<double>(v));
    rmax = std::max(rmax, static_cast<double>(v));
  }
  const double L = rmax - rmin;
  const double c1 = (k1 * L) * (k1 * L), c2 = (k2 * L) * (k2 * L);

  double wsum = 0.0;
  double weights[11][11];
  for (int u = 0; u < win; ++u)
    for (int v = 0; v < win; ++v) {
      const double du = u - 5.0, dv = v - 5.0;
      weights[u][v] = std::exp(-(du * du + dv * dv) / (2 * sigma * sigma));
      wsum += weights[u][v];
    }
  for (int u = 0; u < win; ++u)
    for (int v = 0; v < win; ++v) weights[u][v] /= wsum;

  const int size = ref.size;
  double total = 0.0;
  int count = 0;
  for (int r = 0; r + win <= size; ++r) {
    for (int c = 0; c + win <= size; ++c) {
      double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
      for (int u = 0; u < win; ++u)
        for (int v = 0; v < win; ++v) {
          const double a = test.at(r + u, c + v), b = ref.at(r + u, c + v);
          const double w = weights[u][v];
          ma += w * a;
          mb += w * b;
          maa += w * a * a;
          mbb += w * b * b;
          mab += w * a * b;
        }
      const double va = maa - ma * ma, vb = mbb - mb * mb, cov = mab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

}  // namespace testers
