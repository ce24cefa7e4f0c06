#include "sparsepat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sparsepat/io.hpp"

namespace sparsepat {

double psnr(const Image2D& test, const Image2D& reference, double peak) {
  require(test.size == reference.size, "psnr image sizes differ");
  if (peak <= 0.0) peak = reference.max_value();
  require(peak > 0.0, "psnr peak must be positive");
  double mse = 0.0;
  const size_t n = reference.pixels.size();
  for (size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(test.pixels[i]) - reference.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::vector<double>& gaussian_taps() {
  static const std::vector<double> taps = [] {
    std::vector<double> t(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      t[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += t[static_cast<size_t>(i)];
    }
    for (double& v : t) v /= sum;
    return t;
  }();
  return taps;
}

// Separable weighted means over valid positions: out is (size-10)^2.
void filter_valid(const std::vector<double>& img, int size, std::vector<double>& out) {
  const auto& w = gaussian_taps();
  const int valid = size - kWindow + 1;
  static thread_local std::vector<double> rows;
  rows.assign(static_cast<size_t>(size) * valid, 0.0);
  for (int r = 0; r < size; ++r) {
    const double* src = img.data() + static_cast<size_t>(r) * size;
    double* dst = rows.data() + static_cast<size_t>(r) * valid;
    for (int c = 0; c < valid; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += w[static_cast<size_t>(k)] * src[c + k];
      dst[c] = acc;
    }
  }
  out.assign(static_cast<size_t>(valid) * valid, 0.0);
  for (int r = 0; r < valid; ++r) {
    for (int c = 0; c < valid; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k)
        acc += w[static_cast<size_t>(k)] * rows[static_cast<size_t>(r + k) * valid + c];
      out[static_cast<size_t>(r) * valid + c] = acc;
    }
  }
}

}  // namespace

double ssim(const Image2D& test, const Image2D& reference, double dynamic_range) {
  require(test.size == reference.size, "ssim image sizes differ");
  require(test.size >= kWindow, "ssim requires images of at least 11x11");
  if (dynamic_range <= 0.0)
    dynamic_range =
        static_cast<double>(reference.max_value()) - static_cast<double>(reference.min_value());
  require(dynamic_range > 0.0, "ssim rejected: constant reference has zero dynamic range");

  const int size = test.size;
  const size_t n = static_cast<size_t>(size) * size;
  std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
  for (size_t i = 0; i < n; ++i) {
    a[i] = test.pixels[i];
    b[i] = reference.pixels[i];
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab;
  filter_valid(a, size, mu_a);
  filter_valid(b, size, mu_b);
  filter_valid(aa, size, m_aa);
  filter_valid(bb, size, m_bb);
  filter_valid(ab, size, m_ab);

  const double c1 = (kK1 * dynamic_range) * (kK1 * dynamic_range);
  const double c2 = (kK2 * dynamic_range) * (kK2 * dynamic_range);
  double total = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

QualityReport score_pairs(const std::vector<std::pair<Image2D, Image2D>>& pairs,
                          const std::string& method) {
  require(!pairs.empty(), "cannot score an empty dataset");
  QualityReport r;
  r.method = method;
  for (const auto& [x, y] : pairs) {
    const double p = psnr(x, y);
    if (std::isinf(p)) {
      ++r.n_excluded_infinite;
      std::fprintf(stderr, "warning: infinite PSNR excluded from '%s' aggregate\n",
                   method.c_str());
    } else {
      r.psnr_values.push_back(p);
    }
    r.ssim_values.push_back(ssim(x, y));
  }
  r.n_images = static_cast<int>(pairs.size());
  finalize_report(r);
  return r;
}

namespace {
void mean_std(const std::vector<double>& v, double* mean, double* sd) {
  if (v.empty()) {
    *mean = 0;
    *sd = 0;
    return;
  }
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  *mean = m;
  *sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}
}  // namespace

void finalize_report(QualityReport& r) {
  mean_std(r.psnr_values, &r.psnr_mean, &r.psnr_std);
  mean_std(r.ssim_values, &r.ssim_mean, &r.ssim_std);
}

std::string report_csv_header() {
  return "method,f1,k1,detectors,n_images,psnr_mean,psnr_std,ssim_mean,ssim_std,params";
}

std::string report_csv_row(const QualityReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%lld",
                r.method.c_str(), r.f1, r.k1, r.detectors, r.n_images, r.psnr_mean,
                r.psnr_std, r.ssim_mean, r.ssim_std, r.params);
  return buf;
}

void write_report_csv(const std::string& path, const std::vector<QualityReport>& rows) {
  std::string out = report_csv_header() + "\n";
  for (const auto& r : rows) out += report_csv_row(r) + "\n";
  write_text_file(path, out);
}

}  // namespace sparsepat
