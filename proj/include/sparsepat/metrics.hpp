#pragma once

#include <limits>
#include <string>
#include <vector>

#include "sparsepat/image.hpp"

namespace sparsepat {

// 10*log10(peak^2 / MSE). peak <= 0 selects the reference maximum. Identical
// images return +infinity (excluded from aggregation by QualityReport).
double psnr(const Image2D& test, const Image2D& reference, double peak = -1.0);

// Mean local SSIM over valid (fully covered) 11x11 Gaussian windows,
// sigma = 1.5, K1 = 0.01, K2 = 0.03. dynamic_range <= 0 selects the
// reference max - min; a constant reference is rejected.
double ssim(const Image2D& test, const Image2D& reference, double dynamic_range = -1.0);

struct QualityReport {
  std::string method;  // "tr", "unet", "fd_unet", ...
  int f1 = 0, k1 = 0;
  int detectors = 0;
  long long params = 0;
  std::vector<double> psnr_values;  // finite scores only
  std::vector<double> ssim_values;
  int n_images = 0;
  int n_excluded_infinite = 0;
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
};

// Scores each (x, y) pair; the std uses the unbiased (n-1) estimator.
QualityReport score_pairs(const std::vector<std::pair<Image2D, Image2D>>& pairs,
                          const std::string& method);

void finalize_report(QualityReport& report);

// CSV schema shared by eval and the experiment reports.
std::string report_csv_header();
std::string report_csv_row(const QualityReport& report);
void write_report_csv(const std::string& path, const std::vector<QualityReport>& rows);

}  // namespace sparsepat
