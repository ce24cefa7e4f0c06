#include "sparsepat/acoustics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <set>
#include <string>

namespace sparsepat {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kCflLimit = 0.3;
constexpr double kRho0 = 1000.0;  // kg/m^3; cancels between forward and TR

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

double sinc(double x) { return std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x; }

// k-space pseudospectral solver on the padded grid (user grid + PML border).
// Plan creation is serialized; instances are safe to use from worker threads.
class KSpaceSolver {
 public:
  KSpaceSolver(int grid, const Medium& medium)
      : grid_(grid),
        pml_w_(medium.pml_width),
        n_(grid + 2 * medium.pml_width),
        c_(medium.sound_speed),
        dx_(medium.dx),
        dt_(medium.dt),
        alpha_(medium.pml_alpha) {
    const int nc = n_ * (n_ / 2 + 1);
    p_.assign(static_cast<size_t>(n_) * n_, 0.0);
    ux_ = uy_ = rhox_ = rhoy_ = scratch_ = p_;
    spec_.assign(static_cast<size_t>(nc), {0.0, 0.0});

    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      real_buf_ = fftw_alloc_real(static_cast<size_t>(n_) * n_);
      cplx_buf_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(nc));
      plan_r2c_ = fftw_plan_dft_r2c_2d(n_, n_, real_buf_,
                                       reinterpret_cast<fftw_complex*>(cplx_buf_),
                                       FFTW_ESTIMATE);
      plan_c2r_ = fftw_plan_dft_c2r_2d(n_, n_, reinterpret_cast<fftw_complex*>(cplx_buf_),
                                       real_buf_, FFTW_ESTIMATE);
    }

    build_spectral_multipliers();
    build_pml_profiles();
  }

  ~KSpaceSolver() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan_r2c_);
    fftw_destroy_plan(plan_c2r_);
    fftw_free(real_buf_);
    fftw_free(cplx_buf_);
  }

  KSpaceSolver(const KSpaceSolver&) = delete;
  KSpaceSolver& operator=(const KSpaceSolver&) = delete;

  int padded() const { return n_; }
  int pml() const { return pml_w_; }

  void set_initial_pressure(const std::vector<double>& p0_padded) {
    p_ = p0_padded;
    const double inv2c2 = 1.0 / (2.0 * c_ * c_);
    for (size_t i = 0; i < p_.size(); ++i) {
      rhox_[i] = p_[i] * inv2c2;
      rhoy_[i] = p_[i] * inv2c2;
    }
    std::fill(ux_.begin(), ux_.end(), 0.0);
    std::fill(uy_.begin(), uy_.end(), 0.0);
    first_step_ = true;
  }

  void zero_fields() {
    std::fill(p_.begin(), p_.end(), 0.0);
    std::fill(ux_.begin(), ux_.end(), 0.0);
    std::fill(uy_.begin(), uy_.end(), 0.0);
    std::fill(rhox_.begin(), rhox_.end(), 0.0);
    std::fill(rhoy_.begin(), rhoy_.end(), 0.0);
    first_step_ = false;
  }

  // One dt update of the coupled first-order system.
  void step(int step_index) {
    const double dt_u = first_step_ ? dt_ * 0.5 : dt_;  // initial-value staggering
    first_step_ = false;

    // velocity update from pressure gradients on the staggered grid;
    // the pressure spectrum is computed once and reused for both axes
    forward_fft(p_);
    apply_multiplier(mx_pos_);
    run_c2r(scratch_);
    for (int row = 0; row < n_; ++row) {
      const double* g = scratch_.data() + static_cast<size_t>(row) * n_;
      double* u = ux_.data() + static_cast<size_t>(row) * n_;
      for (int col = 0; col < n_; ++col)
        u[col] = att_sg_[col] * (att_sg_[col] * u[col] - dt_u / kRho0 * g[col]);
    }
    apply_multiplier(my_pos_);
    run_c2r(scratch_);
    for (int row = 0; row < n_; ++row) {
      const double f = att_sg_[row];
      const double* g = scratch_.data() + static_cast<size_t>(row) * n_;
      double* u = uy_.data() + static_cast<size_t>(row) * n_;
      for (int col = 0; col < n_; ++col) u[col] = f * (f * u[col] - dt_u / kRho0 * g[col]);
    }

    // split density update from velocity divergence terms
    forward_fft(ux_);
    apply_multiplier(mx_neg_);
    run_c2r(scratch_);
    for (int row = 0; row < n_; ++row) {
      const double* g = scratch_.data() + static_cast<size_t>(row) * n_;
      double* r = rhox_.data() + static_cast<size_t>(row) * n_;
      for (int col = 0; col < n_; ++col)
        r[col] = att_[col] * (att_[col] * r[col] - dt_ * kRho0 * g[col]);
    }
    forward_fft(uy_);
    apply_multiplier(my_neg_);
    run_c2r(scratch_);
    for (int row = 0; row < n_; ++row) {
      const double f = att_[row];
      const double* g = scratch_.data() + static_cast<size_t>(row) * n_;
      double* r = rhoy_.data() + static_cast<size_t>(row) * n_;
      for (int col = 0; col < n_; ++col) r[col] = f * (f * r[col] - dt_ * kRho0 * g[col]);
    }

    const double c2 = c_ * c_;
    for (size_t i = 0; i < p_.size(); ++i) p_[i] = c2 * (rhox_[i] + rhoy_[i]);

    if (step_index % 25 == 0 && !std::isfinite(p_[p_.size() / 2]))
      throw NumericError("solver field became non-finite at step " +
                         std::to_string(step_index));
  }

  double pressure_at(int ix, int iy) const {
    return p_[static_cast<size_t>(iy + pml_w_) * n_ + (ix + pml_w_)];
  }

  void enforce_pressure(int ix, int iy, double value) {
    const size_t idx = static_cast<size_t>(iy + pml_w_) * n_ + (ix + pml_w_);
    const double half = value / (2.0 * c_ * c_);
    p_[idx] = value;
    rhox_[idx] = half;
    rhoy_[idx] = half;
  }

  Image2D interior(double pixel_spacing) const {
    Image2D img(grid_, pixel_spacing);
    for (int r = 0; r < grid_; ++r)
      for (int c = 0; c < grid_; ++c)
        img.at(r, c) =
            static_cast<float>(p_[static_cast<size_t>(r + pml_w_) * n_ + (c + pml_w_)]);
    return img;
  }

  void interior_stats(double* energy, double* max_abs) const {
    double e = 0.0, m = 0.0;
    for (int r = 0; r < grid_; ++r) {
      const double* row = p_.data() + static_cast<size_t>(r + pml_w_) * n_ + pml_w_;
      for (int c = 0; c < grid_; ++c) {
        e += row[c] * row[c];
        m = std::max(m, std::abs(row[c]));
      }
    }
    *energy = e;
    *max_abs = m;
  }

  // Frequency-domain Blackman window, magnitude restored to the input peak.
  void smooth(std::vector<double>& field) const {
    double orig_max = 0.0;
    for (double v : field) orig_max = std::max(orig_max, std::abs(v));
    if (orig_max == 0.0) return;
    forward_fft(field);
    const int half = n_ / 2 + 1;
    for (int row = 0; row < n_; ++row) {
      int sy = row <= n_ / 2 ? row : row - n_;
      double wy = blackman(std::abs(sy));
      for (int col = 0; col < half; ++col)
        cplx_buf_[static_cast<size_t>(row) * half + col] =
            spec_[static_cast<size_t>(row) * half + col] * (wy * blackman(col) * norm_);
    }
    run_c2r(field);
    double new_max = 0.0;
    for (double v : field) new_max = std::max(new_max, std::abs(v));
    if (new_max > 0.0) {
      const double s = orig_max / new_max;
      for (double& v : field) v *= s;
    }
  }

 private:
  double blackman(int k) const {
    double f = static_cast<double>(k) / (n_ / 2);
    return 0.42 + 0.5 * std::cos(kPi * f) + 0.08 * std::cos(2.0 * kPi * f);
  }

  void build_spectral_multipliers() {
    const int half = n_ / 2 + 1;
    const double dk = 2.0 * kPi / (n_ * dx_);
    norm_ = 1.0 / (static_cast<double>(n_) * n_);
    mx_pos_.resize(static_cast<size_t>(n_) * half);
    my_pos_ = mx_neg_ = my_neg_ = mx_pos_;
    for (int row = 0; row < n_; ++row) {
      const int sy = row <= n_ / 2 ? row : row - n_;
      const double ky = sy * dk;
      for (int col = 0; col < half; ++col) {
        const double kx = col * dk;
        const double kappa = sinc(c_ * std::sqrt(kx * kx + ky * ky) * dt_ / 2.0);
        const std::complex<double> i_unit(0.0, 1.0);
        const std::complex<double> shift_x = std::exp(i_unit * (kx * dx_ / 2.0));
        const std::complex<double> shift_y = std::exp(i_unit * (ky * dx_ / 2.0));
        // odd derivative operators vanish on the Nyquist mode
        const double gx = (col == n_ / 2) ? 0.0 : kx;
        const double gy = (sy == -n_ / 2) ? 0.0 : ky;
        const size_t idx = static_cast<size_t>(row) * half + col;
        mx_pos_[idx] = i_unit * gx * kappa * shift_x * norm_;
        mx_neg_[idx] = i_unit * gx * kappa * std::conj(shift_x) * norm_;
        my_pos_[idx] = i_unit * gy * kappa * shift_y * norm_;
        my_neg_[idx] = i_unit * gy * kappa * std::conj(shift_y) * norm_;
      }
    }
  }

  void build_pml_profiles() {
    att_.assign(static_cast<size_t>(n_), 1.0);
    att_sg_.assign(static_cast<size_t>(n_), 1.0);
    const double sigma_max = alpha_ * c_ / dx_;
    const double left = pml_w_ - 1.0, right = static_cast<double>(n_ - pml_w_);
    auto factor = [&](double q) {
      double depth = 0.0;
      if (q < left)
        depth = (left - q) / pml_w_;
      else if (q > right)
        depth = (q - right) / pml_w_;
      depth = std::min(depth, 1.0);
      return std::exp(-sigma_max * std::pow(depth, 4.0) * dt_ / 2.0);
    };
    for (int i = 0; i < n_; ++i) {
      att_[static_cast<size_t>(i)] = factor(i);
      att_sg_[static_cast<size_t>(i)] = factor(i + 0.5);
    }
  }

  void forward_fft(const std::vector<double>& src) const {
    std::memcpy(real_buf_, src.data(), src.size() * sizeof(double));
    fftw_execute(plan_r2c_);
    std::memcpy(spec_.data(), cplx_buf_, spec_.size() * sizeof(std::complex<double>));
  }

  void apply_multiplier(const std::vector<std::complex<double>>& m) const {
    for (size_t i = 0; i < spec_.size(); ++i) cplx_buf_[i] = spec_[i] * m[i];
  }

  void run_c2r(std::vector<double>& dst) const {
    fftw_execute(plan_c2r_);
    std::memcpy(dst.data(), real_buf_, dst.size() * sizeof(double));
  }

  int grid_, pml_w_, n_;
  double c_, dx_, dt_, alpha_;
  double norm_ = 1.0;
  bool first_step_ = false;

  std::vector<double> p_, ux_, uy_, rhox_, rhoy_, scratch_;
  mutable std::vector<std::complex<double>> spec_;
  std::vector<std::complex<double>> mx_pos_, my_pos_, mx_neg_, my_neg_;
  std::vector<double> att_, att_sg_;

  double* real_buf_ = nullptr;
  std::complex<double>* cplx_buf_ = nullptr;
  fftw_plan plan_r2c_ = nullptr;
  fftw_plan plan_c2r_ = nullptr;
};

void validate(const Medium& m, int grid) {
  require(grid >= 16, "grid must be >= 16");
  require(m.pml_width >= 8, "pml_width must be >= 8");
  require(m.dx > 0 && m.dt > 0 && m.sound_speed > 0, "medium scales must be positive");
  const double cfl = m.sound_speed * m.dt / m.dx;
  if (cfl > kCflLimit + 1e-12)
    throw InvalidArgument("CFL number " + std::to_string(cfl) + " exceeds the 0.3 limit");
  require(m.n_steps >= 2, "n_steps must be >= 2");
}

std::vector<double> pad_image(const Image2D& img, int pml, int n) {
  std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
  for (int r = 0; r < img.size; ++r)
    for (int c = 0; c < img.size; ++c)
      out[static_cast<size_t>(r + pml) * n + (c + pml)] = img.at(r, c);
  return out;
}

double wrap_angle(double a) {
  while (a < 0) a += 2.0 * kPi;
  while (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

// Full digital ring with each node mapped to the nearest detector by angle,
// matching the dense-mask playback convention of circular-array TR.
struct RingEnforcement {
  std::vector<std::array<int, 2>> nodes;
  std::vector<int> source_row;
};

RingEnforcement build_ring(const SensorGeometry& g) {
  RingEnforcement ring;
  std::set<std::pair<int, int>> seen;
  const int n_samples = std::max(64, static_cast<int>(std::ceil(16.0 * g.radius_px)));
  for (int k = 0; k < n_samples; ++k) {
    const double a = 2.0 * kPi * k / n_samples;
    const int x = static_cast<int>(std::lround(g.center_x + g.radius_px * std::cos(a)));
    const int y = static_cast<int>(std::lround(g.center_y + g.radius_px * std::sin(a)));
    if (x < 0 || y < 0 || x >= g.grid || y >= g.grid) continue;
    if (!seen.insert({x, y}).second) continue;
    double best = 1e300;
    int best_row = 0;
    for (size_t d = 0; d < g.angles.size(); ++d) {
      double diff = std::abs(wrap_angle(a) - wrap_angle(g.angles[d]));
      diff = std::min(diff, 2.0 * kPi - diff);
      if (diff < best - 1e-15) {
        best = diff;
        best_row = static_cast<int>(d);
      }
    }
    ring.nodes.push_back({x, y});
    ring.source_row.push_back(best_row);
  }
  return ring;
}

}  // namespace

Medium make_default_medium(int grid) { return resolve_medium(Medium{}, grid); }

Medium resolve_medium(const Medium& m, int grid) {
  Medium out = m;
  if (out.dt <= 0) out.dt = kCflLimit * out.dx / out.sound_speed;
  if (out.n_steps <= 0)
    out.n_steps = static_cast<int>(
        std::ceil(2.0 * std::sqrt(2.0) * grid * out.dx / (out.sound_speed * out.dt)));
  validate(out, grid);
  return out;
}

int required_detectors(int image_side) {
  require(image_side >= 1, "image side must be >= 1");
  return static_cast<int>(std::ceil(kPi * image_side));
}

SensorGeometry make_circular_array(int n, double radius_px, double center_x, double center_y,
                                   int grid) {
  require(n >= 1, "detector count must be >= 1");
  require(radius_px >= 1.0, "sensor radius must be >= 1 pixel");
  if (radius_px > grid / 2.0 - 1.0)
    throw InvalidArgument("sensor circle of radius " + std::to_string(radius_px) +
                          " px does not fit inside the " + std::to_string(grid) +
                          " px interior (limit " + std::to_string(grid / 2.0 - 1.0) + ")");
  SensorGeometry g;
  g.radius_px = radius_px;
  g.center_x = center_x;
  g.center_y = center_y;
  g.grid = grid;
  g.requested_n = n;
  std::set<std::pair<int, int>> seen;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * kPi * k / n;
    const int x = static_cast<int>(std::lround(center_x + radius_px * std::cos(a)));
    const int y = static_cast<int>(std::lround(center_y + radius_px * std::sin(a)));
    if (x < 0 || y < 0 || x >= grid || y >= grid)
      throw InvalidArgument("detector " + std::to_string(k) + " at (" + std::to_string(x) +
                            "," + std::to_string(y) + ") falls outside the grid");
    if (!seen.insert({x, y}).second) continue;  // duplicate rounded node rejected
    g.positions.push_back({x, y});
    g.angles.push_back(a);
  }
  return g;
}

SensorGeometry make_default_array(int n, int grid) {
  const double radius = grid * (30.0 / 64.0);
  const double center = grid / 2.0;
  return make_circular_array(n, radius, center, center, grid);
}

SensorData simulate_forward(const Image2D& p0, const Medium& medium_in,
                            const SensorGeometry& sensors) {
  require(p0.size == sensors.grid, "p0 size does not match sensor grid");
  require(p0.all_finite(), "p0 contains non-finite values");
  const Medium medium = resolve_medium(medium_in, p0.size);

  KSpaceSolver solver(p0.size, medium);
  std::vector<double> field = pad_image(p0, solver.pml(), solver.padded());
  if (medium.smooth_p0) solver.smooth(field);
  solver.set_initial_pressure(field);

  const int T = medium.n_steps;
  const size_t n_det = sensors.positions.size();
  SensorData data;
  data.dt = medium.dt;
  data.samples = TensorD({static_cast<int64_t>(n_det), T});
  for (size_t d = 0; d < n_det; ++d)
    data.samples[static_cast<int64_t>(d) * T] =
        solver.pressure_at(sensors.positions[d][0], sensors.positions[d][1]);
  for (int t = 1; t < T; ++t) {
    solver.step(t);
    for (size_t d = 0; d < n_det; ++d)
      data.samples[static_cast<int64_t>(d) * T + t] =
          solver.pressure_at(sensors.positions[d][0], sensors.positions[d][1]);
  }
  return data;
}

Image2D time_reverse(const SensorData& data, const Medium& medium_in,
                     const SensorGeometry& sensors, int grid) {
  require(grid == sensors.grid, "grid does not match sensor geometry");
  const int T = static_cast<int>(data.samples.dim(1));
  require(data.samples.dim(0) == static_cast<int64_t>(sensors.positions.size()),
          "sensor data rows (" + std::to_string(data.samples.dim(0)) +
              ") do not match detector count (" +
              std::to_string(sensors.positions.size()) + ")");
  for (int64_t i = 0; i < data.samples.numel(); ++i)
    if (!std::isfinite(data.samples[i]))
      throw InvalidArgument("sensor data contains non-finite values");
  Medium medium = medium_in;
  medium.n_steps = T;
  medium = resolve_medium(medium, grid);
  require(std::abs(medium.dt - data.dt) < 1e-15, "sensor data dt does not match medium dt");

  KSpaceSolver solver(grid, medium);
  solver.zero_fields();
  const RingEnforcement ring = build_ring(sensors);

  for (int t = 0; t < T; ++t) {
    const int col = T - 1 - t;  // reversed playback ends at the t = 0 sample
    for (size_t i = 0; i < ring.nodes.size(); ++i) {
      const double v = data.samples[static_cast<int64_t>(ring.source_row[i]) * T + col];
      solver.enforce_pressure(ring.nodes[i][0], ring.nodes[i][1], v);
    }
    if (t < T - 1) solver.step(t);
  }
  return solver.interior(medium.dx);
}

SolverTrace trace_interior(const Image2D& p0, const Medium& medium_in) {
  const Medium medium = resolve_medium(medium_in, p0.size);
  KSpaceSolver solver(p0.size, medium);
  std::vector<double> field = pad_image(p0, solver.pml(), solver.padded());
  if (medium.smooth_p0) solver.smooth(field);
  solver.set_initial_pressure(field);

  SolverTrace trace;
  trace.energy.resize(static_cast<size_t>(medium.n_steps));
  trace.max_abs.resize(static_cast<size_t>(medium.n_steps));
  solver.interior_stats(&trace.energy[0], &trace.max_abs[0]);
  for (int t = 1; t < medium.n_steps; ++t) {
    solver.step(t);
    solver.interior_stats(&trace.energy[static_cast<size_t>(t)],
                          &trace.max_abs[static_cast<size_t>(t)]);
  }
  return trace;
}

}  // namespace sparsepat
