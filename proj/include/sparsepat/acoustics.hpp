#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "sparsepat/image.hpp"
#include "sparsepat/tensor.hpp"

namespace sparsepat {

// Homogeneous acoustic medium plus solver discretization. The PML pads the
// stated grid on the outside, so the whole user grid is interior.
struct Medium {
  double sound_speed = 1500.0;  // m/s
  double dx = 1e-4;             // meters per pixel
  double dt = 0.0;              // seconds; <= 0 selects the CFL 0.3 default
  int n_steps = 0;              // <= 0 selects two diagonal crossings
  int pml_width = 20;           // grid points, >= 8
  double pml_alpha = 2.0;       // nepers per grid point
  bool smooth_p0 = true;        // Blackman-smooth the initial pressure
};

// Fills dt and n_steps defaults for a given grid and validates invariants.
Medium make_default_medium(int grid);
Medium resolve_medium(const Medium& m, int grid);

// Minimum detector count for artifact-free sampling of a d x d image.
int required_detectors(int image_side);

struct SensorGeometry {
  std::vector<std::array<int, 2>> positions;  // unique (x, y) grid nodes
  std::vector<double> angles;                 // detector angle per position
  double radius_px = 0;
  double center_x = 0, center_y = 0;
  int grid = 0;
  int requested_n = 0;
};

// n detectors at angles 2*pi*k/n on the circle, rounded to the nearest grid
// node. Positions that round onto an already-used node are rejected from the
// set (the survivors form a dense digital ring once n exceeds its capacity).
SensorGeometry make_circular_array(int n, double radius_px, double center_x, double center_y,
                                   int grid);

// Default ring for a grid: radius grid*(30/64), centered.
SensorGeometry make_default_array(int n, int grid);

struct SensorData {
  TensorD samples;  // (N, T); row i is the trace at positions[i], t = 0 first
  double dt = 0;
};

// First-order coupled pressure-velocity k-space scheme with split-field PML.
SensorData simulate_forward(const Image2D& p0, const Medium& medium,
                            const SensorGeometry& sensors);

// Same solver run backwards from a zero field with the time-reversed traces
// enforced as a Dirichlet pressure condition on the detector ring each step.
Image2D time_reverse(const SensorData& data, const Medium& medium,
                     const SensorGeometry& sensors, int grid);

// Per-step interior diagnostics for solver validation.
struct SolverTrace {
  std::vector<double> energy;   // sum of p^2 over the interior, per step
  std::vector<double> max_abs;  // max |p| over the interior, per step
};
SolverTrace trace_interior(const Image2D& p0, const Medium& medium);

}  // namespace sparsepat
