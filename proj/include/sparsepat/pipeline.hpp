#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sparsepat/acoustics.hpp"
#include "sparsepat/metrics.hpp"
#include "sparsepat/networks.hpp"

namespace sparsepat {

// One (X, Y) sample: Y is the phantom, X its sparse TR reconstruction.
struct SampleEntry {
  int index = 0;
  uint64_t seed = 0;
  std::string split;  // "train" or "test"
  std::string x_file, y_file;
  std::string x_hash, y_hash;
};

struct DatasetManifest {
  std::string kind;
  int n = 0;
  int grid = 0;
  int detectors = 0;       // requested detector count
  int unique_sensors = 0;  // after rounding to grid nodes
  int train_count = 0;
  uint64_t master_seed = 0;
  Medium medium;
  double sensor_radius = 0;
  std::vector<SampleEntry> samples;
  std::string dir;  // directory holding the files (not serialized)
};

// Phantom for standalone generation. Dataset builds use the same generators
// with the per-kind augmentation protocol.
Image2D generate_phantom(const std::string& kind, uint64_t seed, int size);
const std::vector<std::string>& phantom_kinds();

// Generates n (X, Y) pairs: phantom -> forward simulation -> time reversal.
// The first train_count samples carry the "train" split label. Deterministic
// in (kind, n, detectors, grid, seed) regardless of jobs.
DatasetManifest make_dataset(const std::string& kind, int n, int train_count, int detectors,
                             int grid, uint64_t seed, const std::string& dir, int jobs);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Loads pairs (X, Y) for a split ("" = all), verifying file checksums.
std::vector<std::pair<Image2D, Image2D>> load_pairs(const DatasetManifest& m,
                                                    const std::string& split);
std::vector<std::pair<Image2D, Image2D>> load_pairs_indices(const DatasetManifest& m,
                                                            const std::vector<int>& indices);

// k contiguous folds; fold_of[i] names the fold whose *test* set holds i.
std::vector<int> make_cv_folds(int n_total, int k);

struct TrainConfig {
  int iterations = 10000;
  double learning_rate = 1e-4;
  int batch_size = 3;
  uint64_t seed = 0;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

struct TrainResult {
  // (iteration, mse, psnr) sampled every 50 iterations plus the last one
  std::vector<std::array<double, 3>> curve;
};

// Uniform-with-replacement batches, MSE loss, Adam. Deterministic in seed.
TrainResult train(Model<float>& model, const DatasetManifest& manifest, const TrainConfig& cfg);
TrainResult train_pairs(Model<float>& model,
                        const std::vector<std::pair<Image2D, Image2D>>& pairs,
                        const TrainConfig& cfg);

// Continues training with a fresh optimizer state.
TrainResult fine_tune(Model<float>& model, const DatasetManifest& manifest, int iterations,
                      const TrainConfig& base);

void save_loss_curve(const std::string& path, const TrainResult& result);

// Scores forward(model, X) vs Y, or X vs Y when model is null (the TR row).
QualityReport evaluate_dataset(Model<float>* model, const DatasetManifest& manifest,
                               const std::string& split, const std::string& method);
QualityReport evaluate_pairs(Model<float>* model,
                             const std::vector<std::pair<Image2D, Image2D>>& pairs,
                             const std::string& method);

// Side-by-side PGM: ground truth | TR input | one column per model output.
void render_panel(const std::string& path, const std::vector<Image2D>& columns);

// Registry of the paper's three experiments at desk or full scale.
void run_experiment(const std::string& name, const std::string& scale, uint64_t seed, int jobs,
                    const std::string& out_dir);
const std::vector<std::string>& experiment_names();

}  // namespace sparsepat
