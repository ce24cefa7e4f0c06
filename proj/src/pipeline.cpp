#include "sparsepat/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "sparsepat/io.hpp"
#include "sparsepat/phantoms.hpp"
#include "sparsepat/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sparsepat {

namespace {

constexpr uint64_t kSourceSeedIndex = 1000003;    // vessel/shepp source image stream
constexpr uint64_t kHeldOutSeedIndex = 1000033;   // mismatched test-set source stream
constexpr int kAugmentSourceSize = 340;

int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  unsigned hw = std::thread::hardware_concurrency();
  return std::max(1, std::min(8, static_cast<int>(hw)));
}

Image2D augmented_sample(const Image2D& source, uint64_t seed, int out_size) {
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    AugmentParams params = sample_augment_params(rng, source.size, out_size);
    Image2D img = augment(source, params, out_size);
    if (img.max_value() > 1e-3f) return img;
  }
  throw NumericError("augmentation produced 100 empty crops for seed " + std::to_string(seed));
}

// Ground-truth generator per dataset kind. "vessels_heldout" backs the
// mismatched test sets of the third experiment.
Image2D dataset_phantom(const std::string& kind, const Image2D* source, uint64_t sample_seed,
                        int grid) {
  if (kind == "circles") return gen_circles(sample_seed, grid);
  if (kind == "shepp_logan" || kind == "vessels" || kind == "vessels_heldout")
    return augmented_sample(*source, sample_seed, grid);
  if (kind == "vessels_complex") return compose_complex(sample_seed, *source, grid);
  throw InvalidArgument("unknown dataset kind '" + kind + "'");
}

bool kind_uses_source(const std::string& kind) { return kind != "circles"; }

Image2D make_source(const std::string& kind, uint64_t master_seed) {
  if (kind == "shepp_logan") return gen_shepp_logan(kAugmentSourceSize);
  if (kind == "vessels" || kind == "vessels_complex")
    return gen_vessels(derive_seed(master_seed, kSourceSeedIndex), kAugmentSourceSize);
  if (kind == "vessels_heldout")
    return gen_vessels(derive_seed(master_seed, kHeldOutSeedIndex), kAugmentSourceSize,
                       VesselStyle::held_out());
  throw InvalidArgument("unknown dataset kind '" + kind + "'");
}

json medium_to_json(const Medium& m) {
  return json{{"sound_speed", m.sound_speed}, {"dx", m.dx},
              {"dt", m.dt},                   {"n_steps", m.n_steps},
              {"pml_width", m.pml_width},     {"pml_alpha", m.pml_alpha},
              {"smooth_p0", m.smooth_p0}};
}

Medium medium_from_json(const json& j) {
  Medium m;
  m.sound_speed = j.at("sound_speed").get<double>();
  m.dx = j.at("dx").get<double>();
  m.dt = j.at("dt").get<double>();
  m.n_steps = j.at("n_steps").get<int>();
  m.pml_width = j.at("pml_width").get<int>();
  m.pml_alpha = j.at("pml_alpha").get<double>();
  m.smooth_p0 = j.at("smooth_p0").get<bool>();
  return m;
}

json generator_constants(const std::string& kind) {
  if (kind == "circles")
    return json{{"count", "uniform 1..5"},
                {"radius_px", "uniform [size/32, size/8]"},
                {"center", "uniform over the disk enclosed by the sensor ring (radius size*30/64 - 2)"},
                {"value", 1.0}};
  json aug{{"scale", "[0.5, 2]"},
           {"rotation_deg", "[0, 359]"},
           {"shift_px", "[0, 10]"},
           {"source_size", kAugmentSourceSize}};
  if (kind == "shepp_logan") return json{{"augment", aug}};
  VesselStyle s = kind == "vessels_heldout" ? VesselStyle::held_out() : VesselStyle::standard();
  json style{{"roots", {s.min_roots, s.max_roots}},
             {"width_px", {s.min_width, s.max_width}},
             {"width_decay", 0.8},
             {"turn_sigma_deg", s.turn_sigma_deg},
             {"branch_prob", s.branch_prob},
             {"max_depth", s.max_depth},
             {"intensity", {s.min_intensity, s.max_intensity}}};
  json out{{"augment", aug}, {"vessel_style", style}};
  if (kind == "vessels_complex") out["sum_iterations"] = "uniform 1..5, peak-normalized";
  return out;
}

}  // namespace

const std::vector<std::string>& phantom_kinds() {
  static const std::vector<std::string> kinds = {"circles", "shepp_logan", "vessels",
                                                 "vessels_complex"};
  return kinds;
}

Image2D generate_phantom(const std::string& kind, uint64_t seed, int size) {
  if (kind == "circles") return gen_circles(seed, size);
  if (kind == "shepp_logan") return gen_shepp_logan(size);
  if (kind == "vessels") return gen_vessels(seed, size);
  if (kind == "vessels_complex") {
    Image2D source = gen_vessels(derive_seed(seed, kSourceSeedIndex), kAugmentSourceSize);
    return compose_complex(seed, source, size);
  }
  std::string known;
  for (const auto& k : phantom_kinds()) known += (known.empty() ? "" : ", ") + k;
  throw InvalidArgument("unknown phantom kind '" + kind + "' (known: " + known + ")");
}

DatasetManifest make_dataset(const std::string& kind, int n, int train_count, int detectors,
                             int grid, uint64_t seed, const std::string& dir, int jobs) {
  require(n >= 1, "dataset needs at least one sample");
  require(train_count >= 0 && train_count <= n, "train_count must lie in [0, n]");
  require(detectors >= 1, "detectors must be >= 1");
  if (kind != "vessels_heldout") {
    const auto& kinds = phantom_kinds();
    require(std::find(kinds.begin(), kinds.end(), kind) != kinds.end(),
            "unknown dataset kind '" + kind + "'");
  }

  fs::create_directories(dir);
  DatasetManifest m;
  m.kind = kind;
  m.n = n;
  m.grid = grid;
  m.detectors = detectors;
  m.train_count = train_count;
  m.master_seed = seed;
  m.medium = make_default_medium(grid);
  SensorGeometry sensors = make_default_array(detectors, grid);
  m.sensor_radius = sensors.radius_px;
  m.unique_sensors = static_cast<int>(sensors.positions.size());
  m.samples.resize(static_cast<size_t>(n));
  m.dir = dir;

  Image2D source;
  if (kind_uses_source(kind)) source = make_source(kind, seed);

  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::string first_error;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const uint64_t sample_seed = derive_seed(seed, static_cast<uint64_t>(i));
        Image2D y = dataset_phantom(kind, kind_uses_source(kind) ? &source : nullptr,
                                    sample_seed, grid);
        SensorData data = simulate_forward(y, m.medium, sensors);
        Image2D x = time_reverse(data, m.medium, sensors, grid);
        char xb[32], yb[32];
        std::snprintf(xb, sizeof(xb), "x_%05d.ptns", i);
        std::snprintf(yb, sizeof(yb), "y_%05d.ptns", i);
        SampleEntry& e = m.samples[static_cast<size_t>(i)];
        e.index = i;
        e.seed = sample_seed;
        e.split = i < train_count ? "train" : "test";
        e.x_file = xb;
        e.y_file = yb;
        write_ptns((fs::path(dir) / e.x_file).string(), x.to_tensor());
        write_ptns((fs::path(dir) / e.y_file).string(), y.to_tensor());
        e.x_hash = hash_hex(fnv1a64_file((fs::path(dir) / e.x_file).string()));
        e.y_hash = hash_hex(fnv1a64_file((fs::path(dir) / e.y_file).string()));
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error.empty())
          first_error = "sample " + std::to_string(i) + " (seed " +
                        std::to_string(derive_seed(seed, static_cast<uint64_t>(i))) +
                        ") failed: " + ex.what();
        next.store(n);
        return;
      }
    }
  };

  const int n_jobs = std::min(resolve_jobs(jobs), n);
  std::vector<std::thread> threads;
  for (int t = 1; t < n_jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (!first_error.empty()) throw NumericError("dataset generation aborted: " + first_error);

  save_manifest(m, (fs::path(dir) / "manifest.json").string());
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  json j;
  j["format"] = 1;
  j["kind"] = m.kind;
  j["n"] = m.n;
  j["grid"] = m.grid;
  j["detectors"] = m.detectors;
  j["unique_sensors"] = m.unique_sensors;
  j["train_count"] = m.train_count;
  j["master_seed"] = m.master_seed;
  j["medium"] = medium_to_json(m.medium);
  j["sensor_radius"] = m.sensor_radius;
  j["generator"] = generator_constants(m.kind);
  j["samples"] = json::array();
  for (const auto& e : m.samples) {
    j["samples"].push_back({{"index", e.index},
                            {"seed", e.seed},
                            {"split", e.split},
                            {"x", e.x_file},
                            {"y", e.y_file},
                            {"x_hash", e.x_hash},
                            {"y_hash", e.y_hash}});
  }
  write_text_file(path, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::string& path) {
  json j = json::parse(read_text_file(path));
  DatasetManifest m;
  m.kind = j.at("kind").get<std::string>();
  m.n = j.at("n").get<int>();
  m.grid = j.at("grid").get<int>();
  m.detectors = j.at("detectors").get<int>();
  m.unique_sensors = j.at("unique_sensors").get<int>();
  m.train_count = j.at("train_count").get<int>();
  m.master_seed = j.at("master_seed").get<uint64_t>();
  m.medium = medium_from_json(j.at("medium"));
  m.sensor_radius = j.at("sensor_radius").get<double>();
  for (const auto& s : j.at("samples")) {
    SampleEntry e;
    e.index = s.at("index").get<int>();
    e.seed = s.at("seed").get<uint64_t>();
    e.split = s.at("split").get<std::string>();
    e.x_file = s.at("x").get<std::string>();
    e.y_file = s.at("y").get<std::string>();
    e.x_hash = s.at("x_hash").get<std::string>();
    e.y_hash = s.at("y_hash").get<std::string>();
    m.samples.push_back(e);
  }
  m.dir = fs::path(path).parent_path().string();
  return m;
}

namespace {

Image2D load_checked(const std::string& dir, const std::string& file, const std::string& hash,
                     double spacing) {
  const std::string path = (fs::path(dir) / file).string();
  if (hash_hex(fnv1a64_file(path)) != hash)
    throw IoError("checksum mismatch for " + path + "; regenerate the dataset");
  return Image2D::from_tensor(read_ptns_f32(path), spacing);
}

}  // namespace

std::vector<std::pair<Image2D, Image2D>> load_pairs(const DatasetManifest& m,
                                                    const std::string& split) {
  std::vector<int> idx;
  for (const auto& e : m.samples)
    if (split.empty() || e.split == split) idx.push_back(e.index);
  return load_pairs_indices(m, idx);
}

std::vector<std::pair<Image2D, Image2D>> load_pairs_indices(const DatasetManifest& m,
                                                            const std::vector<int>& indices) {
  std::vector<std::pair<Image2D, Image2D>> out;
  out.reserve(indices.size());
  for (int i : indices) {
    const auto& e = m.samples.at(static_cast<size_t>(i));
    out.emplace_back(load_checked(m.dir, e.x_file, e.x_hash, m.medium.dx),
                     load_checked(m.dir, e.y_file, e.y_hash, m.medium.dx));
  }
  return out;
}

std::vector<int> make_cv_folds(int n_total, int k) {
  require(k >= 2, "cross validation needs k >= 2");
  require(n_total >= k, "not enough samples for the requested folds");
  if (n_total % k != 0)
    throw InvalidArgument("fold count " + std::to_string(k) +
                          " does not divide the dataset size " + std::to_string(n_total));
  const int per = n_total / k;
  std::vector<int> fold(static_cast<size_t>(n_total));
  for (int i = 0; i < n_total; ++i) fold[static_cast<size_t>(i)] = i / per;
  return fold;
}

TrainResult train_pairs(Model<float>& model,
                        const std::vector<std::pair<Image2D, Image2D>>& pairs,
                        const TrainConfig& cfg) {
  require(!pairs.empty(), "training set is empty");
  require(cfg.batch_size >= 1, "batch_size must be >= 1");
  const int h = pairs[0].first.size;
  const int b = cfg.batch_size;
  const int n = static_cast<int>(pairs.size());

  // fresh Adam state
  std::map<std::string, std::pair<TensorF, TensorF>> moments;
  for (auto& [name, p] : model.params)
    moments.emplace(name, std::make_pair(TensorF(p.value.shape()), TensorF(p.value.shape())));

  Rng rng(cfg.seed);
  TrainResult result;
  for (int it = 0; it < cfg.iterations; ++it) {
    TensorF xb({b, 1, h, h}), yb({b, 1, h, h});
    for (int s = 0; s < b; ++s) {
      const auto& [x, y] = pairs[static_cast<size_t>(rng.uniform_int(0, n - 1))];
      std::copy(x.pixels.begin(), x.pixels.end(), xb.data() + static_cast<int64_t>(s) * h * h);
      std::copy(y.pixels.begin(), y.pixels.end(), yb.data() + static_cast<int64_t>(s) * h * h);
    }
    Tape<float> tape;
    Var<float> x_in = tape.value(std::move(xb));
    Var<float> pred = model.forward(tape, x_in, Mode::kTrain);
    Var<float> loss = tape.mse_loss(pred, tape.value(std::move(yb)));
    const double mse = loss->value[0];
    if (!std::isfinite(mse))
      throw NumericError("non-finite loss at iteration " + std::to_string(it) + " (seed " +
                         std::to_string(cfg.seed) + ")");
    if (it % 50 == 0 || it == cfg.iterations - 1) {
      const double train_psnr = mse > 0 ? -10.0 * std::log10(mse) : 99.0;
      result.curve.push_back({static_cast<double>(it), mse, train_psnr});
    }
    tape.backward(loss);

    const int t_step = it + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, t_step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t_step);
    for (auto& [name, p] : model.params) {
      if (!p.trainable) continue;
      auto& [mo, ve] = moments.at(name);
      const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
      for (int64_t i = 0; i < p.value.numel(); ++i) {
        const float g = p.grad[i];
        mo[i] = b1 * mo[i] + (1.0f - b1) * g;
        ve[i] = b2 * ve[i] + (1.0f - b2) * g * g;
        const double mhat = mo[i] / bc1;
        const double vhat = ve[i] / bc2;
        p.value[i] -=
            static_cast<float>(cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
      }
    }
  }
  return result;
}

TrainResult train(Model<float>& model, const DatasetManifest& manifest, const TrainConfig& cfg) {
  return train_pairs(model, load_pairs(manifest, "train"), cfg);
}

TrainResult fine_tune(Model<float>& model, const DatasetManifest& manifest, int iterations,
                      const TrainConfig& base) {
  require(iterations >= 0, "fine_tune iterations must be >= 0");
  TrainConfig cfg = base;
  cfg.iterations = iterations;
  return train(model, manifest, cfg);  // optimizer state starts fresh
}

void save_loss_curve(const std::string& path, const TrainResult& result) {
  std::string out = "iteration,mse,psnr\n";
  char buf[96];
  for (const auto& row : result.curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.8g,%.4f\n", static_cast<int>(row[0]), row[1], row[2]);
    out += buf;
  }
  write_text_file(path, out);
}

QualityReport evaluate_pairs(Model<float>* model,
                             const std::vector<std::pair<Image2D, Image2D>>& pairs,
                             const std::string& method) {
  require(!pairs.empty(), "evaluation set is empty");
  std::vector<std::pair<Image2D, Image2D>> scored;
  scored.reserve(pairs.size());
  for (const auto& [x, y] : pairs)
    scored.emplace_back(model ? model->apply(x) : x, y);
  QualityReport r = score_pairs(scored, method);
  if (model) {
    r.f1 = model->arch.f1;
    r.k1 = model->arch.kind == ArchKind::kFdUNet ? model->arch.k1 : 0;
    r.params = model->param_count();
  }
  return r;
}

QualityReport evaluate_dataset(Model<float>* model, const DatasetManifest& manifest,
                               const std::string& split, const std::string& method) {
  QualityReport r = evaluate_pairs(model, load_pairs(manifest, split), method);
  r.detectors = manifest.detectors;
  return r;
}

void render_panel(const std::string& path, const std::vector<Image2D>& columns) {
  require(!columns.empty(), "panel needs at least one image");
  const int size = columns[0].size;
  const int gap = 2;
  const int w = static_cast<int>(columns.size()) * (size + gap) - gap;
  TensorF panel({size, w});
  float peak = 0.0f;
  for (const auto& img : columns) peak = std::max(peak, img.max_value());
  if (peak <= 0.0f) peak = 1.0f;
  for (size_t k = 0; k < columns.size(); ++k) {
    require(columns[k].size == size, "panel images must share a size");
    const int x0 = static_cast<int>(k) * (size + gap);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c)
        panel[static_cast<int64_t>(r) * w + x0 + c] =
            std::max(0.0f, columns[k].at(r, c)) / peak;
  }
  write_pgm(path, panel);
}

// ---------------------------------------------------------------------------
// Experiment registry
// ---------------------------------------------------------------------------

namespace {

struct ScaleConfig {
  int grid, n_train, n_test, n_finetune, iterations, ft_iterations, f1, k1;
  int folds_total, folds_run;  // full scale: 6 folds of 1000/200, four of them run
};

ScaleConfig scale_config(const std::string& scale) {
  if (scale == "desk") return {64, 200, 50, 50, 2000, 1000, 8, 1, 1, 1};
  if (scale == "full") return {128, 1000, 200, 100, 10000, 5000, 64, 8, 6, 4};
  throw InvalidArgument("unknown scale '" + scale + "' (expected desk or full)");
}

void check_disjoint(const std::vector<int>& train_idx, const std::vector<int>& test_idx) {
  std::set<int> t(train_idx.begin(), train_idx.end());
  for (int i : test_idx)
    if (t.count(i)) throw NumericError("train/test leakage: sample " + std::to_string(i));
}

std::vector<int> split_indices(const DatasetManifest& m, const std::string& split) {
  std::vector<int> idx;
  for (const auto& e : m.samples)
    if (e.split == split) idx.push_back(e.index);
  return idx;
}

struct TrainedPair {
  Model<float> unet;
  Model<float> fd_unet;
};

TrainedPair train_both(const DatasetManifest& ds, const ScaleConfig& sc, uint64_t seed,
                       const std::string& model_dir, const std::string& tag) {
  check_disjoint(split_indices(ds, "train"), split_indices(ds, "test"));
  TrainConfig cfg;
  cfg.iterations = sc.iterations;
  cfg.seed = derive_seed(seed, 11);
  TrainedPair out{build_unet(sc.f1, derive_seed(seed, 21)),
                  build_fd_unet(sc.f1, sc.k1, derive_seed(seed, 22))};
  TrainResult ru = train(out.unet, ds, cfg);
  TrainResult rf = train(out.fd_unet, ds, cfg);
  fs::create_directories(model_dir);
  save_model(out.unet, model_dir + "/unet_" + tag);
  save_model(out.fd_unet, model_dir + "/fd_unet_" + tag);
  save_loss_curve(model_dir + "/unet_" + tag + "_loss.csv", ru);
  save_loss_curve(model_dir + "/fd_unet_" + tag + "_loss.csv", rf);
  return out;
}

void write_panels(const DatasetManifest& ds, std::vector<Model<float>*> models,
                  const std::string& dir, const std::string& prefix, int count) {
  fs::create_directories(dir);
  auto idx = split_indices(ds, "test");
  count = std::min<int>(count, static_cast<int>(idx.size()));
  for (int k = 0; k < count; ++k) {
    auto pairs = load_pairs_indices(ds, {idx[static_cast<size_t>(k)]});
    std::vector<Image2D> cols = {pairs[0].second, pairs[0].first};  // truth | TR
    for (auto* m : models) cols.push_back(m->apply(pairs[0].first));
    render_panel(dir + "/" + prefix + "_" + std::to_string(k) + ".pgm", cols);
  }
}

void exp1_circles(const ScaleConfig& sc, uint64_t seed, int jobs, const std::string& out) {
  std::vector<QualityReport> rows;
  for (int det : {10, 15, 30}) {
    const std::string ds_dir = out + "/ds_circles_" + std::to_string(det);
    DatasetManifest ds =
        make_dataset("circles", sc.n_train + sc.n_test, sc.n_train, det, sc.grid,
                     derive_seed(seed, static_cast<uint64_t>(det)), ds_dir, jobs);
    if (sc.folds_run > 1) {
      // cross validation over the pooled samples (full scale)
      std::vector<int> fold = make_cv_folds(ds.n, sc.folds_total);
      QualityReport tr_row, unet_row, fd_row;
      std::vector<std::pair<Image2D, Image2D>> tr_sc, un_sc, fd_sc;
      for (int f = 0; f < sc.folds_run; ++f) {
        std::vector<int> train_idx, test_idx;
        for (int i = 0; i < ds.n; ++i)
          (fold[static_cast<size_t>(i)] == f ? test_idx : train_idx).push_back(i);
        check_disjoint(train_idx, test_idx);
        auto train_set = load_pairs_indices(ds, train_idx);
        auto test_set = load_pairs_indices(ds, test_idx);
        TrainConfig cfg;
        cfg.iterations = sc.iterations;
        cfg.seed = derive_seed(seed, 100 + static_cast<uint64_t>(f));
        Model<float> unet = build_unet(sc.f1, derive_seed(seed, 200 + static_cast<uint64_t>(f)));
        Model<float> fd =
            build_fd_unet(sc.f1, sc.k1, derive_seed(seed, 300 + static_cast<uint64_t>(f)));
        train_pairs(unet, train_set, cfg);
        train_pairs(fd, train_set, cfg);
        for (const auto& [x, y] : test_set) {
          tr_sc.emplace_back(x, y);
          un_sc.emplace_back(unet.apply(x), y);
          fd_sc.emplace_back(fd.apply(x), y);
        }
      }
      tr_row = score_pairs(tr_sc, "tr");
      unet_row = score_pairs(un_sc, "unet");
      fd_row = score_pairs(fd_sc, "fd_unet");
      Model<float> unet_ref = build_unet(sc.f1, 0);
      Model<float> fd_ref = build_fd_unet(sc.f1, sc.k1, 0);
      unet_row.f1 = sc.f1;
      unet_row.params = unet_ref.param_count();
      fd_row.f1 = sc.f1;
      fd_row.k1 = sc.k1;
      fd_row.params = fd_ref.param_count();
      for (QualityReport* r : {&tr_row, &unet_row, &fd_row}) {
        r->detectors = det;
        rows.push_back(*r);
      }
    } else {
      TrainedPair models = train_both(ds, sc, derive_seed(seed, static_cast<uint64_t>(det)),
                                      out + "/models", "circles_" + std::to_string(det));
      rows.push_back(evaluate_dataset(nullptr, ds, "test", "tr"));
      rows.push_back(evaluate_dataset(&models.unet, ds, "test", "unet"));
      rows.push_back(evaluate_dataset(&models.fd_unet, ds, "test", "fd_unet"));
      write_panels(ds, {&models.unet, &models.fd_unet}, out + "/panels",
                   "circles_" + std::to_string(det), 2);
    }
  }
  write_report_csv(out + "/exp1_circles.csv", rows);
}

void exp2_transfer(const ScaleConfig& sc, uint64_t seed, int jobs, const std::string& out) {
  DatasetManifest circles =
      make_dataset("circles", sc.n_train + sc.n_test, sc.n_train, 30, sc.grid,
                   derive_seed(seed, 1), out + "/ds_circles_30", jobs);
  TrainedPair base = train_both(circles, sc, derive_seed(seed, 2), out + "/models", "circles");

  for (const std::string phantom : {"shepp_logan", "vessels"}) {
    const uint64_t pseed = derive_seed(seed, phantom == "vessels" ? 40 : 30);
    DatasetManifest test_ds = make_dataset(phantom, sc.n_test, 0, 30, sc.grid,
                                           derive_seed(pseed, 1), out + "/ds_" + phantom + "_test",
                                           jobs);
    DatasetManifest ft_ds =
        make_dataset(phantom, sc.n_finetune, sc.n_finetune, 30, sc.grid, derive_seed(pseed, 2),
                     out + "/ds_" + phantom + "_ft", jobs);

    std::vector<QualityReport> rows;
    rows.push_back(evaluate_dataset(nullptr, test_ds, "test", "tr"));
    rows.push_back(evaluate_dataset(&base.unet, test_ds, "test", "unet_initial"));
    rows.push_back(evaluate_dataset(&base.fd_unet, test_ds, "test", "fd_unet_initial"));

    TrainConfig cfg;
    cfg.seed = derive_seed(pseed, 3);
    Model<float> unet_ft = base.unet;
    Model<float> fd_ft = base.fd_unet;
    fine_tune(unet_ft, ft_ds, sc.ft_iterations, cfg);
    fine_tune(fd_ft, ft_ds, sc.ft_iterations, cfg);
    save_model(unet_ft, out + "/models/unet_ft_" + phantom);
    save_model(fd_ft, out + "/models/fd_unet_ft_" + phantom);
    rows.push_back(evaluate_dataset(&unet_ft, test_ds, "test", "unet_fine_tuned"));
    rows.push_back(evaluate_dataset(&fd_ft, test_ds, "test", "fd_unet_fine_tuned"));
    write_report_csv(out + "/exp2_" + phantom + ".csv", rows);

    std::vector<Model<float>*> models = {&base.unet, &base.fd_unet, &unet_ft, &fd_ft};
    write_panels(test_ds, models, out + "/panels", phantom, 2);
  }
}

void exp3_vessels(const ScaleConfig& sc, uint64_t seed, int jobs, const std::string& out) {
  std::vector<QualityReport> rows;
  for (int det : {15, 30, 45}) {
    const uint64_t dseed = derive_seed(seed, static_cast<uint64_t>(det));
    DatasetManifest train_ds =
        make_dataset("vessels_complex", sc.n_train, sc.n_train, det, sc.grid,
                     derive_seed(dseed, 1), out + "/ds_train_" + std::to_string(det), jobs);
    DatasetManifest test_ds =
        make_dataset("vessels_heldout", sc.n_test, 0, det, sc.grid, derive_seed(dseed, 2),
                     out + "/ds_test_" + std::to_string(det), jobs);
    TrainedPair models = train_both(train_ds, sc, derive_seed(dseed, 3), out + "/models",
                                    "vessels_" + std::to_string(det));
    QualityReport tr = evaluate_dataset(nullptr, test_ds, "test", "tr");
    QualityReport un = evaluate_dataset(&models.unet, test_ds, "test", "unet");
    QualityReport fd = evaluate_dataset(&models.fd_unet, test_ds, "test", "fd_unet");
    rows.insert(rows.end(), {tr, un, fd});
    write_panels(test_ds, {&models.unet, &models.fd_unet}, out + "/panels",
                 "vessels_" + std::to_string(det), 2);
  }
  write_report_csv(out + "/exp3_vessels.csv", rows);
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"exp1_circles", "exp2_transfer",
                                                 "exp3_vessels"};
  return names;
}

void run_experiment(const std::string& name, const std::string& scale, uint64_t seed, int jobs,
                    const std::string& out_dir) {
  const ScaleConfig sc = scale_config(scale);
  fs::create_directories(out_dir);
  json run{{"experiment", name}, {"scale", scale},         {"seed", seed},
           {"jobs", jobs},       {"grid", sc.grid},        {"n_train", sc.n_train},
           {"n_test", sc.n_test}, {"iterations", sc.iterations},
           {"f1", sc.f1},        {"k1", sc.k1},            {"folds", sc.folds_run}};
  write_text_file(out_dir + "/run.json", run.dump(2) + "\n");
  if (name == "exp1_circles")
    exp1_circles(sc, seed, jobs, out_dir);
  else if (name == "exp2_transfer")
    exp2_transfer(sc, seed, jobs, out_dir);
  else if (name == "exp3_vessels")
    exp3_vessels(sc, seed, jobs, out_dir);
  else {
    std::string known;
    for (const auto& n : experiment_names()) known += (known.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown experiment '" + name + "' (known: " + known + ")");
  }
}

}  // namespace sparsepat
