#include "sparsepat/sparsepat.h"

#include <cstring>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sparsepat/acoustics.hpp"
#include "sparsepat/common.hpp"
#include "sparsepat/io.hpp"
#include "sparsepat/metrics.hpp"
#include "sparsepat/networks.hpp"
#include "sparsepat/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
namespace sp = sparsepat;

namespace {

thread_local std::string g_last_error;

template <typename Fn>
sp_status wrap(Fn&& fn) {
  try {
    fn();
    return SP_OK;
  } catch (const sp::InvalidArgument& e) {
    g_last_error = e.what();
    return SP_ERR_INVALID_ARGUMENT;
  } catch (const sp::IoError& e) {
    g_last_error = e.what();
    return SP_ERR_IO;
  } catch (const sp::NumericError& e) {
    g_last_error = e.what();
    return SP_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SP_ERR_INTERNAL;
  }
}

void require_c(bool cond, const char* msg) {
  if (!cond) throw sp::InvalidArgument(msg);
}

sp::Medium medium_from_params(const sp_sim_params& p, int grid) {
  sp::Medium m;
  m.sound_speed = p.sound_speed;
  m.dx = p.dx;
  m.dt = p.dt;
  m.n_steps = p.n_steps;
  m.pml_width = p.pml_width;
  m.pml_alpha = p.pml_alpha;
  m.smooth_p0 = p.smooth_p0 != 0;
  return sp::resolve_medium(m, grid);
}

sp::SensorGeometry geometry_from_params(const sp_sim_params& p, int grid) {
  const double radius = p.sensor_radius > 0 ? p.sensor_radius : grid * (30.0 / 64.0);
  return sp::make_circular_array(p.detectors, radius, grid / 2.0, grid / 2.0, grid);
}

}  // namespace

struct sp_image {
  sp::Image2D img;
};

struct sp_sensor_data {
  sp::SensorData data;
  sp::Medium medium;
  sp::SensorGeometry geometry;
  int grid = 0;
};

struct sp_model {
  sp::Model<float> model;
};

extern "C" {

const char* sp_last_error(void) { return g_last_error.c_str(); }

const char* sp_version(void) { return "sparsepat 1.0.0"; }

sp_status sp_sim_params_init(int grid, int detectors, sp_sim_params* out) {
  return wrap([&] {
    require_c(out != nullptr, "out is null");
    sp::Medium m = sp::make_default_medium(grid);
    out->sound_speed = m.sound_speed;
    out->dx = m.dx;
    out->dt = m.dt;
    out->n_steps = m.n_steps;
    out->pml_width = m.pml_width;
    out->pml_alpha = m.pml_alpha;
    out->smooth_p0 = m.smooth_p0 ? 1 : 0;
    out->sensor_radius = grid * (30.0 / 64.0);
    out->detectors = detectors;
  });
}

int sp_required_detectors(int image_side) {
  if (image_side < 1) return -1;
  return sp::required_detectors(image_side);
}

sp_status sp_phantom(const char* kind, int size, uint64_t seed, sp_image** out) {
  return wrap([&] {
    require_c(kind && out, "kind/out is null");
    *out = new sp_image{sp::generate_phantom(kind, seed, size)};
  });
}

sp_status sp_image_load(const char* ptns_path, sp_image** out) {
  return wrap([&] {
    require_c(ptns_path && out, "path/out is null");
    *out = new sp_image{sp::Image2D::from_tensor(sp::read_ptns_f32(ptns_path))};
  });
}

sp_status sp_image_save(const sp_image* img, const char* ptns_path) {
  return wrap([&] {
    require_c(img && ptns_path, "image/path is null");
    sp::write_ptns(ptns_path, img->img.to_tensor());
  });
}

sp_status sp_image_save_pgm(const sp_image* img, const char* pgm_path) {
  return wrap([&] {
    require_c(img && pgm_path, "image/path is null");
    sp::write_pgm(pgm_path, img->img.to_tensor());
  });
}

int sp_image_size(const sp_image* img) { return img ? img->img.size : -1; }

sp_status sp_image_pixels(const sp_image* img, float* buf, size_t buf_len) {
  return wrap([&] {
    require_c(img && buf, "image/buffer is null");
    require_c(buf_len >= img->img.pixels.size(), "buffer too small");
    std::memcpy(buf, img->img.pixels.data(), img->img.pixels.size() * sizeof(float));
  });
}

void sp_image_free(sp_image* img) { delete img; }

sp_status sp_simulate(const sp_image* p0, const sp_sim_params* params, sp_sensor_data** out) {
  return wrap([&] {
    require_c(p0 && params && out, "p0/params/out is null");
    auto* handle = new sp_sensor_data;
    try {
      handle->grid = p0->img.size;
      handle->medium = medium_from_params(*params, handle->grid);
      handle->geometry = geometry_from_params(*params, handle->grid);
      handle->data = sp::simulate_forward(p0->img, handle->medium, handle->geometry);
    } catch (...) {
      delete handle;
      throw;
    }
    *out = handle;
  });
}

sp_status sp_sensor_data_save(const sp_sensor_data* data, const char* ptns_path) {
  return wrap([&] {
    require_c(data && ptns_path, "data/path is null");
    sp::write_ptns(ptns_path, data->data.samples);
    json j;
    j["dt"] = data->data.dt;
    j["dx"] = data->medium.dx;
    j["sound_speed"] = data->medium.sound_speed;
    j["n_steps"] = data->medium.n_steps;
    j["pml_width"] = data->medium.pml_width;
    j["pml_alpha"] = data->medium.pml_alpha;
    j["smooth_p0"] = data->medium.smooth_p0;
    j["grid"] = data->grid;
    j["sensor_radius"] = data->geometry.radius_px;
    j["center"] = {data->geometry.center_x, data->geometry.center_y};
    j["requested_n"] = data->geometry.requested_n;
    j["positions"] = json::array();
    for (const auto& p : data->geometry.positions) j["positions"].push_back({p[0], p[1]});
    j["angles"] = data->geometry.angles;
    sp::write_text_file(std::string(ptns_path) + ".json", j.dump(2) + "\n");
  });
}

sp_status sp_sensor_data_load(const char* ptns_path, sp_sensor_data** out) {
  return wrap([&] {
    require_c(ptns_path && out, "path/out is null");
    json j = json::parse(sp::read_text_file(std::string(ptns_path) + ".json"));
    auto* handle = new sp_sensor_data;
    try {
      handle->data.samples = sp::read_ptns_f64(ptns_path);
      handle->data.dt = j.at("dt").get<double>();
      handle->medium.dx = j.at("dx").get<double>();
      handle->medium.dt = handle->data.dt;
      handle->medium.sound_speed = j.at("sound_speed").get<double>();
      handle->medium.n_steps = j.at("n_steps").get<int>();
      handle->medium.pml_width = j.at("pml_width").get<int>();
      handle->medium.pml_alpha = j.at("pml_alpha").get<double>();
      handle->medium.smooth_p0 = j.at("smooth_p0").get<bool>();
      handle->grid = j.at("grid").get<int>();
      handle->geometry.radius_px = j.at("sensor_radius").get<double>();
      handle->geometry.center_x = j.at("center")[0].get<double>();
      handle->geometry.center_y = j.at("center")[1].get<double>();
      handle->geometry.requested_n = j.at("requested_n").get<int>();
      handle->geometry.grid = handle->grid;
      for (const auto& p : j.at("positions"))
        handle->geometry.positions.push_back({p[0].get<int>(), p[1].get<int>()});
      handle->geometry.angles = j.at("angles").get<std::vector<double>>();
    } catch (...) {
      delete handle;
      throw;
    }
    *out = handle;
  });
}

sp_status sp_sensor_data_shape(const sp_sensor_data* data, int* n_detectors, int* n_steps) {
  return wrap([&] {
    require_c(data != nullptr, "data is null");
    if (n_detectors) *n_detectors = static_cast<int>(data->data.samples.dim(0));
    if (n_steps) *n_steps = static_cast<int>(data->data.samples.dim(1));
  });
}

sp_status sp_time_reverse(const sp_sensor_data* data, sp_image** out) {
  return wrap([&] {
    require_c(data && out, "data/out is null");
    *out = new sp_image{sp::time_reverse(data->data, data->medium, data->geometry, data->grid)};
  });
}

void sp_sensor_data_free(sp_sensor_data* data) { delete data; }

sp_status sp_model_build(const char* arch, int f1, int k1, uint64_t seed, sp_model** out) {
  return wrap([&] {
    require_c(arch && out, "arch/out is null");
    sp::ArchKind kind = sp::arch_kind_from_name(arch);
    *out = new sp_model{kind == sp::ArchKind::kUNet ? sp::build_unet(f1, seed)
                                                    : sp::build_fd_unet(f1, k1, seed)};
  });
}

sp_status sp_model_load(const char* dir, sp_model** out) {
  return wrap([&] {
    require_c(dir && out, "dir/out is null");
    *out = new sp_model{sp::load_model(dir)};
  });
}

sp_status sp_model_save(const sp_model* model, const char* dir) {
  return wrap([&] {
    require_c(model && dir, "model/dir is null");
    sp::save_model(model->model, dir);
  });
}

int64_t sp_model_param_count(const sp_model* model) {
  return model ? model->model.param_count() : -1;
}

sp_status sp_model_apply(const sp_model* model, const sp_image* x, sp_image** out) {
  return wrap([&] {
    require_c(model && x && out, "model/x/out is null");
    *out = new sp_image{const_cast<sp::Model<float>&>(model->model).apply(x->img)};
  });
}

void sp_model_free(sp_model* model) { delete model; }

void sp_train_params_init(sp_train_params* out) {
  if (!out) return;
  sp::TrainConfig cfg;
  out->iterations = cfg.iterations;
  out->learning_rate = cfg.learning_rate;
  out->batch_size = cfg.batch_size;
  out->seed = cfg.seed;
}

sp_status sp_make_dataset(const char* kind, int n, int train_count, int detectors, int grid,
                          uint64_t seed, int jobs, const char* out_dir) {
  return wrap([&] {
    require_c(kind && out_dir, "kind/out_dir is null");
    sp::make_dataset(kind, n, train_count, detectors, grid, seed, out_dir, jobs);
  });
}

sp_status sp_train(sp_model* model, const char* manifest_path, const sp_train_params* params,
                   const char* out_dir) {
  return wrap([&] {
    require_c(model && manifest_path && params, "model/manifest/params is null");
    sp::DatasetManifest manifest = sp::load_manifest(manifest_path);
    sp::TrainConfig cfg;
    cfg.iterations = params->iterations;
    cfg.learning_rate = params->learning_rate;
    cfg.batch_size = params->batch_size;
    cfg.seed = params->seed;
    sp::TrainResult result = sp::train(model->model, manifest, cfg);
    if (out_dir) {
      fs::create_directories(out_dir);
      sp::save_model(model->model, (fs::path(out_dir) / "weights").string());
      sp::save_loss_curve((fs::path(out_dir) / "loss.csv").string(), result);
    }
  });
}

sp_status sp_evaluate(const sp_model* model, const char* manifest_path, const char* split,
                      const char* method_label, const char* csv_path, double* psnr_mean_out,
                      double* ssim_mean_out) {
  return wrap([&] {
    require_c(manifest_path != nullptr, "manifest is null");
    sp::DatasetManifest manifest = sp::load_manifest(manifest_path);
    sp::Model<float>* m = model ? const_cast<sp::Model<float>*>(&model->model) : nullptr;
    const std::string label = method_label ? method_label : (m ? "model" : "tr");
    sp::QualityReport r =
        sp::evaluate_dataset(m, manifest, split ? split : "test", label);
    if (csv_path) {
      std::string text;
      if (!fs::exists(csv_path)) text = sp::report_csv_header() + "\n";
      else text = sp::read_text_file(csv_path);
      text += sp::report_csv_row(r) + "\n";
      sp::write_text_file(csv_path, text);
    }
    if (psnr_mean_out) *psnr_mean_out = r.psnr_mean;
    if (ssim_mean_out) *ssim_mean_out = r.ssim_mean;
  });
}

sp_status sp_report(const char* manifest_path, const char* const* model_dirs, int n_models,
                    int n_panels, const char* out_dir) {
  return wrap([&] {
    require_c(manifest_path && out_dir, "manifest/out_dir is null");
    require_c(n_models >= 0 && (n_models == 0 || model_dirs), "bad model list");
    sp::DatasetManifest manifest = sp::load_manifest(manifest_path);
    fs::create_directories(out_dir);

    std::vector<sp::Model<float>> models;
    for (int i = 0; i < n_models; ++i) models.push_back(sp::load_model(model_dirs[i]));

    std::vector<sp::QualityReport> rows;
    rows.push_back(sp::evaluate_dataset(nullptr, manifest, "test", "tr"));
    for (auto& m : models) {
      rows.push_back(sp::evaluate_dataset(&m, manifest, "test",
                                          sp::arch_kind_name(m.arch.kind)));
    }
    sp::write_report_csv((fs::path(out_dir) / "report.csv").string(), rows);

    std::vector<int> test_idx;
    for (const auto& e : manifest.samples)
      if (e.split == "test") test_idx.push_back(e.index);
    const int count = std::min<int>(n_panels, static_cast<int>(test_idx.size()));
    for (int k = 0; k < count; ++k) {
      auto pairs = sp::load_pairs_indices(manifest, {test_idx[static_cast<size_t>(k)]});
      std::vector<sp::Image2D> cols = {pairs[0].second, pairs[0].first};
      for (auto& m : models) cols.push_back(m.apply(pairs[0].first));
      sp::render_panel((fs::path(out_dir) / ("panel_" + std::to_string(k) + ".pgm")).string(),
                       cols);
    }
  });
}

sp_status sp_experiment(const char* name, const char* scale, uint64_t seed, int jobs,
                        const char* out_dir) {
  return wrap([&] {
    require_c(name && scale && out_dir, "name/scale/out_dir is null");
    sp::run_experiment(name, scale, seed, jobs, out_dir);
  });
}

sp_status sp_cv_folds(int n_total, int k, int* fold_of_sample) {
  return wrap([&] {
    require_c(fold_of_sample != nullptr, "fold buffer is null");
    std::vector<int> folds = sp::make_cv_folds(n_total, k);
    std::copy(folds.begin(), folds.end(), fold_of_sample);
  });
}

}  // extern "C"
