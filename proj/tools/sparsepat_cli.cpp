// sparsepat command line front end. Talks to the core exclusively through the
// C API in sparsepat/sparsepat.h.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sparsepat/sparsepat.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int fail(sp_status status) {
  std::fprintf(stderr, "error: %s\n", sp_last_error());
  return status == SP_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

bool missing_input(const std::string& path) {
  if (fs::exists(path)) return false;
  std::fprintf(stderr, "error: input path '%s' does not exist\n", path.c_str());
  return true;
}

void write_run_json(const std::string& dir, const json& j) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::FILE* f = std::fopen((fs::path(dir) / "run.json").string().c_str(), "wb");
  if (!f) return;
  const std::string text = j.dump(2) + "\n";
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

struct ImageHandle {
  sp_image* p = nullptr;
  ~ImageHandle() { sp_image_free(p); }
};
struct SensorHandle {
  sp_sensor_data* p = nullptr;
  ~SensorHandle() { sp_sensor_data_free(p); }
};
struct ModelHandle {
  sp_model* p = nullptr;
  ~ModelHandle() { sp_model_free(p); }
};

struct PhantomArgs {
  std::string kind, out = ".", name;
  int size = 64;
  uint64_t seed = 0;
};

int run_phantom(const PhantomArgs& a) {
  const std::string base = a.name.empty() ? a.kind : a.name;
  ImageHandle img;
  if (sp_status s = sp_phantom(a.kind.c_str(), a.size, a.seed, &img.p); s != SP_OK)
    return fail(s);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  const std::string ptns = (fs::path(a.out) / (base + ".ptns")).string();
  const std::string pgm = (fs::path(a.out) / (base + ".pgm")).string();
  if (sp_status s = sp_image_save(img.p, ptns.c_str()); s != SP_OK) return fail(s);
  if (sp_status s = sp_image_save_pgm(img.p, pgm.c_str()); s != SP_OK) return fail(s);
  write_run_json(a.out, json{{"command", "phantom"},
                             {"kind", a.kind},
                             {"size", a.size},
                             {"seed", a.seed},
                             {"out", a.out},
                             {"files", {ptns, pgm}}});
  std::printf("wrote %s and %s\n", ptns.c_str(), pgm.c_str());
  return kExitOk;
}

struct SimulateArgs {
  std::string in, out = ".", name = "sensors";
  int detectors = 30;
  double radius = 0, c = 1500.0, dx = 1e-4, dt = 0;
  int steps = 0, pml = 20;
  double pml_alpha = 2.0;
  bool no_smooth = false;
};

int run_simulate(const SimulateArgs& a) {
  if (missing_input(a.in)) return kExitUsage;
  ImageHandle p0;
  if (sp_status s = sp_image_load(a.in.c_str(), &p0.p); s != SP_OK) return fail(s);
  sp_sim_params par;
  if (sp_status s = sp_sim_params_init(sp_image_size(p0.p), a.detectors, &par); s != SP_OK)
    return fail(s);
  par.sound_speed = a.c;
  par.dx = a.dx;
  par.dt = a.dt;
  par.n_steps = a.steps;
  par.pml_width = a.pml;
  par.pml_alpha = a.pml_alpha;
  par.smooth_p0 = a.no_smooth ? 0 : 1;
  if (a.radius > 0) par.sensor_radius = a.radius;
  SensorHandle data;
  if (sp_status s = sp_simulate(p0.p, &par, &data.p); s != SP_OK) return fail(s);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  const std::string ptns = (fs::path(a.out) / (a.name + ".ptns")).string();
  if (sp_status s = sp_sensor_data_save(data.p, ptns.c_str()); s != SP_OK) return fail(s);
  int n_det = 0, n_steps = 0;
  sp_sensor_data_shape(data.p, &n_det, &n_steps);
  write_run_json(a.out, json{{"command", "simulate"},
                             {"in", a.in},
                             {"detectors", a.detectors},
                             {"unique_detectors", n_det},
                             {"n_steps", n_steps},
                             {"sound_speed", par.sound_speed},
                             {"dx", par.dx},
                             {"dt", par.dt},
                             {"pml_width", par.pml_width},
                             {"pml_alpha", par.pml_alpha},
                             {"smooth_p0", par.smooth_p0},
                             {"sensor_radius", par.sensor_radius},
                             {"out", ptns}});
  std::printf("wrote %s (%d detectors x %d steps) and sidecar\n", ptns.c_str(), n_det,
              n_steps);
  return kExitOk;
}

struct ReconstructArgs {
  std::string in, out = ".", name = "recon";
};

int run_reconstruct(const ReconstructArgs& a) {
  if (missing_input(a.in) || missing_input(a.in + ".json")) return kExitUsage;
  SensorHandle data;
  if (sp_status s = sp_sensor_data_load(a.in.c_str(), &data.p); s != SP_OK) return fail(s);
  ImageHandle img;
  if (sp_status s = sp_time_reverse(data.p, &img.p); s != SP_OK) return fail(s);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  const std::string ptns = (fs::path(a.out) / (a.name + ".ptns")).string();
  const std::string pgm = (fs::path(a.out) / (a.name + ".pgm")).string();
  if (sp_status s = sp_image_save(img.p, ptns.c_str()); s != SP_OK) return fail(s);
  if (sp_status s = sp_image_save_pgm(img.p, pgm.c_str()); s != SP_OK) return fail(s);
  write_run_json(a.out,
                 json{{"command", "reconstruct"}, {"in", a.in}, {"files", {ptns, pgm}}});
  std::printf("wrote %s and %s\n", ptns.c_str(), pgm.c_str());
  return kExitOk;
}

struct DatasetArgs {
  std::string kind, out;
  int n = 10, train_count = -1, detectors = 30, grid = 64, jobs = 0;
  uint64_t seed = 0;
};

int run_make_dataset(const DatasetArgs& a) {
  const int train_count = a.train_count < 0 ? a.n : a.train_count;
  if (sp_status s = sp_make_dataset(a.kind.c_str(), a.n, train_count, a.detectors, a.grid,
                                    a.seed, a.jobs, a.out.c_str());
      s != SP_OK)
    return fail(s);
  write_run_json(a.out, json{{"command", "make-dataset"},
                             {"kind", a.kind},
                             {"n", a.n},
                             {"train_count", train_count},
                             {"detectors", a.detectors},
                             {"grid", a.grid},
                             {"seed", a.seed},
                             {"jobs", a.jobs}});
  std::printf("wrote dataset (%d samples) under %s\n", a.n, a.out.c_str());
  return kExitOk;
}

struct TrainArgs {
  std::string arch = "fd_unet", dataset, out, model;  // model set => fine-tune
  int f1 = 8, k1 = 1, iters = 10000, batch = 3;
  double lr = 1e-4;
  uint64_t seed = 0;
};

int run_train(const TrainArgs& a, bool fine_tune) {
  if (missing_input(a.dataset)) return kExitUsage;
  if (fine_tune && missing_input(a.model)) return kExitUsage;
  ModelHandle model;
  if (fine_tune) {
    if (sp_status s = sp_model_load(a.model.c_str(), &model.p); s != SP_OK) return fail(s);
  } else {
    if (sp_status s = sp_model_build(a.arch.c_str(), a.f1, a.k1, a.seed, &model.p); s != SP_OK)
      return fail(s);
  }
  sp_train_params par;
  sp_train_params_init(&par);
  par.iterations = a.iters;
  par.learning_rate = a.lr;
  par.batch_size = a.batch;
  par.seed = a.seed;
  if (sp_status s = sp_train(model.p, a.dataset.c_str(), &par, a.out.c_str()); s != SP_OK)
    return fail(s);
  write_run_json(a.out, json{{"command", fine_tune ? "fine-tune" : "train"},
                             {"arch", a.arch},
                             {"base_model", a.model},
                             {"f1", a.f1},
                             {"k1", a.k1},
                             {"iterations", a.iters},
                             {"learning_rate", a.lr},
                             {"batch_size", a.batch},
                             {"seed", a.seed},
                             {"dataset", a.dataset},
                             {"params", sp_model_param_count(model.p)}});
  std::printf("trained %lld-parameter model; weights under %s/weights\n",
              static_cast<long long>(sp_model_param_count(model.p)), a.out.c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string model = "none", dataset, split = "test", label, out;
};

int run_eval(const EvalArgs& a) {
  if (missing_input(a.dataset)) return kExitUsage;
  ModelHandle model;
  if (a.model != "none") {
    if (sp_status s = sp_model_load(a.model.c_str(), &model.p); s != SP_OK) return fail(s);
  }
  double psnr = 0, ssim = 0;
  const char* label = a.label.empty() ? nullptr : a.label.c_str();
  if (sp_status s = sp_evaluate(model.p, a.dataset.c_str(), a.split.c_str(), label,
                                a.out.c_str(), &psnr, &ssim);
      s != SP_OK)
    return fail(s);
  write_run_json(fs::path(a.out).parent_path().string().empty()
                     ? "."
                     : fs::path(a.out).parent_path().string(),
                 json{{"command", "eval"},
                      {"model", a.model},
                      {"dataset", a.dataset},
                      {"split", a.split},
                      {"csv", a.out},
                      {"psnr_mean", psnr},
                      {"ssim_mean", ssim}});
  std::printf("%s: PSNR %.3f dB, SSIM %.4f -> %s\n",
              a.model == "none" ? "tr" : a.model.c_str(), psnr, ssim, a.out.c_str());
  return kExitOk;
}

struct ReportArgs {
  std::string dataset, out;
  std::vector<std::string> models;
  int panels = 4;
};

int run_report(const ReportArgs& a) {
  if (missing_input(a.dataset)) return kExitUsage;
  std::vector<const char*> dirs;
  for (const auto& m : a.models) dirs.push_back(m.c_str());
  if (sp_status s = sp_report(a.dataset.c_str(), dirs.empty() ? nullptr : dirs.data(),
                              static_cast<int>(dirs.size()), a.panels, a.out.c_str());
      s != SP_OK)
    return fail(s);
  write_run_json(a.out, json{{"command", "report"},
                             {"dataset", a.dataset},
                             {"models", a.models},
                             {"panels", a.panels}});
  std::printf("wrote report.csv and %d panel(s) under %s\n", a.panels, a.out.c_str());
  return kExitOk;
}

struct ExperimentArgs {
  std::string name, scale = "desk", out;
  uint64_t seed = 0;
  int jobs = 0;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  if (sp_status s = sp_experiment(a.name.c_str(), a.scale.c_str(), a.seed, a.jobs,
                                  a.out.c_str());
      s != SP_OK)
    return fail(s);
  std::printf("experiment %s (%s) complete under %s\n", a.name.c_str(), a.scale.c_str(),
              a.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse-sampling photoacoustic tomography toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "structured-text config file (TOML/INI; flags override)");

  PhantomArgs ph;
  auto* cmd_ph = app.add_subcommand("phantom", "generate a ground-truth phantom image");
  cmd_ph->add_option("--kind", ph.kind, "circles | shepp_logan | vessels | vessels_complex")
      ->required();
  cmd_ph->add_option("--size", ph.size, "image side in pixels");
  cmd_ph->add_option("--seed", ph.seed, "master seed");
  cmd_ph->add_option("--out", ph.out, "output directory");
  cmd_ph->add_option("--name", ph.name, "output base name (default: kind)");

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "forward-simulate sensor data from a phantom");
  cmd_sim->add_option("--in", sim.in, "input phantom PTNS")->required();
  cmd_sim->add_option("--detectors", sim.detectors, "detector count");
  cmd_sim->add_option("--radius", sim.radius, "sensor ring radius in px (default grid*30/64)");
  cmd_sim->add_option("--c", sim.c, "sound speed m/s");
  cmd_sim->add_option("--dx", sim.dx, "pixel spacing m");
  cmd_sim->add_option("--dt", sim.dt, "time step s (default CFL 0.3)");
  cmd_sim->add_option("--steps", sim.steps, "time steps (default two diagonal crossings)");
  cmd_sim->add_option("--pml", sim.pml, "PML width in grid points");
  cmd_sim->add_option("--pml-alpha", sim.pml_alpha, "PML absorption in nepers");
  cmd_sim->add_flag("--no-smooth", sim.no_smooth, "skip source smoothing");
  cmd_sim->add_option("--out", sim.out, "output directory");
  cmd_sim->add_option("--name", sim.name, "output base name");

  ReconstructArgs rec;
  auto* cmd_rec = app.add_subcommand("reconstruct", "time-reverse sensor data into an image");
  cmd_rec->add_option("--in", rec.in, "input sensor PTNS (sidecar JSON required)")->required();
  cmd_rec->add_option("--out", rec.out, "output directory");
  cmd_rec->add_option("--name", rec.name, "output base name");

  DatasetArgs ds;
  auto* cmd_ds = app.add_subcommand("make-dataset", "generate an (X, Y) training dataset");
  cmd_ds->add_option("--kind", ds.kind, "circles | shepp_logan | vessels | vessels_complex")
      ->required();
  cmd_ds->add_option("--n", ds.n, "sample count")->required();
  cmd_ds->add_option("--train-count", ds.train_count, "samples labeled train (default all)");
  cmd_ds->add_option("--detectors", ds.detectors, "detector count");
  cmd_ds->add_option("--grid", ds.grid, "grid side in pixels");
  cmd_ds->add_option("--seed", ds.seed, "master seed");
  cmd_ds->add_option("--jobs", ds.jobs, "parallel workers (0 = auto)")
      ->envname("SPARSEPAT_JOBS");
  cmd_ds->add_option("--out", ds.out, "output directory")->required();

  TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "train a model on a dataset");
  cmd_tr->add_option("--arch", tr.arch, "unet | fd_unet");
  cmd_tr->add_option("--f1", tr.f1, "initial feature maps");
  cmd_tr->add_option("--k1", tr.k1, "initial growth rate (fd_unet)");
  cmd_tr->add_option("--iters", tr.iters, "training iterations");
  cmd_tr->add_option("--lr", tr.lr, "learning rate");
  cmd_tr->add_option("--batch", tr.batch, "mini-batch size");
  cmd_tr->add_option("--seed", tr.seed, "seed (init + batch sampling)");
  cmd_tr->add_option("--dataset", tr.dataset, "manifest.json path")->required();
  cmd_tr->add_option("--out", tr.out, "output directory")->required();

  TrainArgs ft;
  ft.iters = 5000;
  auto* cmd_ft = app.add_subcommand("fine-tune", "continue training a saved model");
  cmd_ft->add_option("--model", ft.model, "weights directory")->required();
  cmd_ft->add_option("--iters", ft.iters, "fine-tuning iterations");
  cmd_ft->add_option("--lr", ft.lr, "learning rate");
  cmd_ft->add_option("--batch", ft.batch, "mini-batch size");
  cmd_ft->add_option("--seed", ft.seed, "seed");
  cmd_ft->add_option("--dataset", ft.dataset, "manifest.json path")->required();
  cmd_ft->add_option("--out", ft.out, "output directory")->required();

  EvalArgs ev;
  auto* cmd_ev = app.add_subcommand("eval", "score a model (or the TR baseline) on a dataset");
  cmd_ev->add_option("--model", ev.model, "weights directory, or 'none' for the TR row");
  cmd_ev->add_option("--dataset", ev.dataset, "manifest.json path")->required();
  cmd_ev->add_option("--split", ev.split, "train | test");
  cmd_ev->add_option("--label", ev.label, "method label for the CSV row");
  cmd_ev->add_option("--out", ev.out, "CSV path (appended)")->required();

  ReportArgs rp;
  auto* cmd_rp = app.add_subcommand("report", "CSV table plus side-by-side image panels");
  cmd_rp->add_option("--dataset", rp.dataset, "manifest.json path")->required();
  cmd_rp->add_option("--model", rp.models, "weights directory (repeatable)");
  cmd_rp->add_option("--panels", rp.panels, "number of test panels");
  cmd_rp->add_option("--out", rp.out, "output directory")->required();

  ExperimentArgs ex;
  auto* cmd_ex = app.add_subcommand("experiment", "run a registered experiment");
  cmd_ex->add_option("--name", ex.name, "exp1_circles | exp2_transfer | exp3_vessels")
      ->required();
  cmd_ex->add_option("--scale", ex.scale, "desk | full");
  cmd_ex->add_option("--seed", ex.seed, "master seed");
  cmd_ex->add_option("--jobs", ex.jobs, "parallel workers (0 = auto)")
      ->envname("SPARSEPAT_JOBS");
  cmd_ex->add_option("--out", ex.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_ph->parsed()) return run_phantom(ph);
    if (cmd_sim->parsed()) return run_simulate(sim);
    if (cmd_rec->parsed()) return run_reconstruct(rec);
    if (cmd_ds->parsed()) return run_make_dataset(ds);
    if (cmd_tr->parsed()) return run_train(tr, false);
    if (cmd_ft->parsed()) return run_train(ft, true);
    if (cmd_ev->parsed()) return run_eval(ev);
    if (cmd_rp->parsed()) return run_report(rp);
    if (cmd_ex->parsed()) return run_experiment_cmd(ex);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
