// CLI contract tests: exit codes, determinism, file outputs. Drives the
// installed binary (path passed as argv[1]) through a shell.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "sparsepat/io.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;
int g_failures = 0;

void expect(bool ok, const std::string& what) {
  if (ok) {
    std::printf("[ok] %s\n", what.c_str());
  } else {
    std::printf("[FAILED] %s\n", what.c_str());
    ++g_failures;
  }
}

int run(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

uint64_t file_hash(const std::string& path) { return sparsepat::fnv1a64_file(path); }

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <path-to-sparsepat-binary>\n");
    return 2;
  }
  g_cli = argv[1];
  const std::string work = "/tmp/sparsepat_test_cli";
  fs::remove_all(work);
  fs::create_directories(work);

  expect(run("--help") == 0, "--help exits 0");
  expect(run("phantom --help") == 0, "phantom --help exits 0");
  expect(run("train --help") == 0, "train --help exits 0");
  expect(run("--definitely-not-a-flag") == 2, "unknown flag exits 2");
  expect(run("phantom --kind circles --size 64 --seed 1 --bogus-flag x") == 2,
         "unknown subcommand flag exits 2");
  expect(run("") == 2, "missing subcommand exits 2");
  expect(run("phantom --kind bogus --size 64 --out " + work) == 2,
         "unknown phantom kind exits 2");
  expect(run("simulate --in " + work + "/does_not_exist.ptns --out " + work) == 2,
         "missing input path exits 2");
  expect(run("experiment --name nope --out " + work + "/exp") == 2,
         "unknown experiment exits 2");

  // deterministic phantom output, PGM peak at 255
  expect(run("phantom --kind circles --size 64 --seed 7 --out " + work + "/p1") == 0,
         "phantom generation succeeds");
  expect(run("phantom --kind circles --size 64 --seed 7 --out " + work + "/p2") == 0,
         "second phantom generation succeeds");
  expect(file_hash(work + "/p1/circles.ptns") == file_hash(work + "/p2/circles.ptns"),
         "identical seeds give byte-identical phantoms");
  expect(fs::exists(work + "/p1/run.json"), "run.json echoes the configuration");
  {
    std::string pgm = sparsepat::read_text_file(work + "/p1/circles.pgm");
    expect(pgm.find(static_cast<char>(255)) != std::string::npos,
           "PGM max pixel is 255 for a nonzero phantom");
  }

  // simulate -> reconstruct chain
  expect(run("simulate --in " + work + "/p1/circles.ptns --detectors 12 --out " + work +
             "/sim") == 0,
         "simulate succeeds");
  expect(fs::exists(work + "/sim/sensors.ptns.json"), "sensor sidecar written");
  expect(run("reconstruct --in " + work + "/sim/sensors.ptns --out " + work + "/rec") == 0,
         "reconstruct succeeds");
  expect(fs::exists(work + "/rec/recon.pgm"), "reconstruction PGM written");

  // dataset -> train -> eval chain (tiny sizes, grid 32)
  expect(run("make-dataset --kind circles --n 5 --train-count 3 --detectors 8 --grid 32 "
             "--seed 5 --jobs 2 --out " +
             work + "/ds") == 0,
         "make-dataset succeeds");
  expect(run("train --arch fd_unet --f1 8 --k1 1 --iters 6 --seed 1 --dataset " + work +
             "/ds/manifest.json --out " + work + "/m1") == 0,
         "training succeeds");
  expect(run("train --arch fd_unet --f1 8 --k1 1 --iters 6 --seed 1 --dataset " + work +
             "/ds/manifest.json --out " + work + "/m2") == 0,
         "second training succeeds");
  expect(file_hash(work + "/m1/weights/checksums.txt") ==
             file_hash(work + "/m2/weights/checksums.txt"),
         "training twice with one seed gives identical weight checksums");

  expect(run("eval --model none --dataset " + work + "/ds/manifest.json --split test --out " +
             work + "/eval.csv") == 0,
         "eval with model none produces the TR baseline row");
  {
    std::string csv = sparsepat::read_text_file(work + "/eval.csv");
    expect(csv.rfind("method,f1,k1,detectors,n_images,psnr_mean,psnr_std,ssim_mean,"
                     "ssim_std,params\n",
                     0) == 0,
           "eval CSV starts with the schema header");
    expect(csv.find("\ntr,0,0,8,") != std::string::npos, "eval CSV contains the tr row");
  }

  expect(run("fine-tune --model " + work + "/m1/weights --iters 3 --seed 2 --dataset " +
             work + "/ds/manifest.json --out " + work + "/ft") == 0,
         "fine-tune on a saved model succeeds");

  expect(run("report --dataset " + work + "/ds/manifest.json --model " + work +
             "/m1/weights --panels 1 --out " + work + "/rep") == 0,
         "report succeeds");
  expect(fs::exists(work + "/rep/report.csv") && fs::exists(work + "/rep/panel_0.pgm"),
         "report writes CSV and panels");

  // config file: flags override config values
  {
    std::ofstream cfg(work + "/conf.toml");
    cfg << "[phantom]\nkind = \"circles\"\nsize = 32\nseed = 3\n";
    cfg.close();
    expect(run("phantom --config " + work + "/conf.toml --out " + work + "/pc") == 0,
           "config file supplies defaults");
    expect(run("phantom --config " + work + "/conf.toml --seed 9 --out " + work + "/pc2") ==
               0,
           "flag overrides config value");
    expect(file_hash(work + "/pc/circles.ptns") != file_hash(work + "/pc2/circles.ptns"),
           "overridden seed changes the output");
  }

  if (g_failures == 0) {
    std::printf("test_cli: all checks passed\n");
    return 0;
  }
  std::printf("test_cli: %d check(s) FAILED\n", g_failures);
  return 1;
}
