#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <map>

#include "sparsepat/io.hpp"
#include "sparsepat/networks.hpp"
#include "sparsepat/rng.hpp"
#include "testers.hpp"

using namespace sparsepat;

namespace {

// Collects per-dense-block conv kernel sizes and channel counts for audits.
struct BlockAudit {
  int conv1x1 = 0, conv3x3 = 0;
  std::vector<int> layer_in_channels;  // input channels of each 1x1 squeeze
};

std::map<std::string, BlockAudit> audit_dense_blocks(const std::vector<LayerDesc>& layers) {
  std::map<std::string, BlockAudit> blocks;
  for (const auto& l : layers) {
    if (l.op != "conv") continue;
    auto pos = l.name.find(".db.");
    if (pos == std::string::npos) continue;
    const std::string block = l.name.substr(0, pos + 3);
    auto& audit = blocks[block];
    if (l.kernel == 1 && l.name.find(".squeeze.") != std::string::npos) {
      ++audit.conv1x1;
      audit.layer_in_channels.push_back(l.in_ch);
    } else if (l.kernel == 3) {
      ++audit.conv3x3;
    } else if (l.kernel == 1) {
      ++audit.conv1x1;
    }
  }
  return blocks;
}

}  // namespace

TEST_CASE("dense block channel algebra") {
  CHECK(dense_block_out_channels(4, 1, 4) == 8);
  CHECK(dense_block_out_channels(32, 8, 4) == 64);
  CHECK(dense_layer_in_channels(8, 2, 3) == 12);
}

TEST_CASE("fd-unet rejects f1 != 8*k1 and unet rejects tiny f1") {
  CHECK_THROWS_WITH_AS(build_fd_unet(12, 1, 0), doctest::Contains("f1 = 8*k1"),
                       InvalidArgument);
  CHECK_THROWS_AS(build_unet(1, 0), InvalidArgument);
}

TEST_CASE("parameter counts reproduce the published scale") {
  Model<float> unet64 = build_unet(64, 1);
  const double u64 = static_cast<double>(unet64.param_count());
  CHECK(u64 > 31.0e6 * 0.85);
  CHECK(u64 < 31.0e6 * 1.15);

  Model<float> unet8 = build_unet(8, 1);
  const double u8 = static_cast<double>(unet8.param_count());
  CHECK(u8 > 487.0e3 * 0.85);
  CHECK(u8 < 487.0e3 * 1.15);

  Model<float> fd64 = build_fd_unet(64, 8, 1);
  const double f64v = static_cast<double>(fd64.param_count());
  CHECK(f64v > 9.4e6 * 0.8);
  CHECK(f64v < 9.4e6 * 1.2);
}

TEST_CASE("fd-unet / unet parameter ratio is about a third") {
  for (int f1 : {8, 16, 32, 64}) {
    Model<float> u = build_unet(f1, 0);
    Model<float> f = build_fd_unet(f1, f1 / 8, 0);
    const double ratio =
        static_cast<double>(f.param_count()) / static_cast<double>(u.param_count());
    INFO("f1=", f1, " ratio=", ratio);
    CHECK(ratio >= 0.25);
    CHECK(ratio <= 0.40);
  }
}

TEST_CASE("doubling f1 roughly quadruples the unet parameter count") {
  int64_t prev = build_unet(8, 0).param_count();
  for (int f1 : {16, 32, 64}) {
    int64_t cur = build_unet(f1, 0).param_count();
    const double growth = static_cast<double>(cur) / static_cast<double>(prev);
    CHECK(growth >= 3.9);
    CHECK(growth <= 4.1);
    prev = cur;
  }
}

TEST_CASE("param_count is deterministic, seed independent, monotone in f1") {
  CHECK(build_fd_unet(8, 1, 1).param_count() == build_fd_unet(8, 1, 99).param_count());
  CHECK(build_unet(8, 3).param_count() == build_unet(8, 4).param_count());
  int64_t prev_u = 0, prev_f = 0;
  for (int f1 : {8, 16, 32, 64}) {
    int64_t u = build_unet(f1, 0).param_count();
    int64_t f = build_fd_unet(f1, f1 / 8, 0).param_count();
    CHECK(u > prev_u);
    CHECK(f > prev_f);
    prev_u = u;
    prev_f = f;
  }
}

TEST_CASE("a single 3x3 conv with bias holds ten trainable values") {
  Parameter<float> w(TensorF({1, 1, 3, 3}));
  Parameter<float> b(TensorF({1}));
  CHECK(w.value.numel() + b.value.numel() == 10);
}

TEST_CASE("fd-unet contracting channel schedule is 8,16,32,64,128 at k1=1") {
  Model<float> m = build_fd_unet(8, 1, 0);
  std::vector<int> contracting;
  for (const auto& l : m.layers) {
    if (l.op == "concat" && l.name.find(".cat4") != std::string::npos &&
        (l.name.rfind("enc", 0) == 0 || l.name.rfind("bottleneck", 0) == 0))
      contracting.push_back(l.out_ch);
  }
  CHECK(contracting == std::vector<int>{8, 16, 32, 64, 128});
}

TEST_CASE("every dense block has four 1x1 and four 3x3 convolutions") {
  for (int f1 : {8, 16}) {
    Model<float> m = build_fd_unet(f1, f1 / 8, 0);
    auto blocks = audit_dense_blocks(m.layers);
    CHECK(blocks.size() == 9);  // 4 contracting + bottleneck + 4 expanding
    for (const auto& [name, audit] : blocks) {
      INFO("block ", name);
      CHECK(audit.conv1x1 == 4);
      CHECK(audit.conv3x3 == 4);
    }
  }
}

TEST_CASE("dense block layer inputs follow F + k*(l-1)") {
  Model<float> m = build_fd_unet(16, 2, 0);
  auto blocks = audit_dense_blocks(m.layers);
  for (const auto& [name, audit] : blocks) {
    REQUIRE(audit.layer_in_channels.size() == 4);
    // recover F and k from the block head: first layer input is F
    const int F = audit.layer_in_channels[0];
    for (int l = 1; l <= 4; ++l) {
      const int k = (audit.layer_in_channels[1] - F);  // growth per layer
      CHECK(audit.layer_in_channels[static_cast<size_t>(l - 1)] ==
            dense_layer_in_channels(F, k, l));
    }
  }
}

TEST_CASE("forward preserves shape and is the identity at the zero-initialized head") {
  Rng rng(7);
  for (auto arch : {ArchKind::kUNet, ArchKind::kFdUNet}) {
    ArchSpec spec;
    spec.kind = arch;
    spec.f1 = 8;
    spec.k1 = 1;
    Model<float> m = build_model<float>(spec, 11);
    TensorF x = testers::random_tensor<float>(rng, {1, 1, 64, 64});
    TensorF y = m.forward_eval(x);
    REQUIRE(y.shape() == x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);  // bit-exact residual start
  }
}

TEST_CASE("forward rejects indivisible spatial sizes and wrong channel counts") {
  Model<float> m = build_fd_unet(8, 1, 0);
  CHECK_THROWS_AS(m.forward_eval(TensorF({1, 1, 40, 40})), InvalidArgument);
  CHECK_THROWS_AS(m.forward_eval(TensorF({1, 2, 64, 64})), InvalidArgument);
  CHECK_NOTHROW(m.forward_eval(TensorF({1, 1, 48, 48})));
}

TEST_CASE("model save/load round trip preserves weights and outputs") {
  namespace fs = std::filesystem;
  const std::string dir = "/tmp/sparsepat_test_model";
  fs::remove_all(dir);
  Model<float> m = build_fd_unet(8, 1, 42);
  // make the model non-trivial so the round trip is meaningful
  Rng rng(3);
  for (auto& [name, p] : m.params)
    for (int64_t i = 0; i < p.value.numel(); ++i)
      p.value[i] += static_cast<float>(rng.uniform(-0.01, 0.01));
  save_model(m, dir);
  Model<float> loaded = load_model(dir);
  CHECK(loaded.arch.f1 == 8);
  CHECK(loaded.param_count() == m.param_count());
  for (const auto& [name, p] : m.params) {
    const auto& q = loaded.params.at(name);
    REQUIRE(q.value.shape() == p.value.shape());
    for (int64_t i = 0; i < p.value.numel(); ++i) CHECK(q.value[i] == p.value[i]);
  }
  TensorF x = testers::random_tensor<float>(rng, {1, 1, 32, 32});
  TensorF a = m.forward_eval(x);
  TensorF b = loaded.forward_eval(x);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("model load rejects tampered weight files") {
  namespace fs = std::filesystem;
  const std::string dir = "/tmp/sparsepat_test_model_tamper";
  fs::remove_all(dir);
  Model<float> m = build_unet(8, 1);
  save_model(m, dir);
  // flip one payload byte in some parameter blob
  const std::string victim = dir + "/params/head.b.ptns";
  auto raw = read_text_file(victim);
  raw[raw.size() - 1] = static_cast<char>(raw[raw.size() - 1] ^ 0x01);
  write_text_file(victim, raw);
  CHECK_THROWS_AS(load_model(dir), IoError);
}
