#include "sparsepat/networks.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sparsepat/image.hpp"
#include "sparsepat/io.hpp"
#include "sparsepat/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sparsepat {

std::string arch_kind_name(ArchKind kind) {
  return kind == ArchKind::kUNet ? "unet" : "fd_unet";
}

ArchKind arch_kind_from_name(const std::string& name) {
  if (name == "unet") return ArchKind::kUNet;
  if (name == "fd_unet") return ArchKind::kFdUNet;
  throw InvalidArgument("unknown architecture '" + name + "' (expected unet or fd_unet)");
}

namespace {

struct GraphBuilder {
  std::vector<LayerDesc> layers;
  std::unordered_map<std::string, int> channels;  // output channels per value name

  int ch(const std::string& name) const {
    auto it = channels.find(name);
    if (it == channels.end()) throw InvalidArgument("layer input '" + name + "' is undefined");
    return it->second;
  }

  std::string conv(const std::string& name, const std::string& in, int out_ch, int kernel,
                   bool zero_init = false) {
    LayerDesc d;
    d.name = name;
    d.op = "conv";
    d.inputs = {in};
    d.in_ch = ch(in);
    d.out_ch = out_ch;
    d.kernel = kernel;
    d.pad = kernel == 3 ? 1 : 0;
    d.zero_init = zero_init;
    layers.push_back(d);
    channels[name] = out_ch;
    return name;
  }

  std::string bn_relu(const std::string& prefix, const std::string& in) {
    LayerDesc bn;
    bn.name = prefix + ".bn";
    bn.op = "bn";
    bn.inputs = {in};
    bn.in_ch = bn.out_ch = ch(in);
    layers.push_back(bn);
    channels[bn.name] = bn.out_ch;
    LayerDesc act;
    act.name = prefix + ".relu";
    act.op = "relu";
    act.inputs = {bn.name};
    act.in_ch = act.out_ch = bn.out_ch;
    layers.push_back(act);
    channels[act.name] = act.out_ch;
    return act.name;
  }

  std::string conv_bn_relu(const std::string& prefix, const std::string& in, int out_ch,
                           int kernel) {
    conv(prefix + ".conv", in, out_ch, kernel);
    return bn_relu(prefix, prefix + ".conv");
  }

  std::string maxpool(const std::string& name, const std::string& in) {
    LayerDesc d;
    d.name = name;
    d.op = "maxpool";
    d.inputs = {in};
    d.in_ch = d.out_ch = ch(in);
    layers.push_back(d);
    channels[name] = d.out_ch;
    return name;
  }

  std::string upconv(const std::string& name, const std::string& in, int out_ch) {
    LayerDesc d;
    d.name = name;
    d.op = "upconv";
    d.inputs = {in};
    d.in_ch = ch(in);
    d.out_ch = out_ch;
    d.kernel = 2;
    d.stride = 2;
    layers.push_back(d);
    channels[name] = out_ch;
    return name;
  }

  std::string concat(const std::string& name, const std::string& a, const std::string& b) {
    LayerDesc d;
    d.name = name;
    d.op = "concat";
    d.inputs = {a, b};
    d.in_ch = ch(a) + ch(b);
    d.out_ch = d.in_ch;
    layers.push_back(d);
    channels[name] = d.out_ch;
    return name;
  }

  std::string add(const std::string& name, const std::string& a, const std::string& b) {
    if (ch(a) != ch(b))
      throw InvalidArgument("residual add channel mismatch: " + a + " vs " + b);
    LayerDesc d;
    d.name = name;
    d.op = "add";
    d.inputs = {a, b};
    d.in_ch = d.out_ch = ch(a);
    layers.push_back(d);
    channels[name] = d.out_ch;
    return name;
  }

  // Dense block: L layers of (1x1 conv to F -> BN -> ReLU -> 3x3 conv to k ->
  // BN -> ReLU), each consuming the concatenation of the block input and all
  // previous layer outputs.
  std::string dense_block(const std::string& prefix, const std::string& in, int F, int k,
                          int L = 4) {
    if (ch(in) != F)
      throw InvalidArgument("dense block " + prefix + " expects " + std::to_string(F) +
                            " input channels, got " + std::to_string(ch(in)));
    std::string cat = in;
    for (int l = 1; l <= L; ++l) {
      const std::string lp = prefix + ".l" + std::to_string(l);
      if (ch(cat) != dense_layer_in_channels(F, k, l))
        throw InvalidArgument("dense block channel algebra broken at " + lp);
      conv(lp + ".squeeze.conv", cat, F, 1);
      std::string squeezed = bn_relu(lp + ".squeeze", lp + ".squeeze.conv");
      conv(lp + ".grow.conv", squeezed, k, 3);
      std::string grown = bn_relu(lp + ".grow", lp + ".grow.conv");
      cat = concat(prefix + ".cat" + std::to_string(l), cat, grown);
    }
    if (ch(cat) != dense_block_out_channels(F, k, L))
      throw InvalidArgument("dense block output channels broken at " + prefix);
    return cat;
  }
};

std::vector<LayerDesc> describe_unet(const ArchSpec& spec) {
  const int f1 = spec.f1;
  require(f1 >= 2, "build_unet requires f1 >= 2");
  if (f1 != 8 && f1 != 16 && f1 != 32 && f1 != 64)
    std::fprintf(stderr, "warning: unet f1=%d is outside the studied set {8,16,32,64}\n", f1);

  GraphBuilder g;
  g.channels["input"] = 1;
  std::vector<std::string> skips;
  std::string cur = "input";
  for (int i = 1; i <= spec.levels; ++i) {
    const int c = f1 << (i - 1);
    const std::string p = "enc" + std::to_string(i);
    cur = g.conv_bn_relu(p + ".a", cur, c, 3);
    cur = g.conv_bn_relu(p + ".b", cur, c, 3);
    if (i < spec.levels) {
      skips.push_back(cur);
      cur = g.maxpool(p + ".pool", cur);
    }
  }
  for (int i = spec.levels - 1; i >= 1; --i) {
    const int c = f1 << (i - 1);
    const std::string p = "dec" + std::to_string(i);
    cur = g.upconv(p + ".up", cur, c);
    cur = g.concat(p + ".cat", cur, skips[static_cast<size_t>(i - 1)]);
    cur = g.conv_bn_relu(p + ".a", cur, c, 3);
    cur = g.conv_bn_relu(p + ".b", cur, c, 3);
  }
  g.conv("head", cur, 1, 1, /*zero_init=*/true);
  g.add("output", "head", "input");
  return g.layers;
}

std::vector<LayerDesc> describe_fd_unet(const ArchSpec& spec) {
  const int f1 = spec.f1, k1 = spec.k1;
  if (f1 != 8 * k1)
    throw InvalidArgument("build_fd_unet requires f1 = 8*k1; got f1=" + std::to_string(f1) +
                          ", k1=" + std::to_string(k1));

  GraphBuilder g;
  g.channels["input"] = 1;
  auto growth = [&](int level) { return k1 << (level - 1); };

  std::string cur = g.conv_bn_relu("stem", "input", f1 / 2, 3);
  std::vector<std::string> skips;
  for (int i = 1; i < spec.levels; ++i) {
    const int k = growth(i);
    cur = g.dense_block("enc" + std::to_string(i) + ".db", cur, 4 * k, k);
    skips.push_back(cur);
    cur = g.maxpool("enc" + std::to_string(i) + ".pool", cur);
  }
  {
    const int k = growth(spec.levels);
    cur = g.dense_block("bottleneck.db", cur, 4 * k, k);
  }
  for (int i = spec.levels - 1; i >= 1; --i) {
    const int k = growth(i);
    const std::string p = "dec" + std::to_string(i);
    cur = g.upconv(p + ".up", cur, 8 * k);
    cur = g.concat(p + ".cat", cur, skips[static_cast<size_t>(i - 1)]);
    g.conv(p + ".reduce.conv", cur, 4 * k, 1);
    cur = g.bn_relu(p + ".reduce", p + ".reduce.conv");
    cur = g.dense_block(p + ".db", cur, 4 * k, k);
  }
  g.conv("head", cur, 1, 1, /*zero_init=*/true);
  g.add("output", "head", "input");
  return g.layers;
}

}  // namespace

std::vector<LayerDesc> describe_layers(const ArchSpec& spec) {
  require(spec.levels == 5, "architectures are defined for 5 levels");
  return spec.kind == ArchKind::kUNet ? describe_unet(spec) : describe_fd_unet(spec);
}

template <typename T>
Model<T> build_model(const ArchSpec& spec, uint64_t seed) {
  Model<T> m;
  m.arch = spec;
  m.seed = seed;
  m.layers = describe_layers(spec);
  Rng rng(seed);
  for (const auto& layer : m.layers) {
    if (layer.op == "conv" || layer.op == "upconv") {
      std::vector<int64_t> wshape =
          layer.op == "conv"
              ? std::vector<int64_t>{layer.out_ch, layer.in_ch, layer.kernel, layer.kernel}
              : std::vector<int64_t>{layer.in_ch, layer.out_ch, layer.kernel, layer.kernel};
      Tensor<T> w(wshape);
      if (!layer.zero_init) {
        // Kaiming-uniform, fan-in mode
        const double fan_in = static_cast<double>(layer.in_ch) * layer.kernel * layer.kernel;
        const double bound = std::sqrt(6.0 / fan_in);
        for (int64_t i = 0; i < w.numel(); ++i)
          w[i] = static_cast<T>(rng.uniform(-bound, bound));
      }
      m.params.emplace(layer.name + ".w", Parameter<T>(std::move(w)));
      m.params.emplace(layer.name + ".b",
                       Parameter<T>(Tensor<T>({static_cast<int64_t>(layer.out_ch)})));
    } else if (layer.op == "bn") {
      m.params.emplace(layer.name + ".gamma",
                       Parameter<T>(Tensor<T>::full({layer.out_ch}, T(1))));
      m.params.emplace(layer.name + ".beta",
                       Parameter<T>(Tensor<T>({static_cast<int64_t>(layer.out_ch)})));
      m.states.emplace(layer.name, BatchNormState<T>::unit(layer.out_ch));
    }
  }
  return m;
}

template <typename T>
Var<T> Model<T>::forward(Tape<T>& tape, Var<T> x, Mode mode) {
  if (x->value.rank() != 4 || x->value.dim(1) != 1)
    throw InvalidArgument("model input must be (batch, 1, h, w), got " +
                          x->value.shape_string());
  if (x->value.dim(2) % 16 != 0 || x->value.dim(3) % 16 != 0)
    throw InvalidArgument("model input spatial dims must be divisible by 16, got " +
                          x->value.shape_string());
  std::unordered_map<std::string, Var<T>> env;
  env["input"] = x;
  for (const auto& layer : this->layers) {
    const Var<T>& a = env.at(layer.inputs[0]);
    if (layer.op == "conv") {
      env[layer.name] = tape.conv2d(a, tape.param(params.at(layer.name + ".w")),
                                    tape.param(params.at(layer.name + ".b")), layer.stride,
                                    layer.pad);
    } else if (layer.op == "upconv") {
      env[layer.name] = tape.up_conv2(a, tape.param(params.at(layer.name + ".w")),
                                      tape.param(params.at(layer.name + ".b")));
    } else if (layer.op == "bn") {
      env[layer.name] =
          tape.batch_norm(a, tape.param(params.at(layer.name + ".gamma")),
                          tape.param(params.at(layer.name + ".beta")), states.at(layer.name),
                          mode);
    } else if (layer.op == "relu") {
      env[layer.name] = tape.relu(a);
    } else if (layer.op == "maxpool") {
      env[layer.name] = tape.max_pool2(a);
    } else if (layer.op == "concat") {
      env[layer.name] = tape.concat_channels(a, env.at(layer.inputs[1]));
    } else if (layer.op == "add") {
      env[layer.name] = tape.add(a, env.at(layer.inputs[1]));
    } else {
      throw InvalidArgument("unknown layer op '" + layer.op + "'");
    }
  }
  return env.at(layers.back().name);
}

template <typename T>
Tensor<T> Model<T>::forward_eval(const Tensor<T>& x) {
  Tape<T> tape;
  Var<T> in = tape.value(x);
  return forward(tape, in, Mode::kEval)->value;
}

template <typename T>
Image2D Model<T>::apply(const Image2D& x) {
  Tensor<T> in({1, 1, x.size, x.size});
  for (size_t i = 0; i < x.pixels.size(); ++i) in[static_cast<int64_t>(i)] = T(x.pixels[i]);
  Tensor<T> out = forward_eval(in);
  Image2D y(x.size, x.pixel_spacing);
  for (size_t i = 0; i < y.pixels.size(); ++i)
    y.pixels[i] = static_cast<float>(out[static_cast<int64_t>(i)]);
  return y;
}

template <typename T>
int64_t Model<T>::param_count() const {
  int64_t n = 0;
  for (const auto& [name, p] : params)
    if (p.trainable) n += p.value.numel();
  return n;
}

Model<float> build_unet(int f1, uint64_t seed) {
  ArchSpec spec;
  spec.kind = ArchKind::kUNet;
  spec.f1 = f1;
  spec.k1 = 0;
  return build_model<float>(spec, seed);
}

Model<float> build_fd_unet(int f1, int k1, uint64_t seed) {
  ArchSpec spec;
  spec.kind = ArchKind::kFdUNet;
  spec.f1 = f1;
  spec.k1 = k1;
  return build_model<float>(spec, seed);
}

void save_model(const Model<float>& model, const std::string& dir) {
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "params");
  json j;
  j["format"] = 1;
  j["arch"] = {{"kind", arch_kind_name(model.arch.kind)},
               {"f1", model.arch.f1},
               {"k1", model.arch.k1},
               {"levels", model.arch.levels}};
  j["seed"] = model.seed;
  j["layers"] = json::array();
  for (const auto& l : model.layers) {
    j["layers"].push_back({{"name", l.name},
                           {"op", l.op},
                           {"inputs", l.inputs},
                           {"in_ch", l.in_ch},
                           {"out_ch", l.out_ch},
                           {"kernel", l.kernel},
                           {"stride", l.stride},
                           {"pad", l.pad},
                           {"zero_init", l.zero_init}});
  }
  std::string checksums;
  j["params"] = json::array();
  for (const auto& [name, p] : model.params) {
    const std::string rel = "params/" + name + ".ptns";
    write_ptns((fs::path(dir) / rel).string(), p.value);
    j["params"].push_back({{"name", name}, {"shape", p.value.shape()}, {"file", rel}});
    checksums += hash_hex(fnv1a64_file((fs::path(dir) / rel).string())) + "  " + rel + "\n";
  }
  j["bn_states"] = json::array();
  for (const auto& [name, s] : model.states) {
    const int64_t c = static_cast<int64_t>(s.mean.size());
    TensorF t({2, c});
    for (int64_t i = 0; i < c; ++i) {
      t[i] = s.mean[static_cast<size_t>(i)];
      t[c + i] = s.var[static_cast<size_t>(i)];
    }
    const std::string rel = "params/" + name + ".state.ptns";
    write_ptns((fs::path(dir) / rel).string(), t);
    j["bn_states"].push_back({{"layer", name}, {"file", rel}, {"initialized", s.initialized}});
    checksums += hash_hex(fnv1a64_file((fs::path(dir) / rel).string())) + "  " + rel + "\n";
  }
  write_text_file((fs::path(dir) / "model.json").string(), j.dump(2) + "\n");
  write_text_file((fs::path(dir) / "checksums.txt").string(), checksums);
}

Model<float> load_model(const std::string& dir) {
  json j = json::parse(read_text_file((fs::path(dir) / "model.json").string()));
  ArchSpec spec;
  spec.kind = arch_kind_from_name(j["arch"]["kind"].get<std::string>());
  spec.f1 = j["arch"]["f1"].get<int>();
  spec.k1 = j["arch"]["k1"].get<int>();
  spec.levels = j["arch"]["levels"].get<int>();
  Model<float> m = build_model<float>(spec, j["seed"].get<uint64_t>());

  // verify the checksum file before trusting any blob
  for (const std::string& line :
       [&] {
         std::vector<std::string> lines;
         std::string text = read_text_file((fs::path(dir) / "checksums.txt").string());
         size_t pos = 0;
         while (pos < text.size()) {
           size_t nl = text.find('\n', pos);
           if (nl == std::string::npos) nl = text.size();
           if (nl > pos) lines.push_back(text.substr(pos, nl - pos));
           pos = nl + 1;
         }
         return lines;
       }()) {
    const size_t sep = line.find("  ");
    if (sep == std::string::npos) throw IoError("malformed checksum line: " + line);
    const std::string expect = line.substr(0, sep);
    const std::string rel = line.substr(sep + 2);
    const std::string actual = hash_hex(fnv1a64_file((fs::path(dir) / rel).string()));
    if (actual != expect)
      throw IoError("checksum mismatch for " + rel + " in " + dir);
  }

  for (const auto& pj : j["params"]) {
    const std::string name = pj["name"].get<std::string>();
    auto it = m.params.find(name);
    if (it == m.params.end()) throw IoError("unknown parameter '" + name + "' in " + dir);
    TensorF t = read_ptns_f32((fs::path(dir) / pj["file"].get<std::string>()).string());
    if (!(t.shape() == it->second.value.shape()))
      throw IoError("parameter shape mismatch for '" + name + "'");
    it->second.value = std::move(t);
    it->second.grad = TensorF(it->second.value.shape());
  }
  for (const auto& sj : j["bn_states"]) {
    const std::string name = sj["layer"].get<std::string>();
    auto it = m.states.find(name);
    if (it == m.states.end()) throw IoError("unknown bn state '" + name + "' in " + dir);
    TensorF t = read_ptns_f32((fs::path(dir) / sj["file"].get<std::string>()).string());
    const int64_t c = t.dim(1);
    it->second.mean.assign(t.data(), t.data() + c);
    it->second.var.assign(t.data() + c, t.data() + 2 * c);
    it->second.initialized = sj["initialized"].get<bool>();
  }
  return m;
}

template struct Model<float>;
template struct Model<double>;
template Model<float> build_model<float>(const ArchSpec&, uint64_t);
template Model<double> build_model<double>(const ArchSpec&, uint64_t);

}  // namespace sparsepat
