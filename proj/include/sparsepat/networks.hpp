#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sparsepat/autodiff.hpp"
#include "sparsepat/image.hpp"

namespace sparsepat {

enum class ArchKind { kUNet, kFdUNet };

std::string arch_kind_name(ArchKind kind);
ArchKind arch_kind_from_name(const std::string& name);

// Architecture hyperparameters. FD-UNet requires f1 = 8*k1; level i uses
// growth rate k_i = k1 * 2^(i-1) in both the contracting and expanding paths.
struct ArchSpec {
  ArchKind kind = ArchKind::kUNet;
  int f1 = 8;
  int k1 = 1;       // FD-UNet only
  int levels = 5;   // fixed
};

// One node of the declarative layer graph. Layers execute in list order;
// inputs name earlier outputs ("input" is the network input image).
struct LayerDesc {
  std::string name;
  std::string op;  // conv | bn | relu | maxpool | upconv | concat | add
  std::vector<std::string> inputs;
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
  bool zero_init = false;
};

// Builds and shape-checks the layer graph for an architecture.
std::vector<LayerDesc> describe_layers(const ArchSpec& spec);

// Dense block channel algebra exposed for auditing: input channels of layer
// l (1-based) given block input F and growth rate k.
inline int dense_layer_in_channels(int F, int k, int l) { return F + k * (l - 1); }
inline int dense_block_out_channels(int F, int k, int L) { return F + L * k; }

template <typename T>
struct Model {
  ArchSpec arch;
  uint64_t seed = 0;
  std::vector<LayerDesc> layers;
  std::map<std::string, Parameter<T>> params;       // "<layer>.w", ".b", ".gamma", ".beta"
  std::map<std::string, BatchNormState<T>> states;  // per bn layer name

  Var<T> forward(Tape<T>& tape, Var<T> x, Mode mode);
  Tensor<T> forward_eval(const Tensor<T>& x);
  Image2D apply(const Image2D& x);  // single-image eval convenience
  int64_t param_count() const;
};

template <typename T>
Model<T> build_model(const ArchSpec& spec, uint64_t seed);

Model<float> build_unet(int f1, uint64_t seed);
Model<float> build_fd_unet(int f1, int k1, uint64_t seed);

// Weights directory: model.json graph description, one PTNS blob per
// parameter, running stats, and a checksum file.
void save_model(const Model<float>& model, const std::string& dir);
Model<float> load_model(const std::string& dir);

extern template struct Model<float>;
extern template struct Model<double>;
extern template Model<float> build_model<float>(const ArchSpec&, uint64_t);
extern template Model<double> build_model<double>(const ArchSpec&, uint64_t);

}  // namespace sparsepat
