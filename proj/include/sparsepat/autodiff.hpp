#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "sparsepat/tensor.hpp"

namespace sparsepat {

// Trainable value: weight plus the gradient slot filled by Tape::backward.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  explicit Parameter(Tensor<T> v) : value(std::move(v)), grad(value.shape()) {}
};

// Batch-norm running statistics (one slot per channel).
template <typename T>
struct BatchNormState {
  std::vector<T> mean;
  std::vector<T> var;
  bool initialized = false;

  static BatchNormState unit(int64_t channels) {
    BatchNormState s;
    s.mean.assign(static_cast<size_t>(channels), T(0));
    s.var.assign(static_cast<size_t>(channels), T(1));
    s.initialized = true;
    return s;
  }
};

enum class Mode { kTrain, kEval };

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool grad_live = false;     // grad buffer allocated and seeded this backward pass
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  std::function<void()> backward_fn;
  Parameter<T>* bound = nullptr;
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

// Execution tape. Operations run eagerly and append their node in execution
// order, so every node appears after the producers of its inputs and a single
// reverse sweep visits each operation exactly once.
template <typename T>
class Tape {
 public:
  // Leaves.
  Var<T> value(Tensor<T> v);                      // constant input
  Var<T> leaf(Tensor<T> v, bool requires_grad);   // differentiable input
  Var<T> param(Parameter<T>& p);                  // trainable leaf, cached per Parameter

  // Operator set required by the UNet / FD-UNet forward graphs.
  Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad);
  Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, Mode mode,
                    T momentum = T(0.1), T eps = T(1e-5));
  Var<T> relu(Var<T> x);
  Var<T> max_pool2(Var<T> x);
  Var<T> up_conv2(Var<T> x, Var<T> w, Var<T> b);
  Var<T> concat_channels(Var<T> a, Var<T> b);
  Var<T> add(Var<T> a, Var<T> b);
  Var<T> mse_loss(Var<T> prediction, Var<T> target);
  Var<T> sum(Var<T> x);  // scalar reduction, mostly for loss plumbing and tests

  // Reverse sweep from a scalar root. Fills gradients of every reachable
  // bound Parameter; unreachable trainable parameters are zeroed.
  void backward(Var<T> loss);

  size_t size() const { return order_.size(); }

 private:
  Var<T> record(Var<T> node);

  std::vector<Var<T>> order_;
  std::unordered_map<Parameter<T>*, Var<T>> param_cache_;
  std::vector<Parameter<T>*> bound_params_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace sparsepat
