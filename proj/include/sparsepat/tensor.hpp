#pragma once

#include <cstdint>
#include <new>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sparsepat/common.hpp"

namespace sparsepat {

// 64-byte aligned storage. Keeping every buffer at a fixed alignment pins the
// SIMD peeling paths, so repeated runs produce bit-identical floating point
// results regardless of heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(kAlign));
  }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
  template <typename U>
  bool operator!=(const AlignedAllocator<U>&) const {
    return false;
  }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

// Dense row-major N-d array. Activations are (batch, channel, height, width);
// convolution weights are (out-channel, in-channel, kh, kw). Tensor behaves
// as an immutable value type: copies are deep and safe to share across
// threads.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), T(0));
  }

  Tensor(std::vector<int64_t> shape, const std::vector<T>& data) : shape_(std::move(shape)) {
    if (count(shape_) != static_cast<int64_t>(data.size()))
      throw InvalidArgument("tensor data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_string());
    data_.assign(data.begin(), data.end());
  }

  static Tensor full(std::vector<int64_t> shape, T value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  AlignedVec<T>& vec() { return data_; }
  const AlignedVec<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 4-d accessor for (b, c, y, x) layouts.
  T& at4(int64_t b, int64_t c, int64_t y, int64_t x) {
    return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }
  const T& at4(int64_t b, int64_t c, int64_t y, int64_t x) const {
    return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_string() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw InvalidArgument("negative dimension in tensor shape");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int64_t> shape_;
  AlignedVec<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace sparsepat
