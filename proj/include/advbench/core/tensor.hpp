#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "advbench/core/errors.hpp"

namespace advbench {

/// NCHW extents. Dense layer outputs use (n, k, 1, 1).
struct Shape {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t frame_size() const { return c * h * w; }
  Shape frame() const { return {1, c, h, w}; }
  Shape with_batch(std::size_t batch) const { return {batch, c, h, w}; }

  friend bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

/// Cache-line aligned storage. Eigen's vectorized kernels peel a data-dependent number of
/// leading elements on unaligned input, which changes summation order; a fixed base
/// alignment keeps results bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::span<const T> data) : shape_(shape), data_(data.begin(), data.end()) {
    require(data_.size() == shape_.size(), "tensor data length does not match shape " + shape_.str());
  }
  Tensor(Shape shape, const std::vector<T>& data) : Tensor(shape, std::span<const T>(data)) {}
  Tensor(Shape shape, AlignedVector<T> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.size(), "tensor data length does not match shape " + shape_.str());
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  AlignedVector<T>& values() { return data_; }
  const AlignedVector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  std::span<T> frame(std::size_t n) {
    return {data_.data() + n * shape_.frame_size(), shape_.frame_size()};
  }
  std::span<const T> frame(std::size_t n) const {
    return {data_.data() + n * shape_.frame_size(), shape_.frame_size()};
  }

  /// Reinterpret extents without touching data.
  Tensor reshaped(Shape shape) const& {
    require(shape.size() == size(), "reshape " + shape_.str() + " -> " + shape.str());
    return Tensor(shape, data_);
  }
  Tensor reshaped(Shape shape) && {
    require(shape.size() == size(), "reshape " + shape_.str() + " -> " + shape.str());
    shape_ = shape;
    return std::move(*this);
  }

  /// Copy of the frames at `indices`, in that order.
  Tensor gather(std::span<const std::size_t> indices) const {
    Tensor out(shape_.with_batch(indices.size()));
    const std::size_t fs = shape_.frame_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      require(indices[i] < shape_.n, "gather index out of range");
      std::copy_n(data_.begin() + indices[i] * fs, fs, out.data_.begin() + i * fs);
    }
    return out;
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  T max_abs() const {
    T m = T(0);
    for (T v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

/// 64-bit FNV-1a over raw bytes; used for parameter, frame and config fingerprints.
inline std::uint64_t fnv1a(const void* bytes, std::size_t length, std::uint64_t seed = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < length; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <class T>
std::uint64_t hash_values(std::span<const T> values, std::uint64_t seed = 1469598103934665603ULL) {
  return fnv1a(values.data(), values.size_bytes(), seed);
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace advbench
