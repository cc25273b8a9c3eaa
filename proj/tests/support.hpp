#pragma once

// Test-only helpers: random fixtures and a central finite-difference oracle that only
// calls the model's forward pass.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "advbench/core/losses.hpp"

namespace advbench::testing {

template <class T>
ImageBatch<T> random_images(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ImageBatch<T> b{Tensor<T>(shape), {}};
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] = static_cast<T>(u(rng));
  for (std::size_t i = 0; i < shape.n; ++i) b.ids.push_back("img" + std::to_string(i));
  return b;
}

inline LabelBatch random_single_labels(std::size_t m, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, k - 1);
  std::vector<int> c(m);
  for (auto& v : c) v = d(rng);
  return LabelBatch::single(k, std::move(c));
}

inline LabelBatch random_multi_labels(std::size_t m, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution d(0.4);
  std::vector<std::uint8_t> v(m * static_cast<std::size_t>(k));
  for (auto& e : v) e = d(rng) ? 1 : 0;
  return LabelBatch::multi(k, std::move(v));
}

/// Batch-mean loss evaluated through forward only.
template <class T>
T loss_value(const Classifier<T>& model, const Tensor<T>& x, const LabelBatch& y, LossSpec spec) {
  return loss_from_logits(model.forward(x).logits, y, spec).loss;
}

/// Central difference of the loss w.r.t. pixel `index`.
template <class T>
T finite_difference(const Classifier<T>& model, Tensor<T> x, const LabelBatch& y, LossSpec spec, std::size_t index,
                    T h = T(1e-4)) {
  const T orig = x[index];
  x[index] = orig + h;
  const T up = loss_value(model, x, y, spec);
  x[index] = orig - h;
  const T down = loss_value(model, x, y, spec);
  return (up - down) / (T(2) * h);
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-7});
  return std::abs(a - b) / scale;
}

}  // namespace advbench::testing
