#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "advbench/core/classifier.hpp"

namespace advbench {

/// Applied inside every logarithm of a probability.
inline constexpr double kProbabilityFloor = 1e-12;

/// Row-major m x k probability matrix.
template <class T>
struct ProbabilityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  std::span<const T> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<T> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  T operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

/// Softmax rows for single-label, elementwise sigmoid for multi-label.
template <class T>
ProbabilityMatrix<T> probabilities_from_logits(const Tensor<T>& logits, Task task) {
  const std::size_t m = logits.shape().n, k = logits.shape().frame_size();
  ProbabilityMatrix<T> p{m, k, std::vector<T>(m * k)};
  for (std::size_t i = 0; i < m; ++i) {
    auto z = logits.frame(i);
    auto out = p.row(i);
    if (task == Task::single_label) {
      const T mx = *std::max_element(z.begin(), z.end());
      T sum = T(0);
      for (std::size_t j = 0; j < k; ++j) sum += (out[j] = std::exp(z[j] - mx));
      for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
    } else {
      for (std::size_t j = 0; j < k; ++j)
        out[j] = z[j] >= T(0) ? T(1) / (T(1) + std::exp(-z[j])) : std::exp(z[j]) / (T(1) + std::exp(z[j]));
    }
  }
  return p;
}

template <class T>
ProbabilityMatrix<T> predict_proba(const Classifier<T>& model, const Tensor<T>& x) {
  model.check_input(x);
  return probabilities_from_logits(model.forward(x).logits, model.task());
}

/// Argmax with lowest-index tie-break.
template <class T>
int argmax(std::span<const T> row) {
  int best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  return best;
}

/// Discrete predictions: argmax class per row (single-label) or 0.5-thresholded vectors.
template <class T>
LabelBatch discrete_predictions(const ProbabilityMatrix<T>& p, Task task) {
  LabelBatch out{task, static_cast<int>(p.cols), {}, {}};
  for (std::size_t i = 0; i < p.rows; ++i) {
    if (task == Task::single_label) {
      out.classes.push_back(argmax(p.row(i)));
    } else {
      for (T v : p.row(i)) out.vectors.push_back(v >= T(0.5) ? 1 : 0);
    }
  }
  return out;
}

/// Whether prediction i equals prediction j of another batch (exact vector equality for multi-label).
inline bool same_prediction(const LabelBatch& a, std::size_t i, const LabelBatch& b, std::size_t j) {
  if (a.task == Task::single_label) return a.classes[i] == b.classes[j];
  auto ra = a.row(i), rb = b.row(j);
  return std::equal(ra.begin(), ra.end(), rb.begin(), rb.end());
}

inline std::vector<std::vector<std::uint8_t>> one_hot(const LabelBatch& y) {
  if (y.task != Task::single_label) throw TaskMismatchError("one_hot needs single-label labels");
  std::vector<std::vector<std::uint8_t>> rows;
  rows.reserve(y.classes.size());
  for (int c : y.classes) {
    std::vector<std::uint8_t> r(static_cast<std::size_t>(y.k), 0);
    r[static_cast<std::size_t>(c)] = 1;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// KL(p || q) in nats with both arguments floored before the logarithm; 0 * log(0) := 0.
template <class T>
T kl_divergence(std::span<const T> p, std::span<const T> q) {
  require(p.size() == q.size(), "kl_divergence length mismatch: " + std::to_string(p.size()) + " vs " +
                                    std::to_string(q.size()));
  const T floor = static_cast<T>(kProbabilityFloor);
  T sum = T(0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= T(0)) continue;
    sum += p[j] * (std::log(std::max(p[j], floor)) - std::log(std::max(q[j], floor)));
  }
  // Rounding can leave tiny negative totals when p and q nearly coincide.
  return std::max(sum, T(0));
}

enum class LossKind {
  /// -log p_y, single-label.
  cross_entropy,
  /// mean over classes of per-class binary cross-entropy, multi-label.
  binary_cross_entropy,
  /// sum_j onehot_j(y) log p_j: the true-class log-probability, minimized by the
  /// perturbation generator.
  true_class_log_probability,
  /// -binary_cross_entropy; the multi-label counterpart of the above.
  negated_binary_cross_entropy,
};

struct LossSpec {
  LossKind kind = LossKind::cross_entropy;

  static LossSpec default_for(Task task) {
    return {task == Task::single_label ? LossKind::cross_entropy : LossKind::binary_cross_entropy};
  }
  static LossSpec generator_for(Task task) {
    return {task == Task::single_label ? LossKind::true_class_log_probability
                                       : LossKind::negated_binary_cross_entropy};
  }

  Task task() const {
    return kind == LossKind::cross_entropy || kind == LossKind::true_class_log_probability ? Task::single_label
                                                                                          : Task::multi_label;
  }
};

template <class T>
struct LossAndGrad {
  T loss = T(0);
  std::vector<T> per_example;
  Tensor<T> grad;  // w.r.t. logits or input depending on producer
};

/// Batch-mean loss value and its gradient with respect to the logits.
///
/// The floor guards the logarithm's value only; the gradient is the analytic
/// softmax/sigmoid gradient, which stays informative for saturated examples.
template <class T>
LossAndGrad<T> loss_from_logits(const Tensor<T>& logits, const LabelBatch& y, LossSpec spec) {
  const std::size_t m = logits.shape().n, k = logits.shape().frame_size();
  if (y.task != spec.task()) throw TaskMismatchError("loss kind does not match label task");
  require(y.size() == m, "labels not aligned with batch: " + std::to_string(y.size()) + " vs " + std::to_string(m));
  require(static_cast<std::size_t>(y.k) == k, "label width k does not match model output width");
  const auto p = probabilities_from_logits(logits, y.task);
  const T floor = static_cast<T>(kProbabilityFloor);
  const T inv_m = T(1) / static_cast<T>(m);
  LossAndGrad<T> out{T(0), std::vector<T>(m), Tensor<T>(logits.shape())};
  for (std::size_t i = 0; i < m; ++i) {
    auto pr = p.row(i);
    auto g = out.grad.frame(i);
    T value = T(0);
    switch (spec.kind) {
      case LossKind::cross_entropy:
      case LossKind::true_class_log_probability: {
        const auto yi = static_cast<std::size_t>(y.classes[i]);
        const T sign = spec.kind == LossKind::cross_entropy ? T(1) : T(-1);
        value = -sign * std::log(std::max(pr[yi], floor));
        for (std::size_t j = 0; j < k; ++j) g[j] = sign * (pr[j] - (j == yi ? T(1) : T(0))) * inv_m;
        break;
      }
      case LossKind::binary_cross_entropy:
      case LossKind::negated_binary_cross_entropy: {
        const T sign = spec.kind == LossKind::binary_cross_entropy ? T(1) : T(-1);
        const T inv_k = T(1) / static_cast<T>(k);
        auto yr = y.row(i);
        T bce = T(0);
        for (std::size_t j = 0; j < k; ++j) {
          const T t = static_cast<T>(yr[j]);
          bce -= t * std::log(std::max(pr[j], floor)) + (T(1) - t) * std::log(std::max(T(1) - pr[j], floor));
          g[j] = sign * (pr[j] - t) * inv_k * inv_m;
        }
        value = sign * bce * inv_k;
        break;
      }
    }
    out.per_example[i] = value;
    out.loss += value;
  }
  out.loss *= inv_m;
  return out;
}

/// Batch-mean loss and dLoss/dx for images x. Raises NumericError naming the offending
/// image ids when the loss is not finite.
template <class T>
LossAndGrad<T> loss_and_input_grad(const Classifier<T>& model, const ImageBatch<T>& x, const LabelBatch& y,
                                   LossSpec spec) {
  model.check_input(x.data);
  if (y.k != model.num_classes()) throw ContractError("label width k does not match classifier output width");
  auto pass = model.forward(x.data);
  auto lg = loss_from_logits(pass.logits, y, spec);
  if (!std::isfinite(lg.loss)) {
    std::string bad;
    for (std::size_t i = 0; i < lg.per_example.size(); ++i)
      if (!std::isfinite(lg.per_example[i])) bad += (bad.empty() ? "" : ",") + x.ids.at(i);
    throw NumericError("non-finite loss for images [" + bad + "]");
  }
  lg.grad = model.backward(pass, lg.grad, nullptr, true);
  return lg;
}

}  // namespace advbench
