#pragma once

#include <cmath>
#include <vector>

#include "advbench/core/losses.hpp"

namespace advbench {

namespace detail {

inline void check_maadvt_inputs(std::size_t clean_rows, std::size_t clean_cols, std::size_t adv_rows,
                                std::size_t adv_cols, const LabelBatch& y) {
  if (y.task != Task::single_label) throw TaskMismatchError("misclassification-aware loss needs single-label data");
  require(clean_rows == adv_rows && clean_cols == adv_cols, "clean and adversarial probabilities differ in shape");
  require(clean_rows == y.size(), "probabilities not aligned with labels");
  require(clean_cols == static_cast<std::size_t>(y.k), "probability width differs from k");
}

}  // namespace detail

/// R_i = KL(clean_i || adv_i) * (1 - clean_i[y_i]).
template <class T>
std::vector<T> maadvt_regularizer(const ProbabilityMatrix<T>& clean, const ProbabilityMatrix<T>& adv,
                                  const LabelBatch& y) {
  detail::check_maadvt_inputs(clean.rows, clean.cols, adv.rows, adv.cols, y);
  std::vector<T> r(clean.rows);
  for (std::size_t i = 0; i < clean.rows; ++i) {
    const T weight = T(1) - clean(i, static_cast<std::size_t>(y.classes[i]));
    r[i] = kl_divergence<T>(clean.row(i), adv.row(i)) * weight;
  }
  return r;
}

/// Batch mean of -log adv_i[y_i] with the usual probability floor.
template <class T>
T cross_entropy(const ProbabilityMatrix<T>& probs, const LabelBatch& y) {
  if (y.task != Task::single_label) throw TaskMismatchError("cross_entropy needs single-label data");
  require(probs.rows == y.size(), "probabilities not aligned with labels");
  const T floor = static_cast<T>(kProbabilityFloor);
  T sum = T(0);
  for (std::size_t i = 0; i < probs.rows; ++i)
    sum += -std::log(std::max(probs(i, static_cast<std::size_t>(y.classes[i])), floor));
  return sum * (T(1) / static_cast<T>(probs.rows));
}

/// mean_i [CE(adv_i, y_i) + lambda * R_i].
template <class T>
T maadvt_loss(const ProbabilityMatrix<T>& clean, const ProbabilityMatrix<T>& adv, const LabelBatch& y,
              double lambda) {
  require(lambda >= 0.0, "maadvt_loss needs lambda >= 0");
  const auto r = maadvt_regularizer(clean, adv, y);
  const T lam = static_cast<T>(lambda);
  const T floor = static_cast<T>(kProbabilityFloor);
  T sum = T(0);
  for (std::size_t i = 0; i < adv.rows; ++i)
    sum += -std::log(std::max(adv(i, static_cast<std::size_t>(y.classes[i])), floor)) + lam * r[i];
  return sum * (T(1) / static_cast<T>(adv.rows));
}

template <class T>
struct MaadvtLossAndGrad {
  T loss = T(0);
  T ce = T(0);
  T regularizer = T(0);
  Tensor<T> grad_clean_logits;
  Tensor<T> grad_adv_logits;
};

/// Loss value plus gradients with respect to both logit sets. The clean logits receive
/// gradient through the KL term and through the misclassification weight.
template <class T>
MaadvtLossAndGrad<T> maadvt_loss_from_logits(const Tensor<T>& clean_logits, const Tensor<T>& adv_logits,
                                             const LabelBatch& y, double lambda) {
  require(lambda >= 0.0, "maadvt loss needs lambda >= 0");
  require(clean_logits.shape() == adv_logits.shape(), "clean and adversarial logits differ in shape");
  const auto p = probabilities_from_logits(clean_logits, Task::single_label);
  const auto q = probabilities_from_logits(adv_logits, Task::single_label);
  detail::check_maadvt_inputs(p.rows, p.cols, q.rows, q.cols, y);
  const std::size_t m = p.rows, k = p.cols;
  const T lam = static_cast<T>(lambda);
  const T floor = static_cast<T>(kProbabilityFloor);
  const T inv_m = T(1) / static_cast<T>(m);
  MaadvtLossAndGrad<T> out{T(0), T(0), T(0), Tensor<T>(clean_logits.shape()), Tensor<T>(adv_logits.shape())};
  T total = T(0), ce_sum = T(0), reg_sum = T(0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto yi = static_cast<std::size_t>(y.classes[i]);
    auto pr = p.row(i);
    auto qr = q.row(i);
    const T ce = -std::log(std::max(qr[yi], floor));
    const T kl = kl_divergence<T>(pr, qr);
    const T weight = T(1) - pr[yi];
    const T r = kl * weight;
    total += ce + lam * r;
    ce_sum += ce;
    reg_sum += r;
    auto ga = out.grad_adv_logits.frame(i);
    auto gc = out.grad_clean_logits.frame(i);
    for (std::size_t j = 0; j < k; ++j) {
      const T onehot = j == yi ? T(1) : T(0);
      ga[j] = ((qr[j] - onehot) + lam * weight * (qr[j] - pr[j])) * inv_m;
      const T log_ratio = std::log(std::max(pr[j], floor)) - std::log(std::max(qr[j], floor));
      const T d_kl = pr[j] * (log_ratio - kl);
      const T d_weight = -pr[yi] * (onehot - pr[j]);
      gc[j] = lam * (weight * d_kl + kl * d_weight) * inv_m;
    }
  }
  out.loss = total * inv_m;
  out.ce = ce_sum * inv_m;
  out.regularizer = reg_sum * inv_m;
  return out;
}

}  // namespace advbench
