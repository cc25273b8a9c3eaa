#pragma once

#include <algorithm>
#include <numeric>
#include <random>

#include "advbench/attacks/budget.hpp"
#include "advbench/core/losses.hpp"

namespace advbench {

/// Result of perturbing a batch. `delta` is computed as perturbed - original.
template <class T>
struct AdversarialBatch {
  ImageBatch<T> original;
  ImageBatch<T> perturbed;
  Tensor<T> delta;
  LabelBatch clean_pred;
  LabelBatch adv_pred;
  /// Prediction changed (non-target) or target reached (targeted).
  std::vector<bool> success;
  AttackBudget budget;

  std::size_t size() const { return original.size(); }

  double success_rate() const {
    if (success.empty()) return 0.0;
    return static_cast<double>(std::count(success.begin(), success.end(), true)) / static_cast<double>(success.size());
  }
};

/// Per-pixel projection onto [max(0, c - eps), min(1, c + eps)].
template <class T>
ImageBatch<T> clip_to_ball(const ImageBatch<T>& candidate, const ImageBatch<T>& center, double epsilon) {
  require(candidate.data.shape() == center.data.shape(),
          "clip_to_ball shape mismatch " + candidate.data.shape().str() + " vs " + center.data.shape().str());
  require(epsilon >= 0.0, "clip_to_ball needs epsilon >= 0");
  ImageBatch<T> out{Tensor<T>(center.data.shape()), center.ids};
  const T eps = static_cast<T>(epsilon);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const T c = center.data[i];
    const T lo = std::max(T(0), c - eps);
    const T hi = std::min(T(1), c + eps);
    out.data[i] = std::clamp(candidate.data[i], lo, hi);
  }
  return out;
}

template <class T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

namespace detail {

inline constexpr std::size_t kAttackChunk = 128;

/// dLoss/dx computed in chunks; each image's gradient only depends on itself, so chunking
/// changes magnitudes by the batch-mean factor but never the sign.
template <class T>
Tensor<T> input_gradient(const Classifier<T>& model, const ImageBatch<T>& x, const LabelBatch& y, LossSpec spec) {
  Tensor<T> grad(x.data.shape());
  const std::size_t m = x.size();
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < m; start += kAttackChunk) {
    const std::size_t end = std::min(m, start + kAttackChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto lg = loss_and_input_grad(model, x.gather(idx), y.gather(idx), spec);
    std::copy(lg.grad.values().begin(), lg.grad.values().end(),
              grad.values().begin() + static_cast<std::ptrdiff_t>(start * x.data.shape().frame_size()));
  }
  return grad;
}

}  // namespace detail

/// Discrete predictions of `model` on x, evaluated in chunks.
template <class T>
LabelBatch predict_labels(const Classifier<T>& model, const Tensor<T>& x) {
  LabelBatch out{model.task(), model.num_classes(), {}, {}};
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.shape().n; start += detail::kAttackChunk) {
    const std::size_t end = std::min(x.shape().n, start + detail::kAttackChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto part = discrete_predictions(predict_proba(model, x.gather(idx)), model.task());
    out.classes.insert(out.classes.end(), part.classes.begin(), part.classes.end());
    out.vectors.insert(out.vectors.end(), part.vectors.begin(), part.vectors.end());
  }
  return out;
}

/// Fills predictions and success flags of `adv` against `model`.
template <class T>
void annotate(AdversarialBatch<T>& adv, const Classifier<T>& model) {
  adv.clean_pred = predict_labels(model, adv.original.data);
  adv.adv_pred = predict_labels(model, adv.perturbed.data);
  adv.success.assign(adv.size(), false);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    adv.success[i] = adv.budget.mode == AttackMode::targeted ? same_prediction(adv.adv_pred, i, *adv.budget.targets, i)
                                                             : !same_prediction(adv.adv_pred, i, adv.clean_pred, i);
  }
}

template <class T>
AdversarialBatch<T> make_adversarial(const ImageBatch<T>& original, ImageBatch<T> perturbed, AttackBudget budget) {
  AdversarialBatch<T> adv;
  adv.original = original;
  adv.delta = Tensor<T>(original.data.shape());
  for (std::size_t i = 0; i < adv.delta.size(); ++i) adv.delta[i] = perturbed.data[i] - original.data[i];
  adv.perturbed = std::move(perturbed);
  adv.budget = std::move(budget);
  return adv;
}

/// L-infinity PGD iterate only, without predictions. Starts from x (or a uniform point in
/// the ball when random_init), then repeats x <- clip(x + s * alpha * sign(grad_x loss(x_t)))
/// where s = +1 ascends the loss of the true labels (non-target) and s = -1 descends the
/// loss of the target labels.
template <class T>
ImageBatch<T> pgd_perturb(const Classifier<T>& model, const ImageBatch<T>& x, const LabelBatch& y,
                          const AttackBudget& budget, std::optional<LossSpec> loss = std::nullopt) {
  budget.validate();
  model.check_input(x.data);
  const LabelBatch& labels = budget.mode == AttackMode::targeted ? *budget.targets : y;
  require(labels.size() == x.size(), "attack labels not aligned with images");
  const LossSpec spec = loss.value_or(LossSpec::default_for(model.task()));
  const T direction = budget.mode == AttackMode::non_target ? T(1) : T(-1);
  const T step = static_cast<T>(budget.step_size());

  ImageBatch<T> current = x;
  if (budget.random_init && budget.epsilon > 0.0) {
    std::mt19937_64 rng(budget.seed);
    std::uniform_real_distribution<double> u(-budget.epsilon, budget.epsilon);
    for (std::size_t i = 0; i < current.data.size(); ++i) current.data[i] += static_cast<T>(u(rng));
    current = clip_to_ball(current, x, budget.epsilon);
  }
  for (int t = 0; t < budget.steps; ++t) {
    const auto grad = detail::input_gradient(model, current, labels, spec);
    for (std::size_t i = 0; i < current.data.size(); ++i) current.data[i] += direction * step * sign(grad[i]);
    current = clip_to_ball(current, x, budget.epsilon);
  }
  return current;
}

template <class T>
AdversarialBatch<T> pgd_attack(const Classifier<T>& model, const ImageBatch<T>& x, const LabelBatch& y,
                               const AttackBudget& budget, std::optional<LossSpec> loss = std::nullopt) {
  auto adv = make_adversarial(x, pgd_perturb(model, x, y, budget, loss), budget);
  annotate(adv, model);
  return adv;
}

/// FGSM is PGD with one step of size epsilon and no random start.
template <class T>
AdversarialBatch<T> fgsm_attack(const Classifier<T>& model, const ImageBatch<T>& x, const LabelBatch& y,
                                double epsilon, std::optional<LossSpec> loss = std::nullopt) {
  return pgd_attack(model, x, y, AttackBudget::fgsm(epsilon), loss);
}

/// x + U(-eps, eps), clipped to the ball and valid range. The non-adversarial baseline.
template <class T>
AdversarialBatch<T> uniform_noise_perturb(const Classifier<T>& model, const ImageBatch<T>& x, double epsilon,
                                          std::uint64_t seed) {
  ImageBatch<T> noisy = x;
  if (epsilon > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-epsilon, epsilon);
    for (std::size_t i = 0; i < noisy.data.size(); ++i) noisy.data[i] += static_cast<T>(u(rng));
  }
  AttackBudget b;
  b.epsilon = epsilon;
  b.seed = seed;
  auto adv = make_adversarial(x, clip_to_ball(noisy, x, epsilon), b);
  annotate(adv, model);
  return adv;
}

}  // namespace advbench
