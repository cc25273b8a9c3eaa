#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "advbench/attacks/pgd.hpp"
#include "advbench/core/optim.hpp"
#include "advbench/defenses/maadvt.hpp"
#include "advbench/defenses/train_config.hpp"
#include "advbench/metrics/scores.hpp"

namespace advbench {

/// Called after every epoch with the record just appended.
using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

// Attack draws come from their own stream so that the shuffle order, and therefore the
// whole trajectory of a zero-budget run, matches natural training.
inline constexpr std::uint64_t kAttackStream = 0x9E3779B97F4A7C15ULL;

template <class T>
Dataset<T> evaluation_split(const Dataset<T>& data, std::size_t limit) {
  auto split = data.subset(Split::val);
  if (split.size() == 0) split = data.subset(Split::train);
  return split.head(std::min(limit, split.size()));
}

template <class T>
void evaluate_epoch(const Classifier<T>& model, const Dataset<T>& eval, const TrainConfig& cfg, EpochRecord& rec) {
  if (eval.size() == 0) return;
  rec.clean_accuracy = accuracy(predict_labels(model, eval.images.data), eval.labels);
  AttackBudget b = cfg.eval_budget;
  b.seed = cfg.seed;
  const auto adv = pgd_perturb(model, eval.images, eval.labels, b);
  rec.robust_accuracy = accuracy(predict_labels(model, adv.data), eval.labels);
}

}  // namespace detail

/// Shared minibatch loop behind every defense. Updates `model` in place.
///
/// natural   loss on clean minibatches
/// standard  PGD at the fixed budget, loss on the perturbed minibatch
/// mpadvt    per minibatch draw p, epsilon, steps; perturb only when p >= branch_threshold
/// maadvt    PGD at the fixed budget, CE(adv) + lambda * KL(clean || adv) * (1 - p_clean[y])
template <class T>
TrainLog train_classifier(Classifier<T>& model, const Dataset<T>& data, const TrainConfig& cfg, DefenseKind kind,
                          const EpochCallback& on_epoch = {}) {
  cfg.validate();
  data.validate();
  if (kind == DefenseKind::maadvt && data.task() != Task::single_label)
    throw TaskMismatchError("MAAdvT supports single-label datasets only");
  if (data.task() != model.task()) throw TaskMismatchError("dataset task does not match the classifier");
  if (data.num_classes() != model.num_classes()) throw ContractError("dataset k does not match the classifier");
  if ((kind == DefenseKind::standard || kind == DefenseKind::maadvt) &&
      (!cfg.epsilon.is_fixed() || !cfg.inner_steps.is_fixed()))
    throw ValidationError("train config: " + std::string(to_string(kind)) + " needs a fixed epsilon and step count");

  const auto train = data.subset(Split::train);
  if (train.size() == 0) throw ValidationError("training needs a non-empty train split");
  model.check_input(train.images.data);
  const auto eval = cfg.eval_limit > 0 ? detail::evaluation_split(data, cfg.eval_limit) : Dataset<T>{};
  const LossSpec spec = LossSpec::default_for(model.task());

  SgdMomentum<T> opt(cfg.learning_rate, cfg.momentum);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 attack_rng(cfg.seed ^ detail::kAttackStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLog log;
  log.method = kind;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    opt.set_learning_rate(cfg.learning_rate_at(epoch));
    double loss_sum = 0.0, ce_sum = 0.0, reg_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto x = train.images.gather(idx);
      const auto y = train.labels.gather(idx);

      ImageBatch<T> input = x;
      if (kind != DefenseKind::natural) {
        PerturbationDraw draw{epoch, batch_no, 1.0, cfg.epsilon.lo, cfg.inner_steps.lo, true};
        if (kind == DefenseKind::mpadvt) {
          draw.p = unit(attack_rng);
          draw.epsilon = std::uniform_real_distribution<double>(cfg.epsilon.lo, cfg.epsilon.hi)(attack_rng);
          const double s = std::uniform_real_distribution<double>(cfg.inner_steps.lo, cfg.inner_steps.hi)(attack_rng);
          draw.steps = std::clamp(static_cast<int>(std::lround(s)), cfg.inner_steps.lo, cfg.inner_steps.hi);
          draw.perturbed = draw.p >= cfg.branch_threshold;
        }
        AttackBudget b = AttackBudget::pgd(draw.epsilon, draw.steps, cfg.inner_step_size, attack_rng());
        b.random_init = cfg.random_init;
        if (draw.perturbed) input = pgd_perturb<T>(model, x, y, b, spec);
        log.draws.push_back(draw);
      }

      auto grads = model.parameters().zeros_like();
      T batch_loss, batch_ce, batch_reg = T(0);
      const auto adv_pass = model.forward(input.data);
      if (kind == DefenseKind::maadvt) {
        const auto clean_pass = model.forward(x.data);
        auto lg = maadvt_loss_from_logits(clean_pass.logits, adv_pass.logits, y, cfg.lambda);
        batch_loss = lg.loss;
        batch_ce = lg.ce;
        batch_reg = lg.regularizer;
        if (std::isfinite(batch_loss)) {
          model.backward(adv_pass, lg.grad_adv_logits, &grads, false);
          if (cfg.lambda != 0.0) model.backward(clean_pass, lg.grad_clean_logits, &grads, false);
        }
      } else {
        auto lg = loss_from_logits(adv_pass.logits, y, spec);
        batch_loss = batch_ce = lg.loss;
        if (std::isfinite(batch_loss)) model.backward(adv_pass, lg.grad, &grads, false);
      }
      if (!std::isfinite(batch_loss) || !grads.all_finite())
        throw NumericError(std::string(to_string(kind)) + " training diverged at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_no));
      opt.step(model.parameters(), grads);
      const double w = static_cast<double>(idx.size());
      loss_sum += static_cast<double>(batch_loss) * w;
      ce_sum += static_cast<double>(batch_ce) * w;
      reg_sum += static_cast<double>(batch_reg) * w;
    }
    if (!model.parameters().all_finite())
      throw NumericError(std::string(to_string(kind)) + " training diverged at epoch " + std::to_string(epoch));
    const double n = static_cast<double>(train.size());
    EpochRecord rec{epoch, loss_sum / n, ce_sum / n, reg_sum / n, std::nullopt, std::nullopt};
    detail::evaluate_epoch(model, eval, cfg, rec);
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

template <class T>
TrainLog natural_training(Classifier<T>& model, const Dataset<T>& data, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
  return train_classifier(model, data, cfg, DefenseKind::natural, on_epoch);
}

/// Min-max training at a fixed budget: inner PGD maximization, outer SGD minimization.
template <class T>
TrainLog standard_adversarial_training(Classifier<T>& model, const Dataset<T>& data, const TrainConfig& cfg,
                                       const EpochCallback& on_epoch = {}) {
  return train_classifier(model, data, cfg, DefenseKind::standard, on_epoch);
}

/// Multi-perturbation training: budget, step count and a perturb-or-not coin are redrawn
/// for every minibatch.
template <class T>
TrainLog mpadvt_train(Classifier<T>& model, const Dataset<T>& data, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {}) {
  return train_classifier(model, data, cfg, DefenseKind::mpadvt, on_epoch);
}

/// Misclassification-aware training; single-label only.
template <class T>
TrainLog maadvt_train(Classifier<T>& model, const Dataset<T>& data, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {}) {
  return train_classifier(model, data, cfg, DefenseKind::maadvt, on_epoch);
}

}  // namespace advbench
