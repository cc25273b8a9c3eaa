#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "advbench/attacks/budget.hpp"

namespace advbench {

/// Closed interval; lo == hi means a fixed value.
template <class V>
struct Interval {
  V lo{};
  V hi{};

  static Interval fixed(V v) { return {v, v}; }
  bool is_fixed() const { return lo == hi; }
  bool contains(V v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class DefenseKind { natural, standard, mpadvt, maadvt };

inline std::string_view to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::natural: return "natural";
    case DefenseKind::standard: return "standard-at";
    case DefenseKind::mpadvt: return "mpadvt";
    case DefenseKind::maadvt: return "maadvt";
  }
  return "?";
}

inline DefenseKind parse_defense_kind(std::string_view s) {
  if (s == "natural") return DefenseKind::natural;
  if (s == "standard-at") return DefenseKind::standard;
  if (s == "mpadvt") return DefenseKind::mpadvt;
  if (s == "maadvt") return DefenseKind::maadvt;
  throw ValidationError("unknown defense '" + std::string(s) + "'");
}

struct TrainConfig {
  /// Outer epochs.
  int epochs = 10;
  /// Inner PGD steps; a range is sampled per minibatch by MPAdvT.
  Interval<int> inner_steps = Interval<int>::fixed(5);
  /// Perturbation budget in [0,1] pixel units; a range is sampled per minibatch by MPAdvT.
  Interval<double> epsilon = Interval<double>::fixed(0.03);
  /// Inner step size; epsilon / 4 of the (sampled) epsilon when unset.
  std::optional<double> inner_step_size;
  /// Outer learning rate.
  double learning_rate = 0.05;
  double momentum = 0.9;
  /// Cosine-anneal the learning rate to zero over the run, set per epoch.
  bool cosine_schedule = false;
  std::size_t batch_size = 32;
  /// Weight of the misclassification-aware regularizer.
  double lambda = 1.0;
  /// MPAdvT perturbs a minibatch when its p ~ U(0,1) draw is >= this.
  double branch_threshold = 0.5;
  bool random_init = true;
  std::uint64_t seed = 0;

  /// Budget for the per-epoch robust accuracy column of the log.
  AttackBudget eval_budget = AttackBudget::pgd(0.03, 5);
  /// Images used for per-epoch evaluation; 0 disables it.
  std::size_t eval_limit = 200;

  double learning_rate_at(int epoch) const {
    if (!cosine_schedule) return learning_rate;
    const double t = static_cast<double>(epoch - 1) / static_cast<double>(epochs);
    return learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  }

  static TrainConfig mpadvt_defaults() {
    TrainConfig c;
    c.epsilon = {0.01, 0.04};
    c.inner_steps = {1, 5};
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("train config: " + m); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (inner_steps.lo < 1 || inner_steps.hi < inner_steps.lo) fail("inner_steps range must be non-empty and >= 1");
    if (!(epsilon.lo >= 0.0) || !(epsilon.hi >= epsilon.lo) || epsilon.hi > 1.0)
      fail("epsilon range must be non-empty within [0,1]");
    if (inner_step_size && !(*inner_step_size >= 0.0)) fail("inner_step_size must be >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0,1)");
    if (batch_size == 0) fail("batch_size must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be >= 0");
    if (!(branch_threshold >= 0.0 && branch_threshold <= 1.0)) fail("branch_threshold must be in [0,1]");
    if (!(eval_budget.epsilon >= 0.0) || eval_budget.steps < 0) fail("eval budget invalid");
  }
};

/// One minibatch's perturbation draw, kept for auditing.
struct PerturbationDraw {
  int epoch = 0;
  std::size_t batch = 0;
  double p = 1.0;
  double epsilon = 0.0;
  int steps = 0;
  bool perturbed = false;
};

struct EpochRecord {
  int epoch = 0;
  /// Mean training objective over the epoch.
  double loss = 0.0;
  /// Classification-loss component of `loss`.
  double ce_term = 0.0;
  /// Mean regularizer value (MAAdvT only, before lambda).
  double regularizer_term = 0.0;
  std::optional<double> clean_accuracy;
  std::optional<double> robust_accuracy;
};

struct TrainLog {
  DefenseKind method = DefenseKind::natural;
  std::vector<EpochRecord> epochs;
  std::vector<PerturbationDraw> draws;
};

}  // namespace advbench
