#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "advbench/core/data.hpp"

namespace advbench {

enum class AttackMode { non_target, targeted };

inline std::string_view to_string(AttackMode m) { return m == AttackMode::non_target ? "non-target" : "targeted"; }

inline AttackMode parse_attack_mode(std::string_view s) {
  if (s == "non-target") return AttackMode::non_target;
  if (s == "targeted") return AttackMode::targeted;
  throw ValidationError("unknown attack mode '" + std::string(s) + "'");
}

/// L-infinity attack budget in normalized pixel units.
struct AttackBudget {
  double epsilon = 0.0;
  /// Per-iteration step; epsilon / 4 when unset.
  std::optional<double> alpha;
  int steps = 0;
  bool random_init = true;
  AttackMode mode = AttackMode::non_target;
  /// Required in targeted mode; aligned with the attacked batch.
  std::optional<LabelBatch> targets;
  std::uint64_t seed = 0;

  double step_size() const { return alpha.value_or(epsilon / 4.0); }

  void validate() const {
    require(epsilon >= 0.0, "attack budget needs epsilon >= 0");
    require(step_size() >= 0.0, "attack budget needs alpha >= 0");
    require(steps >= 0, "attack budget needs steps >= 0");
    if (mode == AttackMode::targeted) require(targets.has_value(), "targeted attack needs target labels");
  }

  static AttackBudget pgd(double epsilon, int steps, std::optional<double> alpha = std::nullopt,
                          std::uint64_t seed = 0) {
    AttackBudget b;
    b.epsilon = epsilon;
    b.alpha = alpha;
    b.steps = steps;
    b.seed = seed;
    return b;
  }

  /// Single step of size epsilon without random start.
  static AttackBudget fgsm(double epsilon) {
    AttackBudget b;
    b.epsilon = epsilon;
    b.alpha = epsilon;
    b.steps = 1;
    b.random_init = false;
    return b;
  }
};

}  // namespace advbench
