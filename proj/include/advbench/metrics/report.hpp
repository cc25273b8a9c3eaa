#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "advbench/attacks/pgd.hpp"
#include "advbench/metrics/scores.hpp"
#include "advbench/robustbench/benchmark.hpp"

namespace advbench {

inline constexpr const char* kMultiLabelAccuracyConvention = "mean per-entry binary agreement at threshold 0.5";

struct AttackSummary {
  std::string attack;
  AttackBudget budget;
  /// Accuracy on the perturbed images.
  double accuracy = 0.0;
  double fooling_ratio = 0.0;
  std::optional<double> auc;
};

struct EvaluationReport {
  Task task = Task::single_label;
  int k = 2;
  std::size_t images = 0;
  double accuracy = 0.0;
  std::optional<double> auc;
  std::vector<int> auc_skipped_classes;
  std::vector<ClassMetrics> per_class;
  std::vector<AttackSummary> attacks;
  std::optional<FlipReport> flips;
  std::optional<double> rfp;
  /// Free-form echo of the attack/defense settings behind the numbers.
  nlohmann::json config = nlohmann::json::object();

  /// Raises ContractError unless every rate lies in [0,1] and counts match `images`.
  void validate() const {
    auto rate = [](double v, const char* what) {
      require(v >= 0.0 && v <= 1.0, std::string("evaluation report: ") + what + " outside [0,1]");
    };
    rate(accuracy, "accuracy");
    if (auc) rate(*auc, "auc");
    for (const auto& c : per_class) {
      require(c.support <= images && c.predicted <= images && c.true_positive <= std::min(c.support, c.predicted),
              "evaluation report: per-class counts inconsistent with image count");
      rate(c.accuracy, "per-class accuracy");
    }
    for (const auto& a : attacks) {
      rate(a.accuracy, "adversarial accuracy");
      rate(a.fooling_ratio, "fooling ratio");
      if (a.auc) rate(*a.auc, "adversarial auc");
    }
    if (flips) rate(flips->fp, "flip probability");
    if (rfp) require(*rfp >= 0.0, "evaluation report: negative rfp");
  }
};

namespace detail {

template <class T>
std::optional<double> try_auc(const ProbabilityMatrix<T>& p, const LabelBatch& y, std::vector<int>* skipped) {
  try {
    auto r = auc(p, y);
    if (skipped) *skipped = r.skipped;
    return r.value;
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

template <class T>
ProbabilityMatrix<T> chunked_proba(const Classifier<T>& model, const Tensor<T>& x) {
  ProbabilityMatrix<T> out{0, static_cast<std::size_t>(model.num_classes()), {}};
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.shape().n; start += 256) {
    const std::size_t end = std::min(x.shape().n, start + 256);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto part = predict_proba(model, x.gather(idx));
    out.values.insert(out.values.end(), part.values.begin(), part.values.end());
    out.rows += part.rows;
  }
  return out;
}

}  // namespace detail

/// Clean ACC, AUC (absent when every class is degenerate) and per-class counts.
template <class T>
EvaluationReport evaluate_clean(const Classifier<T>& model, const ImageBatch<T>& images, const LabelBatch& labels) {
  require(images.size() == labels.size(), "evaluate: labels not aligned with images");
  if (labels.task != model.task()) throw TaskMismatchError("evaluate: label task differs from model task");
  EvaluationReport r;
  r.task = labels.task;
  r.k = labels.k;
  r.images = images.size();
  if (r.images == 0) return r;
  const auto proba = detail::chunked_proba(model, images.data);
  const auto preds = discrete_predictions(proba, model.task());
  r.accuracy = accuracy(preds, labels);
  r.auc = detail::try_auc(proba, labels, &r.auc_skipped_classes);
  r.per_class = per_class_metrics(preds, labels);
  return r;
}

/// Appends accuracy, FR and AUC on an attacked batch whose originals are the evaluated images.
template <class T>
void add_attack(EvaluationReport& r, const Classifier<T>& model, const AdversarialBatch<T>& adv,
                const LabelBatch& labels, std::string attack) {
  require(adv.size() == labels.size(), "add_attack: labels not aligned with images");
  AttackSummary s{std::move(attack), adv.budget, 0.0, 0.0, std::nullopt};
  if (adv.size() > 0) {
    const auto proba = detail::chunked_proba(model, adv.perturbed.data);
    s.accuracy = accuracy(adv.adv_pred, labels);
    s.fooling_ratio = fooling_ratio(adv.clean_pred, adv.adv_pred);
    s.auc = detail::try_auc(proba, labels, nullptr);
  }
  r.attacks.push_back(std::move(s));
}

inline nlohmann::json to_json(const AttackBudget& b) {
  nlohmann::json j = {{"epsilon", b.epsilon},     {"alpha", b.step_size()},       {"steps", b.steps},
                      {"random_init", b.random_init}, {"mode", std::string(to_string(b.mode))}, {"seed", b.seed}};
  return j;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["task"] = std::string(to_string(r.task));
  j["k"] = r.k;
  j["images"] = r.images;
  j["accuracy"] = r.accuracy;
  if (r.task == Task::multi_label) j["accuracy_convention"] = kMultiLabelAccuracyConvention;
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  j["auc_skipped_classes"] = r.auc_skipped_classes;
  auto& pc = j["per_class"] = nlohmann::json::array();
  for (const auto& c : r.per_class) {
    pc.push_back({{"label", c.label},
                  {"support", c.support},
                  {"predicted", c.predicted},
                  {"true_positive", c.true_positive},
                  {"accuracy", c.accuracy},
                  {"precision", c.precision ? nlohmann::json(*c.precision) : nlohmann::json(nullptr)},
                  {"recall", c.recall ? nlohmann::json(*c.recall) : nlohmann::json(nullptr)}});
  }
  auto& at = j["attacks"] = nlohmann::json::array();
  for (const auto& a : r.attacks) {
    at.push_back({{"attack", a.attack},
                  {"budget", to_json(a.budget)},
                  {"accuracy", a.accuracy},
                  {"fooling_ratio", a.fooling_ratio},
                  {"auc", a.auc ? nlohmann::json(*a.auc) : nlohmann::json(nullptr)}});
  }
  if (r.flips) {
    j["fp"] = r.flips->fp;
    j["fp_per_type"] = r.flips->per_type;
    j["fp_per_category"] = r.flips->per_category;
    j["fp_modes"] = r.flips->modes;
  }
  if (r.rfp) j["rfp"] = *r.rfp;
  j["config"] = r.config;
  return j;
}

}  // namespace advbench
