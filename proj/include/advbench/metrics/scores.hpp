#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "advbench/core/losses.hpp"

namespace advbench {

namespace detail {

inline void check_aligned(const LabelBatch& a, const LabelBatch& b, const char* what) {
  if (a.size() != b.size())
    throw ContractError(std::string(what) + ": " + std::to_string(a.size()) + " predictions vs " +
                        std::to_string(b.size()) + " labels");
  if (a.task != b.task) throw TaskMismatchError(std::string(what) + ": prediction and label tasks differ");
  if (a.k != b.k) throw ContractError(std::string(what) + ": prediction and label widths differ");
}

}  // namespace detail

/// Single-label: fraction of exact class matches. Multi-label: mean per-entry agreement.
inline double accuracy(const LabelBatch& preds, const LabelBatch& labels) {
  detail::check_aligned(preds, labels, "accuracy");
  if (labels.size() == 0) return 0.0;
  std::size_t hits = 0, total = 0;
  if (labels.task == Task::single_label) {
    for (std::size_t i = 0; i < labels.size(); ++i) hits += preds.classes[i] == labels.classes[i];
    total = labels.size();
  } else {
    for (std::size_t i = 0; i < labels.vectors.size(); ++i) hits += preds.vectors[i] == labels.vectors[i];
    total = labels.vectors.size();
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

/// Fraction of images whose discrete prediction changed (whole-vector inequality for multi-label).
inline double fooling_ratio(const LabelBatch& clean_preds, const LabelBatch& adv_preds) {
  detail::check_aligned(clean_preds, adv_preds, "fooling_ratio");
  if (clean_preds.size() == 0) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < clean_preds.size(); ++i) changed += !same_prediction(clean_preds, i, adv_preds, i);
  return static_cast<double>(changed) / static_cast<double>(clean_preds.size());
}

/// Rank-based binary AUC (Mann-Whitney), ties counted as one half. Empty when either class
/// is missing.
inline std::optional<double> binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  require(scores.size() == positive.size(), "auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        rank_sum += mid_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct AucResult {
  double value = 0.0;
  /// Classes excluded because they had no positives or no negatives.
  std::vector<int> skipped;
};

/// Binary (k = 2): AUC of class-1 scores. Multi-class: macro one-vs-rest mean. Multi-label:
/// mean of per-class AUCs. Degenerate classes are skipped; when all are degenerate a
/// ValidationError is raised.
template <class T>
AucResult auc(const ProbabilityMatrix<T>& scores, const LabelBatch& labels) {
  require(scores.rows == labels.size(), "auc: scores and labels differ in length");
  require(scores.cols == static_cast<std::size_t>(labels.k), "auc: score width differs from k");
  const std::size_t m = labels.size();
  std::vector<double> s(m);
  std::vector<std::uint8_t> pos(m);
  auto column = [&](std::size_t j) {
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = static_cast<double>(scores(i, j));
      pos[i] = labels.task == Task::single_label ? static_cast<std::uint8_t>(labels.classes[i] == static_cast<int>(j))
                                                 : labels.row(i)[j];
    }
    return binary_auc(s, pos);
  };
  AucResult out;
  if (labels.task == Task::single_label && labels.k == 2) {
    auto v = column(1);
    if (!v) throw ValidationError("auc undefined: labels contain a single class");
    out.value = *v;
    return out;
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < scores.cols; ++j) {
    if (auto v = column(j)) {
      sum += *v;
      ++used;
    } else {
      out.skipped.push_back(static_cast<int>(j));
    }
  }
  if (used == 0) throw ValidationError("auc undefined: every class is degenerate");
  out.value = sum / static_cast<double>(used);
  return out;
}

/// One-vs-rest counts for one class (single-label) or one label column (multi-label).
struct ClassMetrics {
  int label = 0;
  std::size_t support = 0;
  std::size_t predicted = 0;
  std::size_t true_positive = 0;
  /// Agreement of the one-vs-rest indicator over all images.
  double accuracy = 0.0;
  /// Empty when nothing was predicted as this class.
  std::optional<double> precision;
  /// Empty when the class never occurs.
  std::optional<double> recall;
};

inline std::vector<ClassMetrics> per_class_metrics(const LabelBatch& preds, const LabelBatch& labels) {
  detail::check_aligned(preds, labels, "per_class_metrics");
  const std::size_t m = labels.size();
  std::vector<ClassMetrics> out(static_cast<std::size_t>(labels.k));
  auto has = [](const LabelBatch& b, std::size_t i, int j) {
    return b.task == Task::single_label ? b.classes[i] == j : b.row(i)[static_cast<std::size_t>(j)] == 1;
  };
  for (int j = 0; j < labels.k; ++j) {
    auto& c = out[static_cast<std::size_t>(j)];
    c.label = j;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const bool p = has(preds, i, j), t = has(labels, i, j);
      c.support += t;
      c.predicted += p;
      c.true_positive += p && t;
      agree += p == t;
    }
    c.accuracy = m == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(m);
    if (c.predicted > 0) c.precision = static_cast<double>(c.true_positive) / static_cast<double>(c.predicted);
    if (c.support > 0) c.recall = static_cast<double>(c.true_positive) / static_cast<double>(c.support);
  }
  return out;
}

}  // namespace advbench
