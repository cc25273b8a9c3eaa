#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "advbench/core/data.hpp"

namespace advbench {

enum class FlipMode {
  /// Compare each frame with the one before it.
  adjacent,
  /// Compare each later frame with the clean first frame.
  vs_clean,
};

inline std::string_view to_string(FlipMode m) { return m == FlipMode::adjacent ? "adjacent" : "vs-clean"; }

inline FlipMode parse_flip_mode(std::string_view s) {
  if (s == "adjacent") return FlipMode::adjacent;
  if (s == "vs-clean") return FlipMode::vs_clean;
  throw ValidationError("unknown flip mode '" + std::string(s) + "'");
}

struct FlipCount {
  std::size_t flips = 0;
  std::size_t comparisons = 0;

  FlipCount& operator+=(const FlipCount& o) {
    flips += o.flips;
    comparisons += o.comparisons;
    return *this;
  }
  double rate() const { return comparisons == 0 ? 0.0 : static_cast<double>(flips) / static_cast<double>(comparisons); }
};

/// Flips in one prediction stream. Labels only need operator==.
template <class L>
FlipCount count_flips(std::span<const L> predictions, FlipMode mode) {
  require(predictions.size() >= 2, "flip counting needs at least two frames per sequence");
  FlipCount c;
  for (std::size_t j = 1; j < predictions.size(); ++j) {
    const L& reference = mode == FlipMode::adjacent ? predictions[j - 1] : predictions[0];
    c.flips += !(predictions[j] == reference);
    ++c.comparisons;
  }
  return c;
}

/// Flip count over r sequences of equal length n, divided by r (n - 1).
template <class L>
double flip_probability(const std::vector<std::vector<L>>& sequences, FlipMode mode) {
  require(!sequences.empty(), "flip_probability needs at least one sequence");
  const std::size_t n = sequences.front().size();
  FlipCount total;
  for (const auto& s : sequences) {
    if (s.size() != n)
      throw ContractError("ragged prediction sequences: " + std::to_string(s.size()) + " vs " + std::to_string(n) +
                          " frames");
    total += count_flips<L>(s, mode);
  }
  return total.rate();
}

/// fp_model / fp_reference. Raises NumericError when the reference FP is zero.
inline double relative_flip_probability(double fp_model, double fp_reference) {
  require(fp_model >= 0.0 && fp_model <= 1.0, "flip probability outside [0,1]");
  if (!(fp_reference > 0.0)) throw NumericError("relative flip probability undefined: reference model has FP = 0");
  return fp_model / fp_reference;
}

/// Canonical text form of a discrete prediction: the class index for single-label, a
/// string of 0/1 digits for multi-label. Two predictions agree iff their tokens are equal.
inline std::string prediction_token(const LabelBatch& preds, std::size_t i) {
  if (preds.task == Task::single_label) return std::to_string(preds.classes.at(i));
  std::string s;
  for (auto v : preds.row(i)) s.push_back(v ? '1' : '0');
  return s;
}

/// Per-sequence prediction streams keyed by sequence id, in file order.
struct PredictionTable {
  std::vector<std::string> sequence_ids;
  std::vector<std::vector<std::string>> labels;

  std::size_t size() const { return sequence_ids.size(); }
};

/// CSV with header `sequence_id,frame,label`; frames are 0-based and must be complete.
inline void write_predictions_csv(const std::filesystem::path& path, const PredictionTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "sequence_id,frame,label\n";
  for (std::size_t s = 0; s < table.size(); ++s)
    for (std::size_t j = 0; j < table.labels[s].size(); ++j)
      out << table.sequence_ids[s] << ',' << j << ',' << table.labels[s][j] << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline PredictionTable read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sequence_id,frame,label")
    throw ValidationError("'" + path.string() + "': expected header 'sequence_id,frame,label'");
  PredictionTable table;
  std::map<std::string, std::size_t> index;
  std::vector<std::map<std::size_t, std::string>> frames;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(cell);
    const std::string where = "'" + path.string() + "' line " + std::to_string(line_no);
    if (cols.size() != 3 || cols[0].empty() || cols[2].empty()) throw ValidationError(where + ": expected 3 fields");
    std::size_t frame = 0;
    try {
      std::size_t used = 0;
      frame = std::stoull(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(where + ": bad frame index '" + cols[1] + "'");
    }
    auto [it, inserted] = index.try_emplace(cols[0], table.sequence_ids.size());
    if (inserted) {
      table.sequence_ids.push_back(cols[0]);
      frames.emplace_back();
    }
    if (!frames[it->second].emplace(frame, cols[2]).second)
      throw ValidationError(where + ": duplicate frame " + cols[1] + " for '" + cols[0] + "'");
  }
  for (std::size_t s = 0; s < frames.size(); ++s) {
    std::vector<std::string> seq;
    for (const auto& [j, label] : frames[s]) {
      if (j != seq.size())
        throw ValidationError("'" + path.string() + "': sequence '" + table.sequence_ids[s] + "' is missing frame " +
                              std::to_string(seq.size()));
      seq.push_back(label);
    }
    table.labels.push_back(std::move(seq));
  }
  return table;
}

}  // namespace advbench
