#pragma once

#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "advbench/core/tensor.hpp"

namespace advbench {

enum class Task { single_label, multi_label };

inline std::string_view to_string(Task task) {
  return task == Task::single_label ? "single-label" : "multi-label";
}

/// Normalized images in [0,1] with stable per-image identifiers.
template <class T>
struct ImageBatch {
  Tensor<T> data;
  std::vector<std::string> ids;

  std::size_t size() const { return data.shape().n; }

  /// Throws ContractError unless every pixel lies in [0,1] and ids are unique and aligned.
  void validate() const {
    require(ids.size() == data.shape().n, "image batch has " + std::to_string(ids.size()) + " ids for " +
                                              std::to_string(data.shape().n) + " images");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T v = data[i];
      if (!(v >= T(0) && v <= T(1))) {
        throw ContractError("pixel outside [0,1] in image " + ids[i / data.shape().frame_size()]);
      }
    }
    std::set<std::string_view> seen;
    for (const auto& id : ids) require(seen.insert(id).second, "duplicate image id " + id);
  }

  ImageBatch gather(std::span<const std::size_t> indices) const {
    ImageBatch out{data.gather(indices), {}};
    out.ids.reserve(indices.size());
    for (auto i : indices) out.ids.push_back(ids[i]);
    return out;
  }
};

/// Single-label class indices or multi-label binary vectors (row-major m x k).
struct LabelBatch {
  Task task = Task::single_label;
  int k = 2;
  std::vector<int> classes;
  std::vector<std::uint8_t> vectors;

  static LabelBatch single(int k, std::vector<int> classes) {
    LabelBatch b{Task::single_label, k, std::move(classes), {}};
    b.validate();
    return b;
  }
  static LabelBatch multi(int k, std::vector<std::uint8_t> vectors) {
    LabelBatch b{Task::multi_label, k, {}, std::move(vectors)};
    b.validate();
    return b;
  }

  std::size_t size() const {
    return task == Task::single_label ? classes.size() : vectors.size() / static_cast<std::size_t>(k);
  }

  std::span<const std::uint8_t> row(std::size_t i) const {
    return {vectors.data() + i * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }

  void validate() const {
    require(k >= 2, "label batch needs k >= 2");
    if (task == Task::single_label) {
      for (int c : classes) require(c >= 0 && c < k, "class label " + std::to_string(c) + " outside [0,k)");
    } else {
      require(vectors.size() % static_cast<std::size_t>(k) == 0, "multi-label vectors not a multiple of k");
      for (auto v : vectors) require(v == 0 || v == 1, "multi-label entry is not 0/1");
    }
  }

  LabelBatch gather(std::span<const std::size_t> indices) const {
    LabelBatch out{task, k, {}, {}};
    if (task == Task::single_label) {
      for (auto i : indices) out.classes.push_back(classes[i]);
    } else {
      for (auto i : indices) {
        auto r = row(i);
        out.vectors.insert(out.vectors.end(), r.begin(), r.end());
      }
    }
    return out;
  }
};

enum class Split { train, val, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

/// Aligned images, labels and split tags. Immutable after construction by convention.
template <class T>
struct Dataset {
  std::string name;
  ImageBatch<T> images;
  LabelBatch labels;
  std::vector<Split> splits;

  std::size_t size() const { return images.size(); }
  Task task() const { return labels.task; }
  int num_classes() const { return labels.k; }

  void validate() const {
    images.validate();
    labels.validate();
    require(labels.size() == images.size(), "label count does not match image count");
    require(splits.size() == images.size(), "split tags not aligned with images");
  }

  std::vector<std::size_t> indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(i);
    return out;
  }

  Dataset gather(std::span<const std::size_t> indices) const {
    Dataset out{name, images.gather(indices), labels.gather(indices), {}};
    for (auto i : indices) out.splits.push_back(splits[i]);
    return out;
  }

  Dataset subset(Split s) const {
    auto idx = indices_of(s);
    return gather(idx);
  }

  Dataset head(std::size_t count) const {
    std::vector<std::size_t> idx(std::min(count, size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return gather(idx);
  }
};

}  // namespace advbench
