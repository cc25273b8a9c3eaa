#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "advbench/core/losses.hpp"
#include "advbench/io/image.hpp"
#include "advbench/robustbench/flip.hpp"

namespace advbench {

/// Per-pixel saliency of one image: (1, 1, h, w) raw values plus the [0,1] export form.
template <class T>
struct SaliencyMap {
  Tensor<T> raw;
  T min = T(0);
  T max = T(0);

  std::vector<T> normalized() const {
    T lo{}, hi{};
    return io::minmax_normalize<T>(raw.values(), lo, hi);
  }
};

/// Channelwise max of |d loss(x, y) / dx| for a single image under the model's default loss.
template <class T>
SaliencyMap<T> saliency_map(const Classifier<T>& model, const ImageBatch<T>& x, const LabelBatch& y) {
  require(x.size() == 1, "saliency_map takes a single image, got " + std::to_string(x.size()));
  require(y.size() == 1, "saliency_map needs one label");
  const auto lg = loss_and_input_grad(model, x, y, LossSpec::default_for(model.task()));
  const Shape s = x.data.shape();
  const std::size_t plane = s.h * s.w;
  SaliencyMap<T> out{Tensor<T>({1, 1, s.h, s.w})};
  for (std::size_t p = 0; p < plane; ++p) {
    T m = T(0);
    for (std::size_t c = 0; c < s.c; ++c) m = std::max(m, std::abs(lg.grad[c * plane + p]));
    out.raw[p] = m;
  }
  const auto& v = out.raw.values();
  out.min = *std::min_element(v.begin(), v.end());
  out.max = *std::max_element(v.begin(), v.end());
  return out;
}

/// Activations of the named layer tap for every image in x.
template <class T>
Tensor<T> feature_maps(const Classifier<T>& model, const Tensor<T>& x, std::string_view tap) {
  model.check_input(x);
  return model.tap(model.forward(x), tap);
}

/// Spatial attention maps, one entry per attention module, each (n, 1, h', w') and
/// summing to 1 over positions for every image.
template <class T>
std::vector<Tensor<T>> attention_maps(const Classifier<T>& model, const Tensor<T>& x) {
  if (!model.has_attention())
    throw CapabilityError("model '" + model.architecture() + "' exposes no attention maps");
  model.check_input(x);
  const auto pass = model.forward(x);
  std::vector<Tensor<T>> maps;
  for (const auto& name : model.tap_names()) {
    if (name.rfind("attention", 0) != 0) continue;
    Tensor<T> a = model.tap(pass, name);
    for (std::size_t n = 0; n < a.shape().n; ++n) {
      auto f = a.frame(n);
      T z = T(0);
      for (T v : f) z += v;
      if (!(z > T(0))) throw NumericError("attention map '" + name + "' has non-positive mass");
      for (T& v : f) v /= z;
    }
    maps.push_back(std::move(a));
  }
  return maps;
}

enum class Variant { clean, adversarial };

inline std::string_view to_string(Variant v) { return v == Variant::clean ? "clean" : "adversarial"; }

/// Writes one CSV row per image: id, split, variant, label, then the flattened tap output
/// f0..f{d-1}. Labels use the class index or a 0/1 string.
template <class T>
void write_embeddings_csv(std::ostream& out, const Classifier<T>& model, const ImageBatch<T>& images,
                          const LabelBatch& labels, std::string_view split, Variant variant, std::string_view tap,
                          bool header = true) {
  require(labels.size() == images.size(), "embeddings: labels not aligned with images");
  const auto feats = feature_maps(model, images.data, tap);
  const std::size_t d = feats.shape().frame_size();
  if (header) {
    out << "id,split,variant,label";
    for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
    out << '\n';
  }
  out.precision(9);
  for (std::size_t i = 0; i < images.size(); ++i) {
    out << images.ids[i] << ',' << split << ',' << to_string(variant) << ',' << prediction_token(labels, i);
    for (T v : feats.frame(i)) out << ',' << static_cast<double>(v);
    out << '\n';
  }
}

/// k x k counts of labels predicted together; the diagonal holds per-label counts.
struct CooccurrenceMatrix {
  std::vector<std::string> names;
  std::vector<std::uint64_t> counts;
  /// Export keeps entries strictly above this value.
  std::uint64_t threshold = 0;

  std::size_t k() const { return names.size(); }
  std::uint64_t operator()(std::size_t a, std::size_t b) const { return counts[a * k() + b]; }
};

inline CooccurrenceMatrix label_cooccurrence(const LabelBatch& preds, std::vector<std::string> names = {}) {
  if (preds.task != Task::multi_label) throw TaskMismatchError("label_cooccurrence needs multi-label predictions");
  preds.validate();
  const auto k = static_cast<std::size_t>(preds.k);
  if (names.empty())
    for (std::size_t j = 0; j < k; ++j) names.push_back("label" + std::to_string(j));
  require(names.size() == k, "label_cooccurrence: " + std::to_string(names.size()) + " names for k = " +
                                 std::to_string(k));
  CooccurrenceMatrix m{std::move(names), std::vector<std::uint64_t>(k * k, 0), 0};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto r = preds.row(i);
    for (std::size_t a = 0; a < k; ++a)
      if (r[a])
        for (std::size_t b = 0; b < k; ++b) m.counts[a * k + b] += r[b];
  }
  return m;
}

/// Edge list `label_a,label_b,count` over a <= b, keeping counts above the threshold.
inline void write_cooccurrence_csv(const std::filesystem::path& path, const CooccurrenceMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "label_a,label_b,count\n";
  for (std::size_t a = 0; a < m.k(); ++a)
    for (std::size_t b = a; b < m.k(); ++b)
      if (m(a, b) > m.threshold) out << m.names[a] << ',' << m.names[b] << ',' << m(a, b) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace advbench
