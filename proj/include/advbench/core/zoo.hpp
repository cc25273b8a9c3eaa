#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <string_view>

#include "advbench/core/classifier.hpp"
#include "advbench/core/layers.hpp"

namespace advbench {

/// Softmax/sigmoid read-out of a single dense layer over the flattened image. Used as the
/// closed-form oracle model in tests.
template <class T>
class LinearClassifier final : public Classifier<T> {
 public:
  LinearClassifier(Shape input, int k, Task task = Task::single_label, std::uint64_t seed = 0)
      : Classifier<T>("linear", input, k, task, seed) {
    std::mt19937_64 rng(seed);
    head_ = layers::Dense::create(this->params_, "head", input.frame_size(), static_cast<std::size_t>(k), rng);
  }

  AlignedVector<T>& weights() { return this->params_.block(head_.weight); }
  AlignedVector<T>& biases() { return this->params_.block(head_.bias); }

  ForwardPass<T> forward(const Tensor<T>& x) const override {
    this->check_input(x);
    ForwardPass<T> pass;
    pass.input = x;
    pass.logits = head_.forward(this->params_, x);
    return pass;
  }

  Tensor<T> backward(const ForwardPass<T>& pass, const Tensor<T>& grad_logits, Parameters<T>* grads,
                     bool need_input_grad) const override {
    auto g = head_.backward(this->params_, pass.input, grad_logits, grads, need_input_grad);
    if (need_input_grad) g = std::move(g).reshaped(pass.input.shape());
    return g;
  }

  std::unique_ptr<Classifier<T>> clone() const override { return std::make_unique<LinearClassifier>(*this); }

 private:
  layers::Dense head_;
};

/// conv(3x3)-ReLU-pool x2 trunk shared by the convolutional zoo models.
struct ConvTrunk {
  layers::Conv2d conv1, conv2;

  template <class T>
  static ConvTrunk create(Parameters<T>& params, std::size_t in_channels, std::size_t c1, std::size_t c2,
                          std::mt19937_64& rng) {
    return {layers::Conv2d::create(params, "conv1", in_channels, c1, 3, rng),
            layers::Conv2d::create(params, "conv2", c1, c2, 3, rng)};
  }

  // activations: [pre1, act1, pool1, pre2, act2, pool2]
  template <class T>
  void forward(const Parameters<T>& params, const Tensor<T>& x, std::vector<Tensor<T>>& acts) const {
    acts.push_back(conv1.forward(params, x));
    acts.push_back(layers::relu(acts.back()));
    acts.push_back(layers::max_pool2(acts.back()));
    acts.push_back(conv2.forward(params, acts.back()));
    acts.push_back(layers::relu(acts.back()));
    acts.push_back(layers::max_pool2(acts.back()));
  }

  template <class T>
  Tensor<T> backward(const Parameters<T>& params, const Tensor<T>& x, const std::vector<Tensor<T>>& acts,
                     Tensor<T> grad_pool2, Parameters<T>* grads, bool need_input_grad) const {
    auto g = layers::max_pool2_backward(acts[4], grad_pool2);
    g = layers::relu_backward(acts[3], g);
    g = conv2.backward(params, acts[2], g, grads, true);
    g = layers::max_pool2_backward(acts[1], g);
    g = layers::relu_backward(acts[0], g);
    return conv1.backward(params, x, g, grads, need_input_grad);
  }

};

/// Plain CNN: two conv blocks and a dense head. With Task::multi_label the k outputs are
/// read as independent sigmoids.
template <class T>
class ConvClassifier final : public Classifier<T> {
 public:
  ConvClassifier(Shape input, int k, Task task, std::uint64_t seed, std::size_t c1 = 8, std::size_t c2 = 16)
      : Classifier<T>(task == Task::single_label ? "plain-cnn" : "multilabel-cnn", input, k, task, seed) {
    require(input.h % 4 == 0 && input.w % 4 == 0, "conv zoo models need spatial extents divisible by 4");
    std::mt19937_64 rng(seed);
    trunk_ = ConvTrunk::create(this->params_, input.c, c1, c2, rng);
    features_ = c2 * (input.h / 4) * (input.w / 4);
    head_ = layers::Dense::create(this->params_, "head", features_, static_cast<std::size_t>(k), rng);
  }

  ForwardPass<T> forward(const Tensor<T>& x) const override {
    this->check_input(x);
    ForwardPass<T> pass;
    pass.input = x;
    trunk_.forward(this->params_, x, pass.activations);
    pass.logits = head_.forward(this->params_, pass.activations.back());
    return pass;
  }

  Tensor<T> backward(const ForwardPass<T>& pass, const Tensor<T>& grad_logits, Parameters<T>* grads,
                     bool need_input_grad) const override {
    const auto& pooled = pass.activations.back();
    auto g = head_.backward(this->params_, pooled, grad_logits, grads, true).reshaped(pooled.shape());
    return trunk_.backward(this->params_, pass.input, pass.activations, std::move(g), grads, need_input_grad);
  }

  std::vector<std::string> tap_names() const override { return {"conv1", "conv2", "features"}; }

  Tensor<T> tap(const ForwardPass<T>& pass, std::string_view name) const override {
    if (name == "conv1") return pass.activations[1];
    if (name == "conv2") return pass.activations[4];
    if (name == "features") {
      const auto& p = pass.activations[5];
      return p.reshaped({p.shape().n, p.shape().frame_size(), 1, 1});
    }
    return Classifier<T>::tap(pass, name);
  }

  std::unique_ptr<Classifier<T>> clone() const override { return std::make_unique<ConvClassifier>(*this); }

 private:
  ConvTrunk trunk_;
  layers::Dense head_;
  std::size_t features_ = 0;
};

/// Plain CNN trunk plus a pixel-wise spatial attention module: a 1x1 conv scores each
/// position of the last feature map, a softmax over positions gives the attention map A,
/// and the A-weighted feature vector feeds a second dense head added to the plain one.
template <class T>
class AttentionClassifier final : public Classifier<T> {
 public:
  AttentionClassifier(Shape input, int k, std::uint64_t seed, std::size_t c1 = 8, std::size_t c2 = 16)
      : Classifier<T>("attention-cnn", input, k, Task::single_label, seed) {
    require(input.h % 4 == 0 && input.w % 4 == 0, "conv zoo models need spatial extents divisible by 4");
    std::mt19937_64 rng(seed);
    trunk_ = ConvTrunk::create(this->params_, input.c, c1, c2, rng);
    score_ = layers::Conv2d::create(this->params_, "attention.score", c2, 1, 1, rng);
    head_ = layers::Dense::create(this->params_, "head", c2 * (input.h / 4) * (input.w / 4),
                                  static_cast<std::size_t>(k), rng);
    attended_head_ = layers::Dense::create(this->params_, "attention.head", c2, static_cast<std::size_t>(k), rng);
  }

  // activations: trunk[0..5], score logits [6], attention map [7], attended features [8]
  ForwardPass<T> forward(const Tensor<T>& x) const override {
    this->check_input(x);
    ForwardPass<T> pass;
    pass.input = x;
    auto& acts = pass.activations;
    trunk_.forward(this->params_, x, acts);
    const Tensor<T>& f = acts[5];
    const Shape fs = f.shape();
    const std::size_t positions = fs.h * fs.w;
    acts.push_back(score_.forward(this->params_, f));
    Tensor<T> attn({fs.n, 1, fs.h, fs.w});
    Tensor<T> attended({fs.n, fs.c, 1, 1});
    for (std::size_t n = 0; n < fs.n; ++n) {
      auto s = acts[6].frame(n);
      auto a = attn.frame(n);
      const T m = *std::max_element(s.begin(), s.end());
      T z = T(0);
      for (std::size_t p = 0; p < positions; ++p) z += (a[p] = std::exp(s[p] - m));
      for (std::size_t p = 0; p < positions; ++p) a[p] /= z;
      for (std::size_t c = 0; c < fs.c; ++c) {
        T acc = T(0);
        for (std::size_t p = 0; p < positions; ++p) acc += a[p] * f.frame(n)[c * positions + p];
        attended.frame(n)[c] = acc;
      }
    }
    acts.push_back(std::move(attn));
    acts.push_back(std::move(attended));
    pass.logits = head_.forward(this->params_, f);
    layers::add_inplace(pass.logits, attended_head_.forward(this->params_, acts[8]));
    return pass;
  }

  Tensor<T> backward(const ForwardPass<T>& pass, const Tensor<T>& grad_logits, Parameters<T>* grads,
                     bool need_input_grad) const override {
    const auto& acts = pass.activations;
    const Tensor<T>& f = acts[5];
    const Shape fs = f.shape();
    const std::size_t positions = fs.h * fs.w;
    auto df = head_.backward(this->params_, f, grad_logits, grads, true).reshaped(fs);
    auto dg = attended_head_.backward(this->params_, acts[8], grad_logits, grads, true);
    Tensor<T> dscore({fs.n, 1, fs.h, fs.w});
    for (std::size_t n = 0; n < fs.n; ++n) {
      auto a = acts[7].frame(n);
      auto fr = f.frame(n);
      auto dfr = df.frame(n);
      auto g = dg.frame(n);
      std::vector<T> da(positions, T(0));
      for (std::size_t c = 0; c < fs.c; ++c)
        for (std::size_t p = 0; p < positions; ++p) {
          dfr[c * positions + p] += a[p] * g[c];
          da[p] += fr[c * positions + p] * g[c];
        }
      T dot = T(0);
      for (std::size_t p = 0; p < positions; ++p) dot += a[p] * da[p];
      auto ds = dscore.frame(n);
      for (std::size_t p = 0; p < positions; ++p) ds[p] = a[p] * (da[p] - dot);
    }
    layers::add_inplace(df, score_.backward(this->params_, f, dscore, grads, true));
    return trunk_.backward(this->params_, pass.input, acts, std::move(df), grads, need_input_grad);
  }

  std::vector<std::string> tap_names() const override { return {"conv1", "conv2", "features", "attention"}; }

  Tensor<T> tap(const ForwardPass<T>& pass, std::string_view name) const override {
    if (name == "conv1") return pass.activations[1];
    if (name == "conv2") return pass.activations[4];
    if (name == "features") {
      const auto& p = pass.activations[5];
      return p.reshaped({p.shape().n, p.shape().frame_size(), 1, 1});
    }
    if (name == "attention") return pass.activations[7];
    return Classifier<T>::tap(pass, name);
  }

  bool has_attention() const override { return true; }

  std::unique_ptr<Classifier<T>> clone() const override { return std::make_unique<AttentionClassifier>(*this); }

 private:
  ConvTrunk trunk_;
  layers::Conv2d score_;
  layers::Dense head_, attended_head_;
};

enum class ZooModel { plain_cnn, attention_cnn, multilabel_cnn, linear };

inline ZooModel parse_zoo_model(std::string_view s) {
  if (s == "plain-cnn") return ZooModel::plain_cnn;
  if (s == "attention-cnn") return ZooModel::attention_cnn;
  if (s == "multilabel-cnn") return ZooModel::multilabel_cnn;
  if (s == "linear") return ZooModel::linear;
  throw ValidationError("unknown zoo model '" + std::string(s) + "'");
}

inline std::string_view to_string(ZooModel m) {
  switch (m) {
    case ZooModel::plain_cnn: return "plain-cnn";
    case ZooModel::attention_cnn: return "attention-cnn";
    case ZooModel::multilabel_cnn: return "multilabel-cnn";
    case ZooModel::linear: return "linear";
  }
  return "?";
}

struct ZooSpec {
  ZooModel model = ZooModel::plain_cnn;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
};

template <class T>
std::unique_ptr<Classifier<T>> make_classifier(const ZooSpec& spec, Shape input, int k, std::uint64_t seed) {
  switch (spec.model) {
    case ZooModel::plain_cnn:
      return std::make_unique<ConvClassifier<T>>(input, k, Task::single_label, seed, spec.conv1_channels,
                                                 spec.conv2_channels);
    case ZooModel::multilabel_cnn:
      return std::make_unique<ConvClassifier<T>>(input, k, Task::multi_label, seed, spec.conv1_channels,
                                                 spec.conv2_channels);
    case ZooModel::attention_cnn:
      return std::make_unique<AttentionClassifier<T>>(input, k, seed, spec.conv1_channels, spec.conv2_channels);
    case ZooModel::linear:
      return std::make_unique<LinearClassifier<T>>(input, k, Task::single_label, seed);
  }
  throw ContractError("unhandled zoo model");
}

}  // namespace advbench
