#pragma once

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "advbench/attacks/pgd.hpp"
#include "advbench/core/layers.hpp"
#include "advbench/core/optim.hpp"

namespace advbench {

/// U-Net-shaped image-to-image generator: three resolution levels (full, 1/2, 1/4) with
/// skip connections, a tanh head, and output extents equal to the input.
template <class T>
class PerturbationGenerator {
 public:
  struct Options {
    std::size_t base_channels = 8;
    /// Zero head weights make a fresh generator emit exactly zero.
    bool zero_head = false;
    std::uint64_t seed = 0;
  };

  PerturbationGenerator(Shape frame, Options options) : frame_(frame.with_batch(1)), options_(options) {
    require(frame.h % 4 == 0 && frame.w % 4 == 0, "generator needs spatial extents divisible by 4");
    std::mt19937_64 rng(options.seed);
    const std::size_t c = options.base_channels, in = frame.c;
    enc1_ = layers::Conv2d::create(params_, "enc1", in, c, 3, rng);
    enc2_ = layers::Conv2d::create(params_, "enc2", c, 2 * c, 3, rng);
    bottleneck_ = layers::Conv2d::create(params_, "bottleneck", 2 * c, 2 * c, 3, rng);
    dec2_ = layers::Conv2d::create(params_, "dec2", 4 * c, c, 3, rng);
    dec1_ = layers::Conv2d::create(params_, "dec1", 2 * c, c, 3, rng);
    head_ = layers::Conv2d::create(params_, "head", c, in, 3, rng);
    if (options.zero_head) {
      params_.fill_block(head_.weight, T(0));
      params_.fill_block(head_.bias, T(0));
    }
  }

  Shape frame() const { return frame_; }
  Parameters<T>& parameters() { return params_; }
  const Parameters<T>& parameters() const { return params_; }

  struct Pass {
    Tensor<T> input;
    // e1 pre/act, p1, e2 pre/act, p2, b pre/act, u2, c2, d2 pre/act, u1, c1, d1 pre/act, head pre, out
    std::vector<Tensor<T>> acts;
    const Tensor<T>& output() const { return acts.back(); }
  };

  Pass forward(const Tensor<T>& x) const {
    const Shape s = x.shape();
    require(s.c == frame_.c && s.h == frame_.h && s.w == frame_.w,
            "generator expects frames " + frame_.str() + ", got " + s.str());
    Pass pass{x, {}};
    auto& a = pass.acts;
    a.reserve(19);
    a.push_back(enc1_.forward(params_, x));                       // 0
    a.push_back(layers::relu(a[0]));                              // 1 e1
    a.push_back(layers::max_pool2(a[1]));                         // 2
    a.push_back(enc2_.forward(params_, a[2]));                    // 3
    a.push_back(layers::relu(a[3]));                              // 4 e2
    a.push_back(layers::max_pool2(a[4]));                         // 5
    a.push_back(bottleneck_.forward(params_, a[5]));              // 6
    a.push_back(layers::relu(a[6]));                              // 7
    a.push_back(layers::upsample2(a[7]));                         // 8
    a.push_back(layers::concat_channels(a[8], a[4]));             // 9
    a.push_back(dec2_.forward(params_, a[9]));                    // 10
    a.push_back(layers::relu(a[10]));                             // 11
    a.push_back(layers::upsample2(a[11]));                        // 12
    a.push_back(layers::concat_channels(a[12], a[1]));            // 13
    a.push_back(dec1_.forward(params_, a[13]));                   // 14
    a.push_back(layers::relu(a[14]));                             // 15
    a.push_back(head_.forward(params_, a[15]));                   // 16
    a.push_back(layers::tanh(a[16]));                             // 17 output
    return pass;
  }

  /// Accumulates parameter gradients for dL/d(output).
  void backward(const Pass& pass, const Tensor<T>& grad_out, Parameters<T>& grads) const {
    const auto& a = pass.acts;
    auto g = layers::tanh_backward(a[17], grad_out);
    g = head_.backward(params_, a[15], g, &grads, true);
    g = layers::relu_backward(a[14], g);
    g = dec1_.backward(params_, a[13], g, &grads, true);
    auto [gu1, ge1_skip] = layers::split_channels(g, a[12].shape().c);
    g = layers::upsample2_backward(gu1);
    g = layers::relu_backward(a[10], g);
    g = dec2_.backward(params_, a[9], g, &grads, true);
    auto [gu2, ge2_skip] = layers::split_channels(g, a[8].shape().c);
    g = layers::upsample2_backward(gu2);
    g = layers::relu_backward(a[6], g);
    g = bottleneck_.backward(params_, a[5], g, &grads, true);
    g = layers::max_pool2_backward(a[4], g);
    layers::add_inplace(g, ge2_skip);
    g = layers::relu_backward(a[3], g);
    g = enc2_.backward(params_, a[2], g, &grads, true);
    g = layers::max_pool2_backward(a[1], g);
    layers::add_inplace(g, ge1_skip);
    g = layers::relu_backward(a[0], g);
    enc1_.backward(params_, pass.input, g, &grads, false);
  }

 private:
  Shape frame_;
  Options options_;
  Parameters<T> params_;
  layers::Conv2d enc1_, enc2_, bottleneck_, dec2_, dec1_, head_;
};

/// Per-image multiplier min(1, eps / ||raw_i||_inf); zero images keep multiplier 1.
template <class T>
std::vector<T> perturbation_scales(const Tensor<T>& raw, double epsilon) {
  require(epsilon >= 0.0, "scale_perturbation needs epsilon >= 0");
  std::vector<T> scales(raw.shape().n, T(1));
  for (std::size_t n = 0; n < raw.shape().n; ++n) {
    T norm = T(0);
    for (T v : raw.frame(n)) norm = std::max(norm, std::abs(v));
    if (norm > static_cast<T>(epsilon)) scales[n] = static_cast<T>(epsilon) / norm;
  }
  return scales;
}

/// Rescales each image's perturbation into the L-infinity ball of radius epsilon.
template <class T>
Tensor<T> scale_perturbation(const Tensor<T>& raw, double epsilon) {
  const auto scales = perturbation_scales(raw, epsilon);
  Tensor<T> out(raw.shape());
  for (std::size_t n = 0; n < raw.shape().n; ++n) {
    auto src = raw.frame(n);
    auto dst = out.frame(n);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * scales[n];
  }
  return out;
}

/// Vector-Jacobian product of scale_perturbation. When the norm is active the multiplier
/// eps/||u|| also depends on the arg-max entry of |u|.
template <class T>
Tensor<T> scale_perturbation_backward(const Tensor<T>& raw, double epsilon, const Tensor<T>& grad_scaled) {
  const auto scales = perturbation_scales(raw, epsilon);
  Tensor<T> g(raw.shape());
  for (std::size_t n = 0; n < raw.shape().n; ++n) {
    auto u = raw.frame(n);
    auto gs = grad_scaled.frame(n);
    auto gu = g.frame(n);
    for (std::size_t i = 0; i < u.size(); ++i) gu[i] = scales[n] * gs[i];
    if (scales[n] < T(1)) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < u.size(); ++i)
        if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
      const T norm = std::abs(u[arg]);
      T dot = T(0);
      for (std::size_t i = 0; i < u.size(); ++i) dot += gs[i] * u[i];
      gu[arg] -= static_cast<T>(epsilon) / (norm * norm) * sign(u[arg]) * dot;
    }
  }
  return g;
}

/// x' = clip(x + scale_perturbation(G(x), eps)). Predictions are filled by `annotate`.
template <class T>
AdversarialBatch<T> gap_perturb(const PerturbationGenerator<T>& gen, const ImageBatch<T>& x, double epsilon) {
  require(epsilon >= 0.0, "gap_perturb needs epsilon >= 0");
  const Shape f = gen.frame();
  const Shape s = x.data.shape();
  require(s.c == f.c && s.h == f.h && s.w == f.w, "gap_perturb shape mismatch: generator " + f.str() + ", images " + s.str());
  ImageBatch<T> candidate{Tensor<T>(s), x.ids};
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < s.n; start += detail::kAttackChunk) {
    const std::size_t end = std::min(s.n, start + detail::kAttackChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto chunk = x.data.gather(idx);
    auto scaled = scale_perturbation(gen.forward(chunk).output(), epsilon);
    const std::size_t offset = start * s.frame_size();
    for (std::size_t i = 0; i < scaled.size(); ++i) candidate.data[offset + i] = chunk[i] + scaled[i];
  }
  AttackBudget b;
  b.epsilon = epsilon;
  b.random_init = false;
  return make_adversarial(x, clip_to_ball(candidate, x, epsilon), b);
}

template <class T>
AdversarialBatch<T> gap_attack(const PerturbationGenerator<T>& gen, const Classifier<T>& model, const ImageBatch<T>& x,
                               double epsilon) {
  auto adv = gap_perturb(gen, x, epsilon);
  annotate(adv, model);
  return adv;
}

struct GapTrainConfig {
  int epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct GapEpochRecord {
  int epoch = 0;
  /// Batch-mean generator objective over the epoch (true-class log-probability for
  /// single-label, negated BCE for multi-label).
  double objective = 0.0;
  double train_fooling_rate = 0.0;
  double val_fooling_rate = 0.0;
};

struct GapTrainLog {
  std::vector<GapEpochRecord> epochs;
};

/// Trains the generator against a frozen classifier by minimizing the generator objective
/// on the train split. Only the generator's parameters change.
template <class T>
GapTrainLog train_gap_generator(PerturbationGenerator<T>& gen, const Classifier<T>& model, const Dataset<T>& data,
                                double epsilon, const GapTrainConfig& cfg) {
  require(epsilon > 0.0, "GAP training needs epsilon > 0");
  require(cfg.batch_size > 0 && cfg.epochs >= 0, "invalid GAP training config");
  const auto train = data.subset(Split::train);
  const auto val = data.subset(Split::val);
  require(train.size() > 0, "GAP training needs a non-empty train split");
  const LossSpec spec = LossSpec::generator_for(data.task());
  const T eps = static_cast<T>(epsilon);

  Adam<T> opt(cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  GapTrainLog log;

  auto fooling = [&](const Dataset<T>& split) {
    if (split.size() == 0) return 0.0;
    return gap_attack(gen, model, split.images, epsilon).success_rate();
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double objective_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto x = train.images.gather(idx);
      const auto y = train.labels.gather(idx);

      const auto pass = gen.forward(x.data);
      const Tensor<T>& raw = pass.output();
      const auto scaled = scale_perturbation(raw, epsilon);
      ImageBatch<T> adv{Tensor<T>(x.data.shape()), x.ids};
      Tensor<T> inside(x.data.shape());
      for (std::size_t i = 0; i < scaled.size(); ++i) {
        const T c = x.data[i], v = c + scaled[i];
        const T lo = std::max(T(0), c - eps), hi = std::min(T(1), c + eps);
        adv.data[i] = std::clamp(v, lo, hi);
        inside[i] = (v >= lo && v <= hi) ? T(1) : T(0);
      }
      auto lg = loss_and_input_grad(model, adv, y, spec);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("GAP objective not finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / cfg.batch_size));
      }
      objective_sum += static_cast<double>(lg.loss) * static_cast<double>(idx.size());
      for (std::size_t i = 0; i < inside.size(); ++i) lg.grad[i] *= inside[i];
      auto graw = scale_perturbation_backward(raw, epsilon, lg.grad);
      auto grads = gen.parameters().zeros_like();
      gen.backward(pass, graw, grads);
      opt.step(gen.parameters(), grads);
    }
    if (!gen.parameters().all_finite()) throw NumericError("GAP generator diverged at epoch " + std::to_string(epoch));
    log.epochs.push_back({epoch, objective_sum / static_cast<double>(train.size()), fooling(train), fooling(val)});
  }
  return log;
}

}  // namespace advbench
