#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "advbench/core/losses.hpp"
#include "advbench/core/optim.hpp"
#include "advbench/core/zoo.hpp"
#include "support.hpp"

namespace advbench {
namespace {

using testing::finite_difference;
using testing::random_images;
using testing::random_multi_labels;
using testing::random_single_labels;
using testing::relative_error;

const Shape kFrame{1, 1, 8, 8};

std::unique_ptr<Classifier<double>> zoo(ZooModel m, int k, std::uint64_t seed = 3) {
  return make_classifier<double>({m, 4, 6}, kFrame, k, seed);
}

TEST(PredictProba, ZeroHeadGivesUniformRows) {
  auto model = zoo(ZooModel::plain_cnn, 4);
  for (auto name : {"head.weight", "head.bias"}) {
    auto& b = model->parameters().block(model->parameters().find(name));
    std::fill(b.begin(), b.end(), 0.0);
  }
  auto x = random_images<double>({5, 1, 8, 8}, 1);
  auto p = predict_proba(*model, x.data);
  for (double v : p.values) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(PredictProba, RowsAreDistributions) {
  for (auto m : {ZooModel::plain_cnn, ZooModel::attention_cnn, ZooModel::linear}) {
    auto model = zoo(m, 5);
    auto p = predict_proba(*model, random_images<double>({7, 1, 8, 8}, 2).data);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double s = 0;
      for (double v : p.row(i)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
  auto multi = zoo(ZooModel::multilabel_cnn, 6);
  auto p = predict_proba(*multi, random_images<double>({7, 1, 8, 8}, 2).data);
  for (double v : p.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(PredictProba, TwoPixelLogisticHandValue) {
  LinearClassifier<double> model({1, 1, 1, 2}, 2);
  model.weights() = {1.0, -1.0, 0.0, 0.0};
  model.biases() = {0.0, 0.0};
  Tensor<double> x({1, 1, 1, 2}, std::vector<double>{0.8, 0.2});
  auto p = predict_proba(model, x);
  EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + std::exp(-0.6)), 1e-12);
  EXPECT_NEAR(p(0, 0), 0.6457, 5e-5);
}

TEST(PredictProba, ShapeMismatchIsContractError) {
  auto model = zoo(ZooModel::plain_cnn, 3);
  EXPECT_THROW(predict_proba(*model, Tensor<double>({1, 1, 12, 12})), ContractError);
}

TEST(PredictProba, ForwardIsBitReproducible) {
  auto a = zoo(ZooModel::attention_cnn, 3, 11);
  auto b = zoo(ZooModel::attention_cnn, 3, 11);
  auto x = random_images<double>({4, 1, 8, 8}, 5);
  EXPECT_EQ(predict_proba(*a, x.data).values, predict_proba(*b, x.data).values);
  EXPECT_EQ(predict_proba(*a, x.data).values, predict_proba(*a, x.data).values);
}

struct GradCase {
  ZooModel model;
  int k;
};

class InputGradient : public ::testing::TestWithParam<GradCase> {};

TEST_P(InputGradient, MatchesCentralDifferences) {
  const auto [m, k] = GetParam();
  auto model = zoo(m, k, 17);
  auto x = random_images<double>({3, 1, 8, 8}, 23);
  auto y = model->task() == Task::single_label ? random_single_labels(3, k, 5) : random_multi_labels(3, k, 5);
  const auto spec = LossSpec::default_for(model->task());
  auto lg = loss_and_input_grad(*model, x, y, spec);
  ASSERT_EQ(lg.grad.shape(), x.data.shape());
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pick(0, x.data.size() - 1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto i = pick(rng);
    const double fd = finite_difference(*model, x.data, y, spec, i);
    EXPECT_LE(relative_error(fd, lg.grad[i]), 1e-3) << "pixel " << i << " fd=" << fd << " an=" << lg.grad[i];
  }
}

INSTANTIATE_TEST_SUITE_P(Zoo, InputGradient,
                         ::testing::Values(GradCase{ZooModel::plain_cnn, 4}, GradCase{ZooModel::attention_cnn, 3},
                                           GradCase{ZooModel::multilabel_cnn, 5}, GradCase{ZooModel::linear, 3}));

TEST(ParameterGradient, MatchesCentralDifferences) {
  for (auto m : {ZooModel::plain_cnn, ZooModel::attention_cnn, ZooModel::multilabel_cnn}) {
    auto model = zoo(m, 3, 8);
    auto x = random_images<double>({2, 1, 8, 8}, 4);
    auto y = model->task() == Task::single_label ? random_single_labels(2, 3, 1) : random_multi_labels(2, 3, 1);
    const auto spec = LossSpec::default_for(model->task());
    auto pass = model->forward(x.data);
    auto lg = loss_from_logits(pass.logits, y, spec);
    auto grads = model->parameters().zeros_like();
    model->backward(pass, lg.grad, &grads, false);
    auto& params = model->parameters();
    for (std::size_t b = 0; b < params.num_blocks(); ++b) {
      auto& block = params.block(b);
      const std::size_t i = block.size() / 2;
      const double orig = block[i], h = 1e-5;
      block[i] = orig + h;
      const double up = testing::loss_value(*model, x.data, y, spec);
      block[i] = orig - h;
      const double down = testing::loss_value(*model, x.data, y, spec);
      block[i] = orig;
      EXPECT_LE(relative_error((up - down) / (2 * h), grads.block(b)[i]), 1e-3)
          << to_string(m) << " block " << params.name(b);
    }
  }
}

TEST(InputGradient, MaskedPixelHasZeroGradient) {
  LinearClassifier<double> model({1, 1, 2, 2}, 2, Task::single_label, 1);
  model.weights() = {0.3, -0.2, 0.0, 0.7, -0.3, 0.2, 0.0, -0.7};
  auto x = random_images<double>({2, 1, 2, 2}, 3);
  auto lg = loss_and_input_grad(model, x, LabelBatch::single(2, {0, 1}), LossSpec{});
  EXPECT_EQ(lg.grad.at(0, 0, 1, 0), 0.0);
  EXPECT_EQ(lg.grad.at(1, 0, 1, 0), 0.0);
}

TEST(InputGradient, LogisticClosedForm) {
  // Two-class softmax with logits (w.x, 0) is logistic in w.x; dCE/dx = (p0 - y0) w.
  LinearClassifier<double> model({1, 1, 1, 3}, 2);
  const std::vector<double> w{0.5, -1.5, 2.0};
  model.weights() = {w[0], w[1], w[2], 0, 0, 0};
  model.biases() = {0, 0};
  ImageBatch<double> x{Tensor<double>({1, 1, 1, 3}, std::vector<double>{0.2, 0.4, 0.9}), {"a"}};
  auto lg = loss_and_input_grad(model, x, LabelBatch::single(2, {0}), LossSpec{});
  const double p0 = 1.0 / (1.0 + std::exp(-(0.5 * 0.2 - 1.5 * 0.4 + 2.0 * 0.9)));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(lg.grad[j], (p0 - 1.0) * w[j], 1e-12);
}

TEST(InputGradient, NonFiniteLossNamesImages) {
  LinearClassifier<double> model({1, 1, 1, 2}, 2);
  model.weights() = {std::nan(""), 0, 0, 0};
  ImageBatch<double> x{Tensor<double>({1, 1, 1, 2}, std::vector<double>{0.5, 0.5}), {"bad-image"}};
  try {
    loss_and_input_grad(model, x, LabelBatch::single(2, {0}), LossSpec{});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-image"), std::string::npos);
  }
}

TEST(Losses, TaskMismatchRejected) {
  Tensor<double> logits({1, 3, 1, 1});
  EXPECT_THROW(loss_from_logits(logits, LabelBatch::multi(3, {1, 0, 1}), LossSpec{LossKind::cross_entropy}),
               TaskMismatchError);
}

TEST(Losses, TrueClassLogProbabilityIsNonPositive) {
  Tensor<double> logits({2, 3, 1, 1}, std::vector<double>{0.1, 2.0, -1.0, 3.0, 0.0, 0.0});
  auto lg = loss_from_logits(logits, LabelBatch::single(3, {1, 2}), LossSpec{LossKind::true_class_log_probability});
  EXPECT_LE(lg.loss, 0.0);
  auto ce = loss_from_logits(logits, LabelBatch::single(3, {1, 2}), LossSpec{LossKind::cross_entropy});
  EXPECT_DOUBLE_EQ(lg.loss, -ce.loss);
}

TEST(OneHot, Examples) {
  auto rows = one_hot(LabelBatch::single(3, {0, 2}));
  EXPECT_EQ(rows[0], (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_EQ(rows[1], (std::vector<std::uint8_t>{0, 0, 1}));
}

TEST(OneHot, ArgmaxRoundTrip) {
  const int k = 7;
  std::vector<int> all(k);
  std::iota(all.begin(), all.end(), 0);
  auto rows = one_hot(LabelBatch::single(k, all));
  for (int c = 0; c < k; ++c) {
    std::vector<double> r(rows[static_cast<std::size_t>(c)].begin(), rows[static_cast<std::size_t>(c)].end());
    EXPECT_EQ(argmax<double>(r), c);
  }
}

TEST(OneHot, MultiLabelRejected) { EXPECT_THROW(one_hot(LabelBatch::multi(2, {1, 1})), TaskMismatchError); }

TEST(KlDivergence, Examples) {
  std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  EXPECT_NEAR(kl_divergence<double>(p, q), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-12);
  EXPECT_NEAR(kl_divergence<double>(p, q), 0.14384, 1e-5);
  std::vector<double> one{1.0, 0.0}, half{0.5, 0.5};
  EXPECT_NEAR(kl_divergence<double>(one, half), std::log(2.0), 1e-12);
  EXPECT_EQ(kl_divergence<double>(p, p), 0.0);
}

TEST(KlDivergence, LengthMismatch) {
  std::vector<double> a{0.5, 0.5}, b{1.0};
  EXPECT_THROW(kl_divergence<double>(a, b), ContractError);
}

TEST(KlDivergence, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> p(4), q(4);
    double sp = 0, sq = 0;
    for (int j = 0; j < 4; ++j) {
      sp += p[j] = u(rng);
      sq += q[j] = u(rng);
    }
    for (int j = 0; j < 4; ++j) {
      p[j] /= sp;
      q[j] /= sq;
    }
    EXPECT_GE(kl_divergence<double>(p, q), 0.0);
    EXPECT_EQ(kl_divergence<double>(p, p), 0.0);
  }
}

TEST(Parameters, HashTracksValues) {
  auto model = zoo(ZooModel::plain_cnn, 3);
  const auto h = model->parameters().hash();
  EXPECT_EQ(h, zoo(ZooModel::plain_cnn, 3)->parameters().hash());
  model->parameters().block(0)[0] += 1e-9;
  EXPECT_NE(h, model->parameters().hash());
}

TEST(Optim, SgdMomentumMatchesHandRecurrence) {
  Parameters<double> p;
  p.add("w", 1, 1.0);
  auto g = p.zeros_like();
  g.block(0)[0] = 0.5;
  SgdMomentum<double> opt(0.1, 0.9);
  opt.step(p, g);  // v = 0.5, w = 0.95
  opt.step(p, g);  // v = 0.95, w = 0.855
  EXPECT_NEAR(p.block(0)[0], 0.855, 1e-15);
}

}  // namespace
}  // namespace advbench
