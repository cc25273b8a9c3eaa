#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "advbench/attacks/gap.hpp"
#include "advbench/attacks/pgd.hpp"
#include "advbench/core/zoo.hpp"
#include "support.hpp"

namespace advbench {
namespace {

using testing::random_images;
using testing::random_single_labels;

ImageBatch<double> single_pixel(double v) { return {Tensor<double>({1, 1, 1, 1}, std::vector<double>{v}), {"p"}}; }

TEST(ClipToBall, IdentityWhenCandidateIsCenter) {
  auto x = random_images<double>({3, 1, 4, 4}, 1);
  EXPECT_EQ(clip_to_ball(x, x, 0.05).data, x.data);
}

TEST(ClipToBall, UpperFaceBinds) {
  auto out = clip_to_ball(single_pixel(0.6), single_pixel(0.5), 2.0 / 255.0);
  EXPECT_DOUBLE_EQ(out.data[0], 0.5 + 2.0 / 255.0);
  EXPECT_NEAR(out.data[0], 0.507843, 1e-6);
}

TEST(ClipToBall, ValidRangeFloorBinds) {
  EXPECT_EQ(clip_to_ball(single_pixel(-0.1), single_pixel(0.0), 0.3).data[0], 0.0);
}

TEST(ClipToBall, ShapeMismatch) {
  auto a = random_images<double>({1, 1, 2, 2}, 1);
  auto b = random_images<double>({1, 1, 2, 3}, 1);
  EXPECT_THROW(clip_to_ball(a, b, 0.1), ContractError);
}

/// Two-class softmax with logits (w.x + b, 0): a logistic model in w.x + b.
LinearClassifier<double> logistic(const std::vector<double>& w, double b = 0.0) {
  LinearClassifier<double> m({1, 1, 1, w.size()}, 2);
  m.weights().assign(w.begin(), w.end());
  m.weights().resize(2 * w.size(), 0.0);
  m.biases() = {b, 0.0};
  return m;
}

double ce(const Classifier<double>& m, const Tensor<double>& x, const LabelBatch& y) {
  return testing::loss_value(m, x, y, LossSpec{});
}

TEST(Pgd, ZeroBudgetIsBitExactIdentity) {
  auto model = make_classifier<double>({ZooModel::plain_cnn, 4, 6}, {1, 1, 8, 8}, 3, 2);
  auto x = random_images<double>({4, 1, 8, 8}, 9);
  auto y = random_single_labels(4, 3, 1);
  auto budget = AttackBudget::pgd(0.0, 5, 0.01);
  budget.random_init = false;
  auto adv = pgd_attack(*model, x, y, budget);
  EXPECT_EQ(adv.perturbed.data, x.data);
  EXPECT_EQ(adv.success_rate(), 0.0);
  EXPECT_EQ(fgsm_attack(*model, x, y, 0.0).perturbed.data, x.data);
}

TEST(Pgd, OneStepMatchesClosedFormFgsm) {
  const std::vector<double> w{0.7, -1.2, 0.0, 2.0};
  auto model = logistic(w, 0.1);
  ImageBatch<double> x{Tensor<double>({1, 1, 1, 4}, std::vector<double>{0.3, 0.5, 0.2, 0.95}), {"a"}};
  const auto y = LabelBatch::single(2, {0});
  const double alpha = 0.04;
  auto budget = AttackBudget::pgd(0.05, 1, alpha);
  budget.random_init = false;
  auto adv = pgd_attack(model, x, y, budget);
  const double margin = 0.7 * 0.3 - 1.2 * 0.5 + 2.0 * 0.95 + 0.1;
  const double p0 = 1.0 / (1.0 + std::exp(-margin));
  for (std::size_t j = 0; j < 4; ++j) {
    const double g = (p0 - 1.0) * w[j];
    const double expected = std::clamp(x.data[j] + alpha * (g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0)), 0.0, 1.0);
    EXPECT_EQ(adv.perturbed.data[j], expected) << j;
  }
}

TEST(Pgd, FgsmEqualsSingleStepPgdBitExact) {
  auto model = make_classifier<double>({ZooModel::attention_cnn, 4, 6}, {1, 1, 8, 8}, 3, 7);
  auto x = random_images<double>({5, 1, 8, 8}, 3);
  auto y = random_single_labels(5, 3, 3);
  auto budget = AttackBudget::pgd(0.07, 1, 0.07);
  budget.random_init = false;
  EXPECT_EQ(fgsm_attack(*model, x, y, 0.07).perturbed.data, pgd_attack(*model, x, y, budget).perturbed.data);
}

/// Brute-force oracle: the maximum of a loss monotone in a linear score over the clipped
/// box lies at one of its corners.
double corner_max_loss(const Classifier<double>& m, const ImageBatch<double>& x, const LabelBatch& y, double eps) {
  const std::size_t d = x.data.size();
  double best = -1.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    Tensor<double> c = x.data;
    for (std::size_t j = 0; j < d; ++j)
      c[j] = (mask >> j) & 1 ? std::min(1.0, x.data[j] + eps) : std::max(0.0, x.data[j] - eps);
    best = std::max(best, ce(m, c, y));
  }
  return best;
}

TEST(Pgd, ReachesCornerMaximumOnLinearModel) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto model = logistic({n(rng), n(rng), n(rng), n(rng)}, n(rng));
    auto x = random_images<double>({1, 1, 1, 4}, 100 + static_cast<std::uint64_t>(trial));
    auto y = LabelBatch::single(2, {trial % 2});
    auto budget = AttackBudget::pgd(0.1, 10, 0.025, static_cast<std::uint64_t>(trial));
    auto adv = pgd_attack(model, x, y, budget);
    EXPECT_GE(ce(model, adv.perturbed.data, y), 0.99 * corner_max_loss(model, x, y, 0.1));
  }
}

TEST(Pgd, NonTargetAscentIsMonotoneOnLinearModel) {
  auto model = logistic({0.4, -0.9, 1.3, -0.2, 0.8, 0.1});
  auto x = random_images<double>({1, 1, 1, 6}, 12);
  auto y = LabelBatch::single(2, {1});
  double previous = ce(model, x.data, y);
  for (int t = 1; t <= 8; ++t) {
    auto budget = AttackBudget::pgd(0.08, t, 0.015);
    budget.random_init = false;
    const double loss = ce(model, pgd_attack(model, x, y, budget).perturbed.data, y);
    EXPECT_GE(loss, previous) << "step " << t;
    previous = loss;
  }
}

TEST(Pgd, AchievedLossMonotoneInBudget) {
  auto model = logistic({1.1, -0.3, 0.6, -1.4});
  auto x = random_images<double>({1, 1, 1, 4}, 77);
  auto y = LabelBatch::single(2, {0});
  double previous = -1.0;
  for (int i = 0; i <= 5; ++i) {
    const double eps = 0.02 * i;
    auto budget = AttackBudget::pgd(eps, 10);
    budget.random_init = false;
    const double loss = ce(model, pgd_attack(model, x, y, budget).perturbed.data, y);
    EXPECT_GE(loss, previous) << "eps " << eps;
    previous = loss;
  }
}

TEST(Pgd, TargetedModeDescendsTargetLoss) {
  auto model = make_classifier<double>({ZooModel::plain_cnn, 4, 6}, {1, 1, 8, 8}, 4, 5);
  auto x = random_images<double>({6, 1, 8, 8}, 8);
  auto target = LabelBatch::single(4, {3, 3, 3, 3, 3, 3});
  AttackBudget budget = AttackBudget::pgd(0.3, 20, 0.03, 2);
  budget.mode = AttackMode::targeted;
  budget.targets = target;
  auto adv = pgd_attack(*model, x, random_single_labels(6, 4, 1), budget);
  EXPECT_LT(ce(*model, adv.perturbed.data, target), ce(*model, x.data, target));
}

TEST(Pgd, TargetedMultiLabelDescendsBce) {
  auto model = make_classifier<double>({ZooModel::multilabel_cnn, 4, 6}, {1, 1, 8, 8}, 5, 6);
  auto x = random_images<double>({3, 1, 8, 8}, 2);
  std::vector<std::uint8_t> t;
  for (int i = 0; i < 3; ++i) t.insert(t.end(), {1, 0, 0, 1, 0});
  auto target = LabelBatch::multi(5, t);
  AttackBudget budget = AttackBudget::pgd(0.2, 10, 0.02, 1);
  budget.mode = AttackMode::targeted;
  budget.targets = target;
  auto adv = pgd_attack(*model, x, testing::random_multi_labels(3, 5, 1), budget);
  const LossSpec bce{LossKind::binary_cross_entropy};
  EXPECT_LT(testing::loss_value(*model, adv.perturbed.data, target, bce),
            testing::loss_value(*model, x.data, target, bce));
}

TEST(Pgd, TargetedWithoutTargetsRejected) {
  auto model = logistic({1.0});
  AttackBudget budget = AttackBudget::pgd(0.1, 1);
  budget.mode = AttackMode::targeted;
  EXPECT_THROW(pgd_attack(model, single_pixel(0.5), LabelBatch::single(2, {0}), budget), ContractError);
}

TEST(Pgd, BallAndRangeInvariantFuzz) {
  auto model = make_classifier<float>({ZooModel::plain_cnn, 4, 6}, {1, 1, 8, 8}, 3, 3);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> eps_d(0.0, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_images<float>({2, 1, 8, 8}, static_cast<std::uint64_t>(trial));
    auto y = random_single_labels(2, 3, static_cast<std::uint64_t>(trial));
    const double eps = eps_d(rng);
    auto adv = pgd_attack(*model, x, y, AttackBudget::pgd(eps, 3, eps / 2, static_cast<std::uint64_t>(trial)));
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      EXPECT_LE(std::abs(adv.perturbed.data[i] - x.data[i]), eps + 1e-7);
      EXPECT_GE(adv.perturbed.data[i], 0.0f);
      EXPECT_LE(adv.perturbed.data[i], 1.0f);
      EXPECT_EQ(adv.delta[i], adv.perturbed.data[i] - x.data[i]);
    }
  }
}

TEST(ScalePerturbation, Examples) {
  Tensor<double> raw({1, 1, 1, 2}, std::vector<double>{20.0 / 255.0, -5.0 / 255.0});
  auto scaled = scale_perturbation(raw, 10.0 / 255.0);
  EXPECT_NEAR(scaled[0], 10.0 / 255.0, 1e-15);
  EXPECT_NEAR(scaled[1], -2.5 / 255.0, 1e-15);
  Tensor<double> inside({1, 1, 1, 2}, std::vector<double>{5.0 / 255.0, 1.0 / 255.0});
  EXPECT_EQ(scale_perturbation(inside, 10.0 / 255.0), inside);
  Tensor<double> zero({2, 1, 1, 2});
  EXPECT_EQ(scale_perturbation(zero, 0.1), zero);
}

TEST(ScalePerturbation, ScalesEachImageIndependently) {
  Tensor<double> raw({2, 1, 1, 2}, std::vector<double>{0.4, 0.1, 0.05, -0.02});
  auto scaled = scale_perturbation(raw, 0.1);
  EXPECT_NEAR(scaled[0], 0.1, 1e-15);
  EXPECT_EQ(scaled[2], 0.05);
}

TEST(ScalePerturbation, BackwardMatchesFiniteDifferences) {
  Tensor<double> raw({1, 1, 1, 4}, std::vector<double>{0.3, -0.5, 0.1, 0.2});
  Tensor<double> weights({1, 1, 1, 4}, std::vector<double>{1.0, -2.0, 0.5, 3.0});
  auto objective = [&](const Tensor<double>& r) {
    auto s = scale_perturbation(r, 0.2);
    double v = 0;
    for (std::size_t i = 0; i < 4; ++i) v += weights[i] * s[i];
    return v;
  };
  auto g = scale_perturbation_backward(raw, 0.2, weights);
  for (std::size_t i = 0; i < 4; ++i) {
    auto up = raw, down = raw;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    EXPECT_NEAR(g[i], (objective(up) - objective(down)) / 2e-6, 1e-6) << i;
  }
}

TEST(Generator, ShapeAndZeroHead) {
  PerturbationGenerator<double> gen({1, 2, 8, 12}, {4, true, 1});
  auto x = random_images<double>({3, 2, 8, 12}, 4);
  auto pass = gen.forward(x.data);
  EXPECT_EQ(pass.output().shape(), x.data.shape());
  auto adv = gap_perturb(gen, x, 0.05);
  EXPECT_EQ(adv.perturbed.data, x.data);
}

TEST(Generator, ParameterGradientsMatchFiniteDifferences) {
  PerturbationGenerator<double> gen({1, 1, 8, 8}, {3, false, 5});
  auto x = random_images<double>({2, 1, 8, 8}, 6);
  Tensor<double> w(x.data.shape());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = n(rng);
  auto objective = [&] {
    auto out = gen.forward(x.data).output();
    double v = 0;
    for (std::size_t i = 0; i < out.size(); ++i) v += w[i] * out[i];
    return v;
  };
  auto grads = gen.parameters().zeros_like();
  gen.backward(gen.forward(x.data), w, grads);
  for (std::size_t b = 0; b < gen.parameters().num_blocks(); ++b) {
    auto& block = gen.parameters().block(b);
    const std::size_t i = block.size() / 3;
    const double orig = block[i];
    block[i] = orig + 1e-6;
    const double up = objective();
    block[i] = orig - 1e-6;
    const double down = objective();
    block[i] = orig;
    EXPECT_LE(testing::relative_error((up - down) / 2e-6, grads.block(b)[i]), 1e-4) << gen.parameters().name(b);
  }
}

TEST(Gap, BallInvariantForAnyGenerator) {
  PerturbationGenerator<float> gen({1, 1, 8, 8}, {4, false, 9});
  for (auto& v : gen.parameters().block(gen.parameters().find("head.weight"))) v *= 50.0f;
  auto x = random_images<float>({5, 1, 8, 8}, 3);
  for (double eps : {0.01, 0.1, 0.5}) {
    auto adv = gap_perturb(gen, x, eps);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      EXPECT_LE(std::abs(adv.delta[i]), eps + 1e-7);
      EXPECT_GE(adv.perturbed.data[i], 0.0f);
      EXPECT_LE(adv.perturbed.data[i], 1.0f);
    }
  }
}

TEST(Gap, ZeroBudgetIsBitExactIdentity) {
  PerturbationGenerator<float> gen({1, 1, 8, 8}, {4, false, 2});
  auto x = random_images<float>({3, 1, 8, 8}, 5);
  EXPECT_EQ(gap_perturb(gen, x, 0.0).perturbed.data, x.data);
  EXPECT_THROW(gap_perturb(gen, x, -0.1), ContractError);
}

TEST(Gap, ShapeMismatch) {
  PerturbationGenerator<double> gen({1, 1, 8, 8}, {});
  EXPECT_THROW(gap_perturb(gen, random_images<double>({1, 1, 4, 4}, 1), 0.1), ContractError);
}

Dataset<double> random_dataset(std::size_t train, std::size_t val, int k, std::uint64_t seed) {
  Dataset<double> d;
  d.images = random_images<double>({train + val, 1, 8, 8}, seed, 0.2, 0.8);
  d.labels = random_single_labels(train + val, k, seed);
  for (std::size_t i = 0; i < train + val; ++i) d.splits.push_back(i < train ? Split::train : Split::val);
  return d;
}

TEST(Gap, TrainingLowersObjectiveAndLeavesClassifierUntouched) {
  auto model = make_classifier<double>({ZooModel::plain_cnn, 4, 6}, {1, 1, 8, 8}, 3, 4);
  const auto before = model->parameters().hash();
  auto data = random_dataset(48, 16, 3, 2);
  PerturbationGenerator<double> gen({1, 1, 8, 8}, {4, false, 1});
  auto log = train_gap_generator(gen, *model, data, 0.1, {6, 16, 3e-3, 1});
  ASSERT_EQ(log.epochs.size(), 6u);
  EXPECT_EQ(model->parameters().hash(), before);
  for (const auto& e : log.epochs) EXPECT_LE(e.objective, 0.0);
  EXPECT_LT(log.epochs.back().objective, log.epochs.front().objective);

  auto adv = gap_perturb(gen, data.images.gather(std::vector<std::size_t>{0, 1}), 0.1);
  bool differ = false;
  for (std::size_t i = 0; i < 64; ++i) differ |= adv.delta[i] != adv.delta[64 + i];
  EXPECT_TRUE(differ);
}

}  // namespace
}  // namespace advbench
