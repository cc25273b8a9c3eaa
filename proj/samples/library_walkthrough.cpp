// Trains a small CNN on the synthetic digits, attacks it, retrains it with MPAdvT and
// compares flip probability on a small perturbation benchmark. Runs in about a minute.

#include <iostream>

#include "advbench/core/zoo.hpp"
#include "advbench/defenses/training.hpp"
#include "advbench/harness/toy_data.hpp"
#include "advbench/metrics/scores.hpp"
#include "advbench/robustbench/benchmark.hpp"

using namespace advbench;

int main() {
  const auto data = toy::make_dataset(toy::Kind::digits, {2000, 200, 300}, 1);
  const auto test = data.subset(Split::test);
  const Shape shape = data.images.data.shape();

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.learning_rate = 0.05;
  cfg.cosine_schedule = true;
  cfg.seed = 2;
  auto natural = make_classifier<float>({ZooModel::plain_cnn}, shape, 10, 3);
  train_classifier(*natural, data, cfg, DefenseKind::natural);

  const auto budget = AttackBudget::pgd(0.03, 5);
  auto report = [&](const char* name, const Classifier<float>& m) {
    const auto adv = pgd_attack(m, test.images, test.labels, budget);
    std::cout << name << ": clean " << accuracy(predict_labels(m, test.images.data), test.labels) << ", PGD(0.03, 5) "
              << accuracy(adv.adv_pred, test.labels) << ", fooling rate " << adv.success_rate() << '\n';
  };
  report("natural", *natural);

  TrainConfig mp = TrainConfig::mpadvt_defaults();
  mp.epochs = 8;
  mp.learning_rate = 0.02;
  mp.cosine_schedule = true;
  mp.seed = 2;
  auto defended = make_classifier<float>({ZooModel::plain_cnn}, shape, 10, 3);
  train_classifier(*defended, data, mp, DefenseKind::mpadvt);
  report("mpadvt", *defended);

  const std::vector<PerturbationType> types(PerturbationType::all().begin(), PerturbationType::all().end());
  const auto bench = generate_benchmark(test, types, kDefaultFrames, 4);
  const double fp_nat = flip_report(predict_benchmark(*natural, bench), bench.manifest).fp;
  const double fp_mp = flip_report(predict_benchmark(*defended, bench), bench.manifest).fp;
  std::cout << "flip probability: natural " << fp_nat << ", mpadvt " << fp_mp << " (relative "
            << relative_flip_probability(fp_mp, fp_nat) << ")\n";
}
