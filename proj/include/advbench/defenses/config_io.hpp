#pragma once

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "advbench/defenses/train_config.hpp"

// TrainConfig <-> JSON and TrainLog -> JSONL.
//
// Keys (all optional, defaults from TrainConfig):
//   epochs            int >= 1
//   inner_steps       int, or [lo, hi] for a sampled range
//   epsilon           number, or [lo, hi]
//   inner_step_size   number (default epsilon / 4)
//   learning_rate, momentum, cosine_schedule, batch_size, lambda,
//   branch_threshold, random_init, seed
//   eval              {"epsilon": number, "steps": int, "alpha": number}
//   eval_limit        int (0 disables per-epoch evaluation)

namespace advbench {

namespace detail {

template <class V>
Interval<V> interval_from_json(const nlohmann::json& j, const std::string& key) {
  if (j.is_array()) {
    if (j.size() != 2) throw ValidationError("train config: '" + key + "' range needs exactly two values");
    return {j[0].get<V>(), j[1].get<V>()};
  }
  const V v = j.get<V>();
  return {v, v};
}

template <class V>
nlohmann::json interval_to_json(const Interval<V>& r) {
  if (r.is_fixed()) return r.lo;
  return nlohmann::json::array({r.lo, r.hi});
}

}  // namespace detail

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  static const std::set<std::string> known{"epochs",      "inner_steps",     "epsilon",        "inner_step_size",
                                           "learning_rate", "momentum",      "cosine_schedule", "batch_size",
                                           "lambda",      "branch_threshold", "random_init",    "seed",
                                           "eval",        "eval_limit"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ValidationError("train config: unknown key '" + key + "'");
  TrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("inner_steps")) c.inner_steps = detail::interval_from_json<int>(j["inner_steps"], "inner_steps");
    if (j.contains("epsilon")) c.epsilon = detail::interval_from_json<double>(j["epsilon"], "epsilon");
    if (j.contains("inner_step_size")) c.inner_step_size = j["inner_step_size"].get<double>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("momentum")) c.momentum = j["momentum"].get<double>();
    if (j.contains("cosine_schedule")) c.cosine_schedule = j["cosine_schedule"].get<bool>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
    if (j.contains("branch_threshold")) c.branch_threshold = j["branch_threshold"].get<double>();
    if (j.contains("random_init")) c.random_init = j["random_init"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("eval_limit")) c.eval_limit = j["eval_limit"].get<std::size_t>();
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      if (!e.is_object()) throw ValidationError("train config: 'eval' must be an object");
      c.eval_budget = AttackBudget::pgd(e.value("epsilon", c.eval_budget.epsilon), e.value("steps", c.eval_budget.steps));
      if (e.contains("alpha")) c.eval_budget.alpha = e["alpha"].get<double>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("train config: ") + ex.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"epochs", c.epochs},
                   {"inner_steps", detail::interval_to_json(c.inner_steps)},
                   {"epsilon", detail::interval_to_json(c.epsilon)},
                   {"learning_rate", c.learning_rate},
                   {"momentum", c.momentum},
                   {"cosine_schedule", c.cosine_schedule},
                   {"batch_size", c.batch_size},
                   {"lambda", c.lambda},
                   {"branch_threshold", c.branch_threshold},
                   {"random_init", c.random_init},
                   {"seed", c.seed},
                   {"eval", {{"epsilon", c.eval_budget.epsilon}, {"steps", c.eval_budget.steps}}},
                   {"eval_limit", c.eval_limit}};
  if (c.inner_step_size) j["inner_step_size"] = *c.inner_step_size;
  if (c.eval_budget.alpha) j["eval"]["alpha"] = *c.eval_budget.alpha;
  return j;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read train config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("train config '" + path + "' is not valid JSON: " + e.what());
  }
  return train_config_from_json(j);
}

inline nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"record", "epoch"},
                   {"epoch", r.epoch},
                   {"loss", r.loss},
                   {"ce_term", r.ce_term},
                   {"regularizer_term", r.regularizer_term}};
  j["clean_accuracy"] = r.clean_accuracy ? nlohmann::json(*r.clean_accuracy) : nlohmann::json(nullptr);
  j["robust_accuracy"] = r.robust_accuracy ? nlohmann::json(*r.robust_accuracy) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const PerturbationDraw& d) {
  return {{"record", "draw"}, {"epoch", d.epoch},     {"batch", d.batch},        {"p", d.p},
          {"epsilon", d.epsilon}, {"steps", d.steps}, {"perturbed", d.perturbed}};
}

/// One JSON object per line: a header, then epoch records, then the per-minibatch draws.
inline void write_train_log(std::ostream& out, const TrainLog& log) {
  out << nlohmann::json{{"record", "header"}, {"method", std::string(to_string(log.method))}}.dump() << '\n';
  for (const auto& r : log.epochs) out << to_json(r).dump() << '\n';
  for (const auto& d : log.draws) out << to_json(d).dump() << '\n';
}

}  // namespace advbench
