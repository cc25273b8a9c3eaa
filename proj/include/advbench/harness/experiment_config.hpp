#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "advbench/attacks/gap.hpp"
#include "advbench/core/zoo.hpp"
#include "advbench/defenses/config_io.hpp"
#include "advbench/harness/checkpoint.hpp"
#include "advbench/harness/dataset_io.hpp"
#include "advbench/harness/toy_data.hpp"
#include "advbench/robustbench/benchmark.hpp"

// Experiment config, schema version 1. Only "seed" is mandatory.
//
// {
//   "version": 1,
//   "seed": 7,
//   "output": "runs/demo",
//   "dataset": {"toy": "toy-digits", "train": 1000, "val": 200, "test": 200, "seed": 0}
//            | {"path": "data/my-set"},
//   "model":   {"zoo": "plain-cnn", "conv1": 8, "conv2": 16},
//   "phases":  ["train", "attack", "defend", "bench", "eval", "report"],
//   "train":   { training keys, see config_io.hpp; "seed" is taken from the top level },
//   "attack":  {"images": 200, "methods": [
//                {"name": "pgd", "epsilon": 0.03, "steps": 10, "alpha": 0.0075, "random_init": true,
//                 "mode": "non-target" | "targeted", "label": "pgd-strong"},
//                {"name": "fgsm", "epsilon": 0.03},
//                {"name": "noise", "epsilon": 0.03},
//                {"name": "gap", "epsilon": 0.1, "epochs": 10, "batch_size": 32,
//                 "learning_rate": 0.001, "channels": 8}]},
//   "defend":  {"methods": [{"method": "mpadvt", "label": "...", training keys override "train"}]},
//   "bench":   {"images": 20, "frames": 21, "types": ["all"] | ["Gaussian noise", "rotate", ...],
//               "fp_mode": "adjacent" | "vs-clean"},
//   "eval":    {"images": 200, "saliency": 4, "tap": "features", "cooccurrence_threshold": 0, "robust": bool,
//               "budget": {"epsilon": 0.03, "steps": 5, "alpha": 0.0075}}
// }
//
// Targeted attacks aim every image at class (y + 1) mod k. MPAdvT methods that leave
// "epsilon" / "inner_steps" unset sample from [0.01, 0.04] and [1, 5].

namespace advbench::harness {

enum class Phase { train, attack, defend, bench, eval, report };

inline constexpr std::array<Phase, 6> kPhaseOrder{Phase::train, Phase::attack, Phase::defend,
                                                  Phase::bench, Phase::eval,   Phase::report};

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::train: return "train";
    case Phase::attack: return "attack";
    case Phase::defend: return "defend";
    case Phase::bench: return "bench";
    case Phase::eval: return "eval";
    case Phase::report: return "report";
  }
  return "?";
}

inline Phase parse_phase(std::string_view s) {
  for (Phase p : kPhaseOrder)
    if (to_string(p) == s) return p;
  throw ValidationError("unknown phase '" + std::string(s) + "'");
}

struct DatasetSpec {
  std::optional<toy::Kind> toy = toy::Kind::digits;
  toy::Sizes sizes;
  std::uint64_t seed = 0;
  std::string path;
};

enum class AttackKind { pgd, fgsm, noise, gap };

struct AttackSpec {
  AttackKind kind = AttackKind::pgd;
  std::string label;
  AttackBudget budget;
  GapTrainConfig gap;
  std::size_t gap_channels = 8;
};

struct DefenseSpec {
  DefenseKind kind = DefenseKind::mpadvt;
  std::string label;
  TrainConfig config;
};

struct BenchSpec {
  std::size_t images = 20;
  std::size_t frames = kDefaultFrames;
  std::vector<PerturbationType> types;
  std::optional<FlipMode> mode;
};

struct EvalSpec {
  std::size_t images = 200;
  std::size_t saliency = 4;
  std::string tap = "features";
  std::uint64_t cooccurrence_threshold = 0;
  AttackBudget budget = AttackBudget::pgd(0.03, 5);
  // live PGD under `budget` per model; defaults on when attack or defend phases are listed
  bool robust = false;
};

struct ExperimentConfig {
  int version = 1;
  std::uint64_t seed = 0;
  std::string output = "advbench-run";
  DatasetSpec dataset;
  ZooSpec model;
  std::vector<Phase> phases{Phase::train, Phase::eval};
  TrainConfig train;
  std::size_t attack_images = 200;
  std::vector<AttackSpec> attacks;
  std::vector<DefenseSpec> defenses;
  BenchSpec bench;
  EvalSpec eval;

  bool has_phase(Phase p) const { return std::find(phases.begin(), phases.end(), p) != phases.end(); }
};

namespace detail {

inline const std::set<std::string> kTrainKeys{"epochs",        "inner_steps", "epsilon",         "inner_step_size",
                                              "learning_rate", "momentum",    "cosine_schedule", "batch_size",
                                              "lambda",        "branch_threshold", "random_init", "eval",
                                              "eval_limit"};

/// Records every key of `j` outside `allowed`, prefixed with its path.
inline void unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where,
                         std::vector<std::string>& bad) {
  if (!j.is_object()) return;
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) bad.push_back(where + key);
}

inline void check_schema(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  std::vector<std::string> bad;
  unknown_keys(j, {"version", "seed", "output", "dataset", "model", "phases", "train", "attack", "defend", "bench", "eval"},
               "", bad);
  if (j.contains("dataset")) unknown_keys(j["dataset"], {"toy", "train", "val", "test", "seed", "path"}, "dataset.", bad);
  if (j.contains("model")) unknown_keys(j["model"], {"zoo", "conv1", "conv2"}, "model.", bad);
  if (j.contains("train")) unknown_keys(j["train"], kTrainKeys, "train.", bad);
  if (j.contains("attack")) {
    unknown_keys(j["attack"], {"images", "methods"}, "attack.", bad);
    if (j["attack"].contains("methods") && j["attack"]["methods"].is_array()) {
      std::size_t i = 0;
      for (const auto& m : j["attack"]["methods"])
        unknown_keys(m,
                     {"name", "label", "epsilon", "steps", "alpha", "random_init", "mode", "epochs", "batch_size",
                      "learning_rate", "channels"},
                     "attack.methods[" + std::to_string(i++) + "].", bad);
    }
  }
  if (j.contains("defend")) {
    unknown_keys(j["defend"], {"methods"}, "defend.", bad);
    if (j["defend"].contains("methods") && j["defend"]["methods"].is_array()) {
      auto allowed = kTrainKeys;
      allowed.insert({"method", "label"});
      std::size_t i = 0;
      for (const auto& m : j["defend"]["methods"])
        unknown_keys(m, allowed, "defend.methods[" + std::to_string(i++) + "].", bad);
    }
  }
  if (j.contains("bench")) unknown_keys(j["bench"], {"images", "frames", "types", "fp_mode"}, "bench.", bad);
  if (j.contains("eval"))
    unknown_keys(j["eval"], {"images", "saliency", "tap", "cooccurrence_threshold", "budget", "robust"}, "eval.", bad);
  if (j.contains("eval") && j["eval"].contains("budget"))
    unknown_keys(j["eval"]["budget"], {"epsilon", "steps", "alpha"}, "eval.budget.", bad);
  if (!j.contains("seed")) bad.push_back("seed (missing)");
  if (!bad.empty()) {
    std::string msg = "experiment config: offending keys:";
    for (const auto& b : bad) msg += " " + b;
    throw ValidationError(msg);
  }
}

inline std::string default_attack_label(const AttackSpec& a) {
  static const char* names[] = {"pgd", "fgsm", "noise", "gap"};
  std::ostringstream os;
  os << names[static_cast<int>(a.kind)] << "-eps" << a.budget.epsilon;
  if (a.kind == AttackKind::pgd) os << "-t" << a.budget.steps;
  if (a.budget.mode == AttackMode::targeted) os << "-targeted";
  return os.str();
}

inline void check_label(const std::string& label, const std::string& where) {
  if (label.empty() || label.find_first_of("/\\,") != std::string::npos || label == "." || label == ".." ||
      label == "natural")
    throw ValidationError("experiment config: " + where + " label '" + label + "' is not usable as a name");
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  detail::check_schema(j);
  ExperimentConfig c;
  try {
    c.version = j.value("version", 1);
    if (c.version != 1) throw ValidationError("experiment config: unsupported version " + std::to_string(c.version));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output = j.value("output", c.output);

    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      if (d.contains("path") == d.contains("toy"))
        throw ValidationError("experiment config: dataset needs exactly one of 'toy' or 'path'");
      if (d.contains("path")) {
        c.dataset.toy.reset();
        c.dataset.path = d["path"].get<std::string>();
        for (const char* k : {"train", "val", "test", "seed"})
          if (d.contains(k)) throw ValidationError(std::string("experiment config: dataset.") + k + " only applies to toy datasets");
      } else {
        c.dataset.toy = toy::parse_kind(d["toy"].get<std::string>());
        c.dataset.sizes.train = d.value("train", c.dataset.sizes.train);
        c.dataset.sizes.val = d.value("val", c.dataset.sizes.val);
        c.dataset.sizes.test = d.value("test", c.dataset.sizes.test);
        c.dataset.seed = d.value("seed", c.dataset.seed);
      }
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.model.model = parse_zoo_model(m.value("zoo", std::string(to_string(c.model.model))));
      c.model.conv1_channels = m.value("conv1", c.model.conv1_channels);
      c.model.conv2_channels = m.value("conv2", c.model.conv2_channels);
    }
    if (j.contains("phases")) {
      c.phases.clear();
      for (const auto& p : j["phases"]) c.phases.push_back(parse_phase(p.get<std::string>()));
    }
    if (j.contains("train")) c.train = train_config_from_json(j["train"]);
    c.train.seed = c.seed;

    if (j.contains("attack")) {
      const auto& a = j["attack"];
      c.attack_images = a.value("images", c.attack_images);
      for (const auto& m : a.value("methods", nlohmann::json::array())) {
        AttackSpec s;
        const auto name = m.at("name").get<std::string>();
        if (name == "pgd") s.kind = AttackKind::pgd;
        else if (name == "fgsm") s.kind = AttackKind::fgsm;
        else if (name == "noise") s.kind = AttackKind::noise;
        else if (name == "gap") s.kind = AttackKind::gap;
        else throw ValidationError("experiment config: unknown attack '" + name + "'");
        const double eps = m.at("epsilon").get<double>();
        if (s.kind == AttackKind::fgsm) {
          s.budget = AttackBudget::fgsm(eps);
        } else {
          s.budget = AttackBudget::pgd(eps, m.value("steps", s.kind == AttackKind::pgd ? 10 : 0));
          if (m.contains("alpha")) s.budget.alpha = m["alpha"].get<double>();
          s.budget.random_init = m.value("random_init", s.kind == AttackKind::pgd);
        }
        s.budget.mode = parse_attack_mode(m.value("mode", std::string("non-target")));
        if (s.budget.mode == AttackMode::targeted && s.kind != AttackKind::pgd && s.kind != AttackKind::fgsm)
          throw ValidationError("experiment config: only pgd and fgsm support targeted mode");
        s.gap.epochs = m.value("epochs", s.gap.epochs);
        s.gap.batch_size = m.value("batch_size", s.gap.batch_size);
        s.gap.learning_rate = m.value("learning_rate", s.gap.learning_rate);
        s.gap_channels = m.value("channels", s.gap_channels);
        s.budget.validate();
        if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("experiment config: attack epsilon outside [0,1]");
        if (s.kind == AttackKind::gap && !(eps > 0.0)) throw ValidationError("experiment config: gap needs epsilon > 0");
        s.label = m.value("label", detail::default_attack_label(s));
        detail::check_label(s.label, "attack");
        c.attacks.push_back(std::move(s));
      }
    }
    if (j.contains("defend")) {
      for (const auto& m : j["defend"].value("methods", nlohmann::json::array())) {
        DefenseSpec s;
        s.kind = parse_defense_kind(m.at("method").get<std::string>());
        nlohmann::json merged = j.value("train", nlohmann::json::object());
        if (s.kind == DefenseKind::mpadvt) {
          const auto d = TrainConfig::mpadvt_defaults();
          if (!m.contains("epsilon")) merged["epsilon"] = nlohmann::json::array({d.epsilon.lo, d.epsilon.hi});
          if (!m.contains("inner_steps")) merged["inner_steps"] = nlohmann::json::array({d.inner_steps.lo, d.inner_steps.hi});
        }
        for (const auto& [key, value] : m.items())
          if (key != "method" && key != "label") merged[key] = value;
        s.config = train_config_from_json(merged);
        s.config.seed = c.seed;
        s.label = m.value("label", std::string(to_string(s.kind)));
        detail::check_label(s.label, "defense");
        c.defenses.push_back(std::move(s));
      }
    }
    if (j.contains("bench")) {
      const auto& b = j["bench"];
      c.bench.images = b.value("images", c.bench.images);
      c.bench.frames = b.value("frames", c.bench.frames);
      if (b.contains("fp_mode")) c.bench.mode = parse_flip_mode(b["fp_mode"].get<std::string>());
      if (b.contains("types")) {
        for (const auto& t : b["types"]) {
          const auto name = t.get<std::string>();
          if (name == "all") {
            c.bench.types.assign(PerturbationType::all().begin(), PerturbationType::all().end());
            continue;
          }
          try {
            c.bench.types.push_back(PerturbationType::parse(name));
          } catch (const ContractError& e) {
            throw ValidationError(std::string("experiment config: ") + e.what());
          }
        }
      }
    }
    if (c.bench.types.empty()) c.bench.types.assign(PerturbationType::all().begin(), PerturbationType::all().end());
    c.eval.robust = c.has_phase(Phase::attack) || c.has_phase(Phase::defend);
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      c.eval.images = e.value("images", c.eval.images);
      c.eval.saliency = e.value("saliency", c.eval.saliency);
      c.eval.tap = e.value("tap", c.eval.tap);
      c.eval.cooccurrence_threshold = e.value("cooccurrence_threshold", c.eval.cooccurrence_threshold);
      if (e.contains("robust")) c.eval.robust = e["robust"].get<bool>();
      if (e.contains("budget")) {
        const auto& b = e["budget"];
        c.eval.budget = AttackBudget::pgd(b.value("epsilon", c.eval.budget.epsilon), b.value("steps", c.eval.budget.steps));
        if (b.contains("alpha")) c.eval.budget.alpha = b["alpha"].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }

  // phases: each at most once, in canonical order
  std::size_t last = 0;
  std::set<Phase> seen;
  for (Phase p : c.phases) {
    if (!seen.insert(p).second) throw ValidationError("experiment config: phase '" + std::string(to_string(p)) + "' repeated");
    const auto pos = static_cast<std::size_t>(std::find(kPhaseOrder.begin(), kPhaseOrder.end(), p) - kPhaseOrder.begin());
    if (pos < last) throw ValidationError("experiment config: phases must follow the order train, attack, defend, bench, eval, report");
    last = pos;
  }
  if (c.phases.empty()) throw ValidationError("experiment config: no phases");
  if (c.has_phase(Phase::attack) && c.attacks.empty()) throw ValidationError("experiment config: attack phase without attack.methods");
  if (c.has_phase(Phase::defend) && c.defenses.empty()) throw ValidationError("experiment config: defend phase without defend.methods");
  if (c.bench.frames < 2) throw ValidationError("experiment config: bench.frames must be >= 2");
  if (c.eval.budget.epsilon < 0.0 || c.eval.budget.steps < 0) throw ValidationError("experiment config: eval.budget invalid");
  std::set<std::string> labels;
  for (const auto& a : c.attacks)
    if (!labels.insert(a.label).second) throw ValidationError("experiment config: duplicate attack label '" + a.label + "'");
  labels.clear();
  for (const auto& d : c.defenses)
    if (!labels.insert(d.label).second) throw ValidationError("experiment config: duplicate defense label '" + d.label + "'");
  return c;
}

/// Normalized form with every default spelled out. Keys are sorted by the JSON library,
/// so permuted input keys give the same text.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["output"] = c.output;
  if (c.dataset.toy) {
    j["dataset"] = {{"toy", std::string(toy::to_string(*c.dataset.toy))},
                    {"train", c.dataset.sizes.train},
                    {"val", c.dataset.sizes.val},
                    {"test", c.dataset.sizes.test},
                    {"seed", c.dataset.seed}};
  } else {
    j["dataset"] = {{"path", c.dataset.path}};
  }
  j["model"] = {{"zoo", std::string(to_string(c.model.model))},
                {"conv1", c.model.conv1_channels},
                {"conv2", c.model.conv2_channels}};
  auto& phases = j["phases"] = nlohmann::json::array();
  for (Phase p : c.phases) phases.push_back(std::string(to_string(p)));
  auto train = to_json(c.train);
  train.erase("seed");
  j["train"] = train;
  auto& methods = j["attack"]["methods"] = nlohmann::json::array();
  j["attack"]["images"] = c.attack_images;
  static const char* names[] = {"pgd", "fgsm", "noise", "gap"};
  for (const auto& a : c.attacks) {
    nlohmann::json m = {{"name", names[static_cast<int>(a.kind)]},
                        {"label", a.label},
                        {"epsilon", a.budget.epsilon},
                        {"steps", a.budget.steps},
                        {"alpha", a.budget.step_size()},
                        {"random_init", a.budget.random_init},
                        {"mode", std::string(to_string(a.budget.mode))}};
    if (a.kind == AttackKind::gap) {
      m["epochs"] = a.gap.epochs;
      m["batch_size"] = a.gap.batch_size;
      m["learning_rate"] = a.gap.learning_rate;
      m["channels"] = a.gap_channels;
    }
    methods.push_back(m);
  }
  auto& defenses = j["defend"]["methods"] = nlohmann::json::array();
  for (const auto& d : c.defenses) {
    auto m = to_json(d.config);
    m.erase("seed");
    m["method"] = std::string(to_string(d.kind));
    m["label"] = d.label;
    defenses.push_back(m);
  }
  auto& types = j["bench"]["types"] = nlohmann::json::array();
  for (const auto& t : c.bench.types) types.push_back(std::string(t.name()));
  j["bench"]["images"] = c.bench.images;
  j["bench"]["frames"] = c.bench.frames;
  if (c.bench.mode) j["bench"]["fp_mode"] = std::string(to_string(*c.bench.mode));
  j["eval"] = {{"images", c.eval.images},
               {"saliency", c.eval.saliency},
               {"tap", c.eval.tap},
               {"cooccurrence_threshold", c.eval.cooccurrence_threshold},
               {"robust", c.eval.robust},
               {"budget",
                {{"epsilon", c.eval.budget.epsilon},
                 {"steps", c.eval.budget.steps},
                 {"alpha", c.eval.budget.step_size()}}}};
  return j;
}

/// FNV-1a of the normalized config without "seed" and "output": runs that differ only in
/// seed or output location share a config hash.
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("seed");
  j.erase("output");
  const std::string text = j.dump();
  return hex64(fnv1a(text.data(), text.size()));
}

/// Parses a config file without interpreting it.
inline nlohmann::json read_experiment_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(read_experiment_json(path));
}

/// Materializes the configured dataset: a toy set or a dataset directory.
inline Dataset<float> resolve_dataset(const DatasetSpec& spec) {
  if (spec.toy) return toy::make_dataset(*spec.toy, spec.sizes, spec.seed);
  return read_dataset<float>(spec.path);
}

}  // namespace advbench::harness
