#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "advbench/defenses/training.hpp"
#include "advbench/harness/dataset_io.hpp"
#include "advbench/harness/experiment_config.hpp"
#include "advbench/harness/report.hpp"
#include "advbench/metrics/introspection.hpp"
#include "advbench/metrics/report.hpp"

// Run tree under the output directory. Each phase stages into `<phase>.partial` and is
// renamed on success; a failed phase is kept as `<phase>.failed`. An existing phase
// directory is never touched again.
//
//   config.json              normalized config, its hash and the seed
//   run.json                 RunRecord
//   train/                   model.ckpt, train_log.jsonl, metrics.json
//   attack/<label>/          adversarial/ (dataset dir, .npy images, budget.json), summary.json
//   defend/<label>/          model.ckpt, train_log.jsonl, metrics.json
//   bench/                   benchmark/, predictions/<model>.csv, flip.json
//   eval/                    report.jsonl, <model>/{report.json, saliency/, attention/,
//                            feature_maps/, embeddings.csv, cooccurrence_*.csv}
//   report/                  see emit_report

namespace advbench::harness {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct PhaseRecord {
  std::string name;
  std::string status;
  double seconds = 0.0;
  std::vector<std::string> artifacts;
  std::string error;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kToolkitVersion;
  std::vector<PhaseRecord> phases;
  std::map<std::string, double> summary;
};

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : r.phases) {
    nlohmann::json j = {{"name", p.name}, {"status", p.status}, {"seconds", p.seconds}, {"artifacts", p.artifacts}};
    if (!p.error.empty()) j["error"] = p.error;
    phases.push_back(j);
  }
  return {{"config_hash", r.config_hash}, {"seed", r.seed},     {"version", r.version},
          {"phases", phases},             {"summary", r.summary}};
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.version = j.at("version").get<std::string>();
    for (const auto& p : j.at("phases"))
      r.phases.push_back({p.at("name").get<std::string>(), p.at("status").get<std::string>(),
                          p.at("seconds").get<double>(), p.at("artifacts").get<std::vector<std::string>>(),
                          p.value("error", std::string())});
    r.summary = j.at("summary").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("run record: ") + e.what());
  }
  return r;
}

/// Reads run.json and checks its config hash against the hash recomputed from config.json.
inline RunRecord load_run_record(const std::filesystem::path& out) {
  auto r = run_record_from_json(detail::read_json_file(out / "run.json"));
  const auto stored = detail::read_json_file(out / "config.json");
  const auto cfg = experiment_config_from_json(stored.at("config"));
  if (config_hash(cfg) != r.config_hash)
    throw ValidationError("run record in '" + out.string() + "' does not match its config.json");
  return r;
}

class Experiment {
 public:
  /// Progress lines go to `progress` when given.
  explicit Experiment(ExperimentConfig cfg, std::ostream* progress = nullptr)
      : cfg_(std::move(cfg)), out_(cfg_.output), hash_(config_hash(cfg_)), progress_(progress) {}

  const ExperimentConfig& config() const { return cfg_; }
  const std::filesystem::path& output() const { return out_; }
  const std::string& hash() const { return hash_; }

  /// Runs every configured phase in order.
  RunRecord run() {
    RunRecord r;
    for (Phase p : cfg_.phases) r = run_phase(p);
    return r;
  }

  /// Runs one phase, reading earlier phases' artifacts from the output directory.
  RunRecord run_phase(Phase phase) {
    namespace fs = std::filesystem;
    open_run_dir();
    RunRecord record = current_record();
    const std::string name(to_string(phase));
    const fs::path final_dir = out_ / name, staging = out_ / (name + ".partial"), failed = out_ / (name + ".failed");
    if (fs::exists(final_dir))
      throw IoError("phase '" + name + "' already has artifacts in '" + final_dir.string() +
                    "'; use a fresh output directory");
    fs::remove_all(staging);
    fs::create_directories(staging);
    PhaseRecord pr{name, "ok", 0.0, {}, {}};
    const auto start = std::chrono::steady_clock::now();
    say("phase " + name);
    try {
      switch (phase) {
        case Phase::train: train_phase(staging, record); break;
        case Phase::attack: attack_phase(staging, record); break;
        case Phase::defend: defend_phase(staging, record); break;
        case Phase::bench: bench_phase(staging, record); break;
        case Phase::eval: eval_phase(staging, record); break;
        case Phase::report: emit_report(out_, staging); break;
      }
    } catch (const std::exception& e) {
      pr.status = "failed";
      pr.error = e.what();
      pr.seconds = elapsed(start);
      fs::remove_all(failed);
      std::error_code ec;
      fs::rename(staging, failed, ec);
      record.phases.push_back(pr);
      write_record(record);
      throw;
    }
    pr.seconds = elapsed(start);
    fs::rename(staging, final_dir);
    for (const auto& entry : fs::recursive_directory_iterator(final_dir))
      if (entry.is_regular_file()) pr.artifacts.push_back(fs::relative(entry.path(), out_).generic_string());
    std::sort(pr.artifacts.begin(), pr.artifacts.end());
    record.phases.push_back(pr);
    write_record(record);
    return record;
  }

 private:
  ExperimentConfig cfg_;
  std::filesystem::path out_;
  std::string hash_;
  std::ostream* progress_;
  std::optional<Dataset<float>> data_;

  static double elapsed(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  void say(const std::string& line) const {
    if (progress_) *progress_ << line << std::endl;
  }

  const Dataset<float>& data() {
    if (!data_) {
      data_ = resolve_dataset(cfg_.dataset);
      data_->validate();
    }
    return *data_;
  }

  Dataset<float> test_subset(std::size_t limit) {
    auto t = data().subset(Split::test);
    if (t.size() == 0) throw ValidationError("dataset '" + data().name + "' has an empty test split");
    return limit == 0 ? t : t.head(limit);
  }

  void open_run_dir() {
    namespace fs = std::filesystem;
    fs::create_directories(out_);
    const auto cfg_path = out_ / "config.json";
    if (fs::exists(cfg_path)) {
      const auto stored = detail::read_json_file(cfg_path);
      if (stored.value("config_hash", "") != hash_ || stored.value("seed", std::uint64_t{0}) != cfg_.seed)
        throw ValidationError("output directory '" + out_.string() +
                              "' belongs to a different experiment (config hash or seed differs)");
      return;
    }
    detail::write_json_file(cfg_path, {{"config_hash", hash_}, {"seed", cfg_.seed}, {"config", to_json(cfg_)}});
  }

  RunRecord current_record() const {
    if (std::filesystem::exists(out_ / "run.json")) return load_run_record(out_);
    RunRecord r;
    r.config_hash = hash_;
    r.seed = cfg_.seed;
    return r;
  }

  void write_record(const RunRecord& r) const { detail::write_json_file(out_ / "run.json", to_json(r)); }

  std::unique_ptr<Classifier<float>> fresh_model() {
    const auto& d = data();
    auto m = make_classifier<float>(cfg_.model, d.images.data.shape().frame(), d.num_classes(), cfg_.seed);
    if (m->task() != d.task())
      throw ValidationError("model '" + std::string(to_string(cfg_.model.model)) + "' is " +
                            std::string(to_string(m->task())) + " but dataset '" + d.name + "' is " +
                            std::string(to_string(d.task())));
    return m;
  }

  LoadedCheckpoint load_model(const std::filesystem::path& path) const {
    if (!std::filesystem::exists(path))
      throw ValidationError("missing '" + path.string() + "': run the phase that produces it first");
    auto ck = load_checkpoint(path);
    if (ck.info.config_hash != hash_)
      throw ValidationError("checkpoint '" + path.string() + "' was produced by a different config");
    return ck;
  }

  /// Trains and persists one model; returns its clean test accuracy.
  double train_and_save(Classifier<float>& model, const TrainConfig& cfg, DefenseKind kind,
                        const std::filesystem::path& dir) {
    std::vector<EpochRecord> seen;
    auto on_epoch = [&](const EpochRecord& r) {
      seen.push_back(r);
      std::ostringstream os;
      os << "  epoch " << r.epoch << " loss " << r.loss;
      if (r.clean_accuracy) os << " clean " << *r.clean_accuracy;
      if (r.robust_accuracy) os << " robust " << *r.robust_accuracy;
      say(os.str());
    };
    TrainLog log;
    try {
      log = train_classifier(model, data(), cfg, kind, on_epoch);
    } catch (const NumericError& e) {
      std::ofstream out(dir / "train_log.jsonl", std::ios::trunc);
      for (const auto& r : seen) out << to_json(r).dump() << '\n';
      out << nlohmann::json{{"error", e.what()}}.dump() << '\n';
      throw;
    }
    std::ofstream out(dir / "train_log.jsonl", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / "train_log.jsonl").string() + "'");
    write_train_log(out, log);
    const auto info = save_checkpoint(dir / "model.ckpt", model, cfg_.model, hash_);
    const auto test = test_subset(0);
    const double acc = accuracy(predict_labels(model, test.images.data), test.labels);
    detail::write_json_file(dir / "metrics.json", {{"method", std::string(to_string(kind))},
                                                   {"clean_test_accuracy", acc},
                                                   {"test_images", test.size()},
                                                   {"parameter_hash", info.parameter_hash},
                                                   {"seed", info.seed},
                                                   {"config_hash", hash_}});
    return acc;
  }

  void train_phase(const std::filesystem::path& dir, RunRecord& record) {
    auto model = fresh_model();
    const double acc = train_and_save(*model, cfg_.train, DefenseKind::natural, dir);
    record.summary["train.clean_test_accuracy"] = acc;
    say("  clean test accuracy " + std::to_string(acc));
  }

  void attack_phase(const std::filesystem::path& dir, RunRecord& record) {
    const auto ck = load_model(out_ / "train" / "model.ckpt");
    const Classifier<float>& model = *ck.model;
    const auto test = test_subset(cfg_.attack_images);
    for (std::size_t a = 0; a < cfg_.attacks.size(); ++a) {
      const auto& spec = cfg_.attacks[a];
      const auto adir = dir / spec.label;
      std::filesystem::create_directories(adir);
      AttackBudget budget = spec.budget;
      budget.seed = mix_seed(cfg_.seed, 0xA77AC4 + a);
      nlohmann::json extra = nlohmann::json::object();
      AdversarialBatch<float> adv;
      switch (spec.kind) {
        case AttackKind::pgd:
        case AttackKind::fgsm:
          if (budget.mode == AttackMode::targeted) {
            if (test.task() != Task::single_label) throw ValidationError("targeted attacks need single-label data");
            std::vector<int> t;
            for (int y : test.labels.classes) t.push_back((y + 1) % test.num_classes());
            budget.targets = LabelBatch::single(test.num_classes(), std::move(t));
          }
          adv = pgd_attack(model, test.images, test.labels, budget);
          break;
        case AttackKind::noise:
          adv = uniform_noise_perturb(model, test.images, budget.epsilon, budget.seed);
          break;
        case AttackKind::gap: {
          PerturbationGenerator<float> gen(test.images.data.shape().frame(),
                                           {spec.gap_channels, false, mix_seed(budget.seed, 1)});
          GapTrainConfig gcfg = spec.gap;
          gcfg.seed = mix_seed(budget.seed, 2);
          const auto before = checkpoint_hash(model.parameters());
          const auto glog = train_gap_generator(gen, model, data(), budget.epsilon, gcfg);
          std::ofstream gl(adir / "gap_log.jsonl", std::ios::trunc);
          for (const auto& e : glog.epochs)
            gl << nlohmann::json{{"epoch", e.epoch},
                                 {"objective", e.objective},
                                 {"train_fooling_rate", e.train_fooling_rate},
                                 {"val_fooling_rate", e.val_fooling_rate}}
                      .dump()
               << '\n';
          adv = gap_attack(gen, model, test.images, budget.epsilon);
          const auto noise = uniform_noise_perturb(model, test.images, budget.epsilon, mix_seed(budget.seed, 3));
          extra["noise_fooling_ratio"] = fooling_ratio(noise.clean_pred, noise.adv_pred);
          extra["classifier_hash_before"] = before;
          extra["classifier_hash_after"] = checkpoint_hash(model.parameters());
          break;
        }
      }
      Dataset<float> adv_set{test.name + "-" + spec.label, adv.perturbed, test.labels, test.splits};
      write_dataset(adv_set, adir / "adversarial", ImageFormat::npy, to_json(budget));
      double max_delta = 0.0;
      for (float v : adv.delta.values()) max_delta = std::max(max_delta, static_cast<double>(std::abs(v)));
      const double fr = fooling_ratio(adv.clean_pred, adv.adv_pred);
      const double acc = accuracy(adv.adv_pred, test.labels);
      nlohmann::json summary = {{"label", spec.label},
                                {"budget", to_json(budget)},
                                {"images", test.size()},
                                {"clean_accuracy", accuracy(adv.clean_pred, test.labels)},
                                {"adversarial_accuracy", acc},
                                {"fooling_ratio", fr},
                                {"success_rate", adv.success_rate()},
                                {"max_abs_delta", max_delta}};
      summary.update(extra);
      detail::write_json_file(adir / "summary.json", summary);
      record.summary["attack." + spec.label + ".fooling_ratio"] = fr;
      record.summary["attack." + spec.label + ".accuracy"] = acc;
      say("  " + spec.label + ": accuracy " + std::to_string(acc) + ", FR " + std::to_string(fr));
    }
  }

  void defend_phase(const std::filesystem::path& dir, RunRecord& record) {
    const auto eval_set = test_subset(cfg_.eval.images);
    for (const auto& d : cfg_.defenses) {
      say("  defense " + d.label);
      const auto ddir = dir / d.label;
      std::filesystem::create_directories(ddir);
      auto model = fresh_model();
      const double acc = train_and_save(*model, d.config, d.kind, ddir);
      const auto adv = pgd_attack(*model, eval_set.images, eval_set.labels, cfg_.eval.budget);
      const double robust = accuracy(adv.adv_pred, eval_set.labels);
      auto metrics = detail::read_json_file(ddir / "metrics.json");
      metrics["robust_accuracy"] = robust;
      metrics["robust_budget"] = to_json(cfg_.eval.budget);
      metrics["robust_images"] = eval_set.size();
      detail::write_json_file(ddir / "metrics.json", metrics);
      record.summary["defend." + d.label + ".clean_test_accuracy"] = acc;
      record.summary["defend." + d.label + ".robust_accuracy"] = robust;
    }
  }

  /// Natural model first, then each defended model whose checkpoint exists.
  std::vector<std::pair<std::string, std::filesystem::path>> available_models() const {
    std::vector<std::pair<std::string, std::filesystem::path>> out;
    if (std::filesystem::exists(out_ / "train" / "model.ckpt")) out.emplace_back("natural", out_ / "train" / "model.ckpt");
    for (const auto& d : cfg_.defenses)
      if (std::filesystem::exists(out_ / "defend" / d.label / "model.ckpt"))
        out.emplace_back(d.label, out_ / "defend" / d.label / "model.ckpt");
    return out;
  }

  void bench_phase(const std::filesystem::path& dir, RunRecord& record) {
    auto subset = test_subset(cfg_.bench.images);
    const auto manifest = build_benchmark(subset, cfg_.bench.types, cfg_.bench.frames, cfg_.seed, dir / "benchmark");
    say("  " + std::to_string(manifest.r()) + " sequences");
    const auto models = available_models();
    if (models.empty()) {
      say("  no trained models yet; benchmark built without predictions");
      return;
    }
    const auto bench = load_benchmark<float>(dir / "benchmark");
    std::filesystem::create_directories(dir / "predictions");
    nlohmann::json flips = nlohmann::json::object();
    std::optional<double> reference;
    for (const auto& [name, path] : models) {
      const auto ck = load_model(path);
      const auto table = predict_benchmark(*ck.model, bench);
      write_predictions_csv(dir / "predictions" / (name + ".csv"), table);
      const auto rep = flip_report(table, manifest, cfg_.bench.mode);
      nlohmann::json j = {{"fp", rep.fp}, {"per_type", rep.per_type}, {"per_category", rep.per_category},
                          {"modes", rep.modes}};
      if (name == "natural") reference = rep.fp;
      if (reference && *reference > 0.0) j["rfp"] = relative_flip_probability(rep.fp, *reference);
      flips[name] = j;
      record.summary["bench." + name + ".fp"] = rep.fp;
      if (j.contains("rfp")) record.summary["bench." + name + ".rfp"] = j["rfp"].get<double>();
      say("  " + name + ": FP " + std::to_string(rep.fp));
    }
    detail::write_json_file(dir / "flip.json", {{"reference", "natural"}, {"models", flips}});
  }

  void eval_phase(const std::filesystem::path& dir, RunRecord& record) {
    namespace fs = std::filesystem;
    const auto models = available_models();
    if (models.empty()) throw ValidationError("eval phase needs a trained model: run the train or defend phase first");
    const auto test = test_subset(cfg_.eval.images);
    std::map<std::string, std::size_t> index;
    const auto full_test = test_subset(0);
    for (std::size_t i = 0; i < full_test.size(); ++i) index[full_test.images.ids[i]] = i;

    std::optional<nlohmann::json> flips;
    if (fs::exists(out_ / "bench" / "flip.json")) flips = detail::read_json_file(out_ / "bench" / "flip.json");

    std::ofstream jsonl(dir / "report.jsonl", std::ios::trunc);
    if (!jsonl) throw IoError("cannot write '" + (dir / "report.jsonl").string() + "'");
    for (const auto& [name, path] : models) {
      const auto ck = load_model(path);
      const Classifier<float>& model = *ck.model;
      const auto mdir = dir / name;
      fs::create_directories(mdir);
      auto rep = evaluate_clean(model, test.images, test.labels);
      rep.config = {{"model", name},
                    {"zoo", std::string(to_string(ck.info.spec.model))},
                    {"parameter_hash", ck.info.parameter_hash},
                    {"seed", ck.info.seed},
                    {"config_hash", hash_}};
      if (name != "natural")
        for (const auto& d : cfg_.defenses)
          if (d.label == name) {
            auto tc = defenses_json(d);
            rep.config["defense"] = tc;
          }

      // attack artifacts were crafted against the natural model; other models see them as transfer attacks
      for (const auto& spec : cfg_.attacks) {
        const auto adir = out_ / "attack" / spec.label / "adversarial";
        if (!fs::exists(adir)) continue;
        const auto adv_set = read_dataset<float>(adir);
        std::vector<std::size_t> idx;
        for (const auto& id : adv_set.images.ids) {
          const auto it = index.find(id);
          if (it == index.end()) throw ValidationError("adversarial image '" + id + "' has no clean original");
          idx.push_back(it->second);
        }
        const auto originals = full_test.gather(idx);
        const auto budget_json = detail::read_json_file(adir / "budget.json");
        AttackBudget b = AttackBudget::pgd(budget_json.value("epsilon", 0.0), budget_json.value("steps", 0),
                                           budget_json.value("alpha", 0.0));
        b.random_init = budget_json.value("random_init", false);
        b.mode = parse_attack_mode(budget_json.value("mode", std::string("non-target")));
        // success is scored as a changed prediction for every attack here
        b.mode = AttackMode::non_target;
        auto adv = make_adversarial(originals.images, adv_set.images, b);
        annotate(adv, model);
        add_attack(rep, model, adv, originals.labels, name == "natural" ? spec.label : spec.label + " (transfer)");
      }
      std::optional<AdversarialBatch<float>> live;
      if (cfg_.eval.robust) {
        AttackBudget eval_budget = cfg_.eval.budget;
        eval_budget.seed = mix_seed(cfg_.seed, 0xE7A1);
        live = pgd_attack(model, test.images, test.labels, eval_budget);
        add_attack(rep, model, *live, test.labels, "pgd-eval");
      }

      if (flips && flips->contains("models") && (*flips)["models"].contains(name)) {
        const auto& f = (*flips)["models"][name];
        FlipReport fr;
        fr.fp = f["fp"].get<double>();
        fr.per_type = f["per_type"].get<std::map<std::string, double>>();
        fr.per_category = f["per_category"].get<std::map<std::string, double>>();
        fr.modes = f["modes"].get<std::map<std::string, std::string>>();
        rep.flips = fr;
        if (f.contains("rfp")) rep.rfp = f["rfp"].get<double>();
      }
      rep.validate();
      const auto j = to_json(rep);
      jsonl << j.dump() << '\n';
      detail::write_json_file(mdir / "report.json", j);
      record.summary["eval." + name + ".accuracy"] = rep.accuracy;
      if (rep.auc) record.summary["eval." + name + ".auc"] = *rep.auc;
      std::string line = "  " + name + ": accuracy " + std::to_string(rep.accuracy);
      if (live) {
        record.summary["eval." + name + ".robust_accuracy"] = rep.attacks.back().accuracy;
        line += ", robust " + std::to_string(rep.attacks.back().accuracy);
      }
      say(line);

      introspect(model, test, live ? &*live : nullptr, mdir);
    }
  }

  static nlohmann::json defenses_json(const DefenseSpec& d) {
    auto j = to_json(d.config);
    j["method"] = std::string(to_string(d.kind));
    return j;
  }

  /// Saliency, attention and feature maps for the first few images, embeddings for all
  /// evaluated images, co-occurrence for multi-label models.
  /// `adv` is null when no robust evaluation ran; only clean variants are written then.
  void introspect(const Classifier<float>& model, const Dataset<float>& test, const AdversarialBatch<float>* adv,
                  const std::filesystem::path& mdir) {
    namespace fs = std::filesystem;
    std::vector<Variant> variants{Variant::clean};
    if (adv) variants.push_back(Variant::adversarial);
    const std::size_t n = std::min(cfg_.eval.saliency, test.size());
    const Shape frame = test.images.data.shape().frame();
    auto taps = model.tap_names();
    const bool want_tap = std::find(taps.begin(), taps.end(), cfg_.eval.tap) != taps.end();
    if (n > 0) {
      fs::create_directories(mdir / "saliency");
      fs::create_directories(mdir / "feature_maps");
      if (model.has_attention()) fs::create_directories(mdir / "attention");
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> one{i};
      const auto y = test.labels.gather(one);
      for (Variant v : variants) {
        const auto x = (v == Variant::clean ? test.images : adv->perturbed).gather(one);
        const std::string stem = x.ids[0] + "_" + std::string(to_string(v));
        const auto s = saliency_map(model, x, y);
        io::write_map<float>(mdir / "saliency" / (stem + ".pgm"), s.raw.values(), {1, 1, frame.h, frame.w});
        if (!taps.empty()) {
          const auto f = feature_maps(model, x.data, taps.front());
          io::write_map<float>(mdir / "feature_maps" / (stem + "_" + taps.front() + ".pgm"), tile_channels(f),
                               {1, 1, f.shape().h, f.shape().w * f.shape().c});
        }
        if (model.has_attention()) {
          const auto maps = attention_maps(model, x.data);
          for (std::size_t m = 0; m < maps.size(); ++m)
            io::write_map<float>(mdir / "attention" / (stem + "_" + std::to_string(m) + ".pgm"), maps[m].values(),
                                 maps[m].shape().frame());
        }
      }
    }
    if (want_tap) {
      std::ofstream out(mdir / "embeddings.csv", std::ios::trunc);
      if (!out) throw IoError("cannot write '" + (mdir / "embeddings.csv").string() + "'");
      write_embeddings_csv(out, model, test.images, test.labels, "test", Variant::clean, cfg_.eval.tap);
      if (adv) write_embeddings_csv(out, model, adv->perturbed, test.labels, "test", Variant::adversarial, cfg_.eval.tap, false);
    }
    if (model.task() == Task::multi_label) {
      const LabelBatch clean_pred = adv ? adv->clean_pred : predict_labels(model, test.images.data);
      for (Variant v : variants) {
        auto m = label_cooccurrence(v == Variant::clean ? clean_pred : adv->adv_pred);
        m.threshold = cfg_.eval.cooccurrence_threshold;
        write_cooccurrence_csv(mdir / ("cooccurrence_" + std::string(to_string(v)) + ".csv"), m);
      }
    }
  }

  /// (1, c, h, w) -> c maps side by side, (h, c * w).
  static std::vector<float> tile_channels(const Tensor<float>& f) {
    const Shape s = f.shape();
    std::vector<float> out(s.c * s.h * s.w);
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) out[y * s.c * s.w + c * s.w + x] = f.frame(0)[(c * s.h + y) * s.w + x];
    return out;
  }
};

}  // namespace advbench::harness
