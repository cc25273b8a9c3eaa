#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "advbench/harness/dataset_io.hpp"
#include "advbench/harness/experiment_config.hpp"

// emit_report writes, under the report directory:
//   summary.md             human-readable tables; sections without artifacts are marked absent
//   clean.csv              model, accuracy, auc
//   attacks.csv            attack, epsilon, steps, accuracy, auc, fooling_ratio (attacked runs only)
//   attack_matrix.csv      rows ACC, AUC, FR; columns clean and each attack (needs eval)
//   defenses.csv           model, clean_accuracy, robust_accuracy, epsilon, steps
//   flip.csv               model, fp, rfp, per-category FP
//   triptych/<attack>/<id>.pgm|ppm   original | perturbation | adversarial, with a .json sidecar
// The perturbation panel is min/max rescaled so its smallest value maps to 0 and its largest
// to 255. Every file is a pure function of the run tree.

namespace advbench::harness {

namespace detail {

inline std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string fmt(const nlohmann::json& v, int digits = 4) {
  return v.is_number() ? fmt(v.get<double>(), digits) : std::string("-");
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::vector<nlohmann::json> out;
  std::ifstream in(path);
  if (!in) return out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) {
      try {
        out.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("'" + path.string() + "': " + e.what());
      }
    }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void markdown(std::ostream& out) const {
    auto line = [&](const std::vector<std::string>& cells) {
      out << '|';
      for (const auto& c : cells) out << ' ' << c << " |";
      out << '\n';
    };
    line(header);
    out << '|';
    for (std::size_t i = 0; i < header.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& r : rows) line(r);
  }

  void csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
  }
};

/// Original | perturbation rescaled to [0,1] | adversarial, separated by 2-pixel white bars.
inline void write_triptych(const std::filesystem::path& path, std::span<const float> original,
                           std::span<const float> adversarial, Shape frame) {
  const std::size_t gap = 2, w = frame.w, h = frame.h, c = frame.c, plane = h * w;
  std::vector<float> delta(original.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = adversarial[i] - original[i];
  float lo{}, hi{};
  const auto scaled = io::minmax_normalize<float>(delta, lo, hi);
  const std::size_t W = 3 * w + 2 * gap;
  std::vector<float> canvas(c * h * W, 1.0f);
  const std::span<const float> panels[3] = {original, scaled, adversarial};
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          canvas[ch * h * W + y * W + p * (w + gap) + x] = panels[p][ch * plane + y * w + x];
  io::write_pnm<float>(path, canvas, {1, c, h, W});
  std::ofstream meta(path.string() + ".json", std::ios::trunc);
  if (!meta) throw IoError("cannot write '" + path.string() + ".json'");
  meta << nlohmann::json{{"panels", {"original", "perturbation", "adversarial"}},
                         {"perturbation_min", lo},
                         {"perturbation_max", hi}}
              .dump()
       << '\n';
}

}  // namespace detail

/// Builds tables and figures from the run tree at `root` into `dir`.
inline void emit_report(const std::filesystem::path& root, const std::filesystem::path& dir,
                        std::size_t triptychs_per_attack = 4) {
  namespace fs = std::filesystem;
  using detail::fmt;
  fs::create_directories(dir);
  const auto stored = detail::read_json_file(root / "config.json");
  const auto cfg = experiment_config_from_json(stored.at("config"));
  std::ofstream md(dir / "summary.md", std::ios::trunc);
  if (!md) throw IoError("cannot write '" + (dir / "summary.md").string() + "'");
  md << "# Experiment report\n\n";
  md << "- config hash: `" << stored.value("config_hash", "") << "`\n";
  md << "- seed: " << cfg.seed << "\n";
  md << "- dataset: " << (cfg.dataset.toy ? std::string(toy::to_string(*cfg.dataset.toy)) : cfg.dataset.path) << "\n";
  md << "- model: " << to_string(cfg.model.model) << "\n\n";

  const auto reports = detail::read_jsonl(root / "eval" / "report.jsonl");
  std::map<std::string, nlohmann::json> by_model;
  for (const auto& r : reports) by_model[r["config"].value("model", "")] = r;
  std::vector<std::string> order;
  for (const auto& r : reports) order.push_back(r["config"].value("model", ""));

  // clean evaluation
  md << "## Clean evaluation\n\n";
  detail::Table clean{{"model", "accuracy", "auc"}, {}};
  if (!reports.empty()) {
    for (const auto& name : order) {
      const auto& r = by_model[name];
      clean.rows.push_back({name, fmt(r["accuracy"]), fmt(r["auc"])});
    }
    if (reports.front().contains("accuracy_convention"))
      md << "Multi-label accuracy: " << reports.front()["accuracy_convention"].get<std::string>() << ".\n\n";
  } else {
    if (fs::exists(root / "train" / "metrics.json"))
      clean.rows.push_back({"natural", fmt(detail::read_json_file(root / "train" / "metrics.json")["clean_test_accuracy"]), "-"});
    for (const auto& d : cfg.defenses)
      if (fs::exists(root / "defend" / d.label / "metrics.json"))
        clean.rows.push_back(
            {d.label, fmt(detail::read_json_file(root / "defend" / d.label / "metrics.json")["clean_test_accuracy"]), "-"});
  }
  if (clean.rows.empty()) {
    md << "_absent: no trained model_\n\n";
  } else {
    clean.markdown(md);
    md << '\n';
    clean.csv(dir / "clean.csv");
  }

  // attacks against the naturally trained model
  md << "## Attacks\n\n";
  detail::Table attacks{{"attack", "epsilon", "steps", "accuracy", "auc", "fooling_ratio"}, {}};
  if (by_model.contains("natural")) {
    for (const auto& a : by_model["natural"]["attacks"]) {
      if (a["attack"] == "pgd-eval") continue;
      attacks.rows.push_back({a["attack"].get<std::string>(), fmt(a["budget"]["epsilon"]),
                              std::to_string(a["budget"]["steps"].get<int>()), fmt(a["accuracy"]), fmt(a["auc"]),
                              fmt(a["fooling_ratio"])});
    }
  } else {
    for (const auto& s : cfg.attacks) {
      const auto p = root / "attack" / s.label / "summary.json";
      if (!fs::exists(p)) continue;
      const auto j = detail::read_json_file(p);
      attacks.rows.push_back({s.label, fmt(j["budget"]["epsilon"]), std::to_string(j["budget"]["steps"].get<int>()),
                              fmt(j["adversarial_accuracy"]), "-", fmt(j["fooling_ratio"])});
    }
  }
  if (attacks.rows.empty()) {
    md << "_absent: no attack artifacts_\n\n";
  } else {
    attacks.markdown(md);
    md << '\n';
    attacks.csv(dir / "attacks.csv");
    if (by_model.contains("natural")) {
      // metric rows against clean and attacked columns
      const auto& nat = by_model["natural"];
      detail::Table matrix{{"metric", "clean"}, {{"ACC", fmt(nat["accuracy"])}, {"AUC", fmt(nat["auc"])}, {"FR", "-"}}};
      for (const auto& row : attacks.rows) {
        matrix.header.push_back(row[0]);
        matrix.rows[0].push_back(row[3]);
        matrix.rows[1].push_back(row[4]);
        matrix.rows[2].push_back(row[5]);
      }
      matrix.markdown(md);
      md << '\n';
      matrix.csv(dir / "attack_matrix.csv");
    }
  }

  // defenses under the evaluation budget
  md << "## Defenses\n\n";
  detail::Table defenses{{"model", "clean_accuracy", "robust_accuracy", "epsilon", "steps"}, {}};
  for (const auto& name : order) {
    const auto& r = by_model[name];
    for (const auto& a : r["attacks"])
      if (a["attack"] == "pgd-eval")
        defenses.rows.push_back({name, fmt(r["accuracy"]), fmt(a["accuracy"]), fmt(a["budget"]["epsilon"]),
                                 std::to_string(a["budget"]["steps"].get<int>())});
  }
  if (reports.empty())
    for (const auto& d : cfg.defenses) {
      const auto p = root / "defend" / d.label / "metrics.json";
      if (!fs::exists(p)) continue;
      const auto j = detail::read_json_file(p);
      defenses.rows.push_back({d.label, fmt(j["clean_test_accuracy"]), fmt(j["robust_accuracy"]),
                               fmt(j["robust_budget"]["epsilon"]), std::to_string(j["robust_budget"]["steps"].get<int>())});
    }
  if (defenses.rows.empty()) {
    md << "_absent: no robustness evaluation_\n\n";
  } else {
    defenses.markdown(md);
    md << '\n';
    defenses.csv(dir / "defenses.csv");
  }

  // robustness benchmark
  md << "## Robustness benchmark\n\n";
  if (fs::exists(root / "bench" / "flip.json")) {
    const auto flips = detail::read_json_file(root / "bench" / "flip.json");
    std::vector<std::string> cats;
    for (const auto& [name, f] : flips["models"].items())
      for (const auto& [cat, _] : f["per_category"].items())
        if (std::find(cats.begin(), cats.end(), cat) == cats.end()) cats.push_back(cat);
    std::sort(cats.begin(), cats.end());
    detail::Table flip{{"model", "fp", "rfp"}, {}};
    for (const auto& c : cats) flip.header.push_back("fp_" + c);
    std::vector<std::string> names;
    if (flips["models"].contains("natural")) names.push_back("natural");
    for (const auto& d : cfg.defenses)
      if (flips["models"].contains(d.label)) names.push_back(d.label);
    for (const auto& [name, _] : flips["models"].items())
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    for (const auto& name : names) {
      const auto& f = flips["models"][name];
      std::vector<std::string> row{name, fmt(f["fp"]), f.contains("rfp") ? fmt(f["rfp"], 2) : "-"};
      for (const auto& c : cats) row.push_back(f["per_category"].contains(c) ? fmt(f["per_category"][c]) : "-");
      flip.rows.push_back(row);
    }
    if (flip.rows.empty()) {
      md << "_absent: benchmark built without model predictions_\n\n";
    } else {
      std::set<std::string> modes;
      for (const auto& name : names)
        for (const auto& [t, m] : flips["models"][name]["modes"].items()) modes.insert(t + ": " + m.get<std::string>());
      flip.markdown(md);
      md << "\nComparison modes: ";
      std::size_t n = 0;
      for (const auto& m : modes) md << (n++ ? ", " : "") << m;
      md << ".\n\n";
      flip.csv(dir / "flip.csv");
    }
  } else {
    md << "_absent: no benchmark_\n\n";
  }

  // triptychs
  md << "## Perturbation figures\n\n";
  std::size_t figures = 0;
  std::optional<Dataset<float>> data;
  for (const auto& s : cfg.attacks) {
    const auto adir = root / "attack" / s.label / "adversarial";
    if (!fs::exists(adir)) continue;
    if (!data) data = resolve_dataset(cfg.dataset);
    const auto adv = read_dataset<float>(adir);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data->size(); ++i) index[data->images.ids[i]] = i;
    const auto tdir = dir / "triptych" / s.label;
    fs::create_directories(tdir);
    const Shape frame = adv.images.data.shape().frame();
    for (std::size_t i = 0; i < std::min(triptychs_per_attack, adv.size()); ++i) {
      const auto& id = adv.images.ids[i];
      const auto it = index.find(id);
      if (it == index.end()) throw ValidationError("adversarial image '" + id + "' has no clean original");
      const auto file = tdir / (id + (frame.c == 1 ? ".pgm" : ".ppm"));
      detail::write_triptych(file, data->images.data.frame(it->second), adv.images.data.frame(i), frame);
      md << "- `" << fs::relative(file, dir).generic_string() << "`\n";
      ++figures;
    }
  }
  if (figures == 0) md << "_absent: no attack artifacts_\n";
  if (!md) throw IoError("write failed for '" + (dir / "summary.md").string() + "'");
}

}  // namespace advbench::harness
