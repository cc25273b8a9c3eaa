#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "advbench/attacks/pgd.hpp"
#include "advbench/io/npy.hpp"
#include "advbench/robustbench/flip.hpp"
#include "advbench/robustbench/perturbations.hpp"

namespace advbench {

inline constexpr std::size_t kDefaultFrames = 21;

/// splitmix64 finaliser over a combined pair; used to derive per-sequence and per-frame seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <class T>
struct PerturbationSequence {
  /// (n_frames, c, h, w); frame 0 is the clean image.
  Tensor<T> frames;
  PerturbationType type;
  /// Severity parameter per frame, non-decreasing.
  std::vector<double> severities;
  std::string source_id;
  std::uint64_t seed = 0;

  std::size_t size() const { return frames.shape().n; }
};

/// Linear ramp from 0 on the clean frame to `max_severity` on the last.
inline std::vector<double> severity_schedule(std::size_t n_frames, double max_severity) {
  std::vector<double> s(n_frames);
  for (std::size_t j = 0; j < n_frames; ++j)
    s[j] = max_severity * static_cast<double>(j) / static_cast<double>(n_frames - 1);
  return s;
}

/// Severity-ramped sequence for one clean frame. Noise frames are independent draws from
/// seeds derived from (seed, frame index); every other type is a deterministic function of
/// the image and the frame's severity, so `seed` does not influence it.
template <class T>
PerturbationSequence<T> generate_sequence(const Tensor<T>& clean, PerturbationType type, std::size_t n_frames,
                                          std::uint64_t seed, std::string source_id = {},
                                          std::optional<double> max_severity = std::nullopt) {
  require(clean.shape().n == 1, "generate_sequence takes a single frame");
  require(n_frames >= 2, "a perturbation sequence needs at least 2 frames");
  for (std::size_t i = 0; i < clean.size(); ++i)
    require(clean[i] >= T(0) && clean[i] <= T(1), "clean frame has pixels outside [0,1]");
  const Shape fs = clean.shape();
  PerturbationSequence<T> seq{Tensor<T>(fs.with_batch(n_frames)), type,
                              severity_schedule(n_frames, max_severity.value_or(type.max_severity())),
                              std::move(source_id), seed};
  const std::uint64_t layer_seed =
      mix_seed(hash_values<T>(clean.values()), static_cast<std::uint64_t>(type.kind));
  const std::span<const T> src(clean.data(), clean.size());
  auto first = seq.frames.frame(0);
  std::copy(src.begin(), src.end(), first.begin());
  for (std::size_t j = 1; j < n_frames; ++j) {
    std::mt19937_64 rng(mix_seed(seed, j));
    apply_perturbation<T>(src, fs, type, seq.severities[j], rng, layer_seed, seq.frames.frame(j));
  }
  return seq;
}

struct SequenceRecord {
  std::string sequence_id;
  std::string source_id;
  PerturbationType type;
  std::uint64_t seed = 0;
  /// Relative to the benchmark directory.
  std::string file;
  std::string clean_hash;
  std::vector<std::string> frame_hashes;
};

struct BenchmarkManifest {
  std::string dataset;
  std::size_t n_frames = kDefaultFrames;
  std::uint64_t seed = 0;
  std::vector<PerturbationType> types;
  std::vector<SequenceRecord> records;

  std::size_t r() const { return records.size(); }
};

template <class T>
struct Benchmark {
  BenchmarkManifest manifest;
  std::vector<PerturbationSequence<T>> sequences;
};

/// Default comparison mode per type: noise sequences are not temporal, so they are
/// compared against the clean frame.
inline FlipMode default_flip_mode(PerturbationType t) {
  return t.temporal() ? FlipMode::adjacent : FlipMode::vs_clean;
}

/// In-memory benchmark over the test split of `data`.
template <class T>
Benchmark<T> generate_benchmark(const Dataset<T>& data, const std::vector<PerturbationType>& types,
                                std::size_t n_frames, std::uint64_t seed) {
  const auto test = data.subset(Split::test);
  if (test.size() == 0) throw ValidationError("benchmark needs a non-empty test split");
  if (types.empty()) throw ValidationError("benchmark needs at least one perturbation type");
  Benchmark<T> b;
  b.manifest = {data.name, n_frames, seed, types, {}};
  const Shape fs = test.images.data.shape().frame();
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto frame = test.images.data.frame(i);
    const Tensor<T> clean(fs, std::span<const T>(frame.data(), frame.size()));
    const std::string& id = test.images.ids[i];
    for (const auto& type : types) {
      const std::uint64_t s = mix_seed(mix_seed(seed, fnv1a(id.data(), id.size())), static_cast<std::uint64_t>(type.kind));
      auto seq = generate_sequence(clean, type, n_frames, s, id);
      SequenceRecord rec{id + "__" + type.slug(), id, type, s, "", hex64(hash_values<T>(clean.values())), {}};
      for (std::size_t j = 0; j < n_frames; ++j) rec.frame_hashes.push_back(hex64(hash_values<T>(seq.frames.frame(j))));
      rec.file = "frames/" + std::to_string(b.sequences.size()) + "_" + type.slug() + ".npy";
      b.manifest.records.push_back(std::move(rec));
      b.sequences.push_back(std::move(seq));
    }
  }
  return b;
}

inline nlohmann::json to_json(const BenchmarkManifest& m) {
  nlohmann::json types = nlohmann::json::array();
  nlohmann::json severities = nlohmann::json::object();
  for (const auto& t : m.types) {
    types.push_back(std::string(t.name()));
    severities[std::string(t.name())] = t.max_severity();
  }
  return {{"record", "benchmark"}, {"dataset", m.dataset}, {"n_frames", m.n_frames}, {"seed", m.seed},
          {"types", types},        {"max_severity", severities}, {"r", m.r()},
          {"frame_format", "npy (n_frames, c, h, w) float32, frame 0 clean"}};
}

inline nlohmann::json to_json(const SequenceRecord& r) {
  return {{"record", "sequence"},
          {"sequence_id", r.sequence_id},
          {"source_id", r.source_id},
          {"type", std::string(r.type.name())},
          {"category", std::string(to_string(r.type.category()))},
          {"seed", r.seed},
          {"file", r.file},
          {"clean_hash", r.clean_hash},
          {"frame_hashes", r.frame_hashes}};
}

/// Writes manifest.jsonl and frames/ under `out_dir`. Output is staged in a sibling
/// `.partial` directory and renamed into place; on failure the staging directory is removed.
template <class T>
void write_benchmark(const Benchmark<T>& b, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (fs::exists(out_dir)) throw IoError("benchmark output '" + out_dir.string() + "' already exists");
  const fs::path staging = out_dir.string() + ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    fs::create_directories(staging / "frames");
    std::ofstream manifest(staging / "manifest.jsonl", std::ios::trunc);
    if (!manifest) throw IoError("cannot write manifest in '" + staging.string() + "'");
    manifest << to_json(b.manifest).dump() << '\n';
    for (std::size_t s = 0; s < b.sequences.size(); ++s) {
      io::write_npy(staging / b.manifest.records[s].file, b.sequences[s].frames.template cast<float>());
      manifest << to_json(b.manifest.records[s]).dump() << '\n';
    }
    manifest.close();
    if (!manifest) throw IoError("manifest write failed in '" + staging.string() + "'");
    fs::rename(staging, out_dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(std::string("benchmark write failed: ") + e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

/// Generates and persists a benchmark; returns its manifest.
template <class T>
BenchmarkManifest build_benchmark(const Dataset<T>& data, const std::vector<PerturbationType>& types,
                                  std::size_t n_frames, std::uint64_t seed, const std::filesystem::path& out_dir) {
  auto b = generate_benchmark(data, types, n_frames, seed);
  write_benchmark(b, out_dir);
  return b.manifest;
}

/// Reads a benchmark directory and verifies every frame hash against the manifest.
template <class T>
Benchmark<T> load_benchmark(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.jsonl");
  if (!in) throw IoError("cannot read '" + (dir / "manifest.jsonl").string() + "'");
  Benchmark<T> b;
  std::string line;
  bool header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (j.at("record") == "benchmark") {
        header = true;
        b.manifest.dataset = j.at("dataset").get<std::string>();
        b.manifest.n_frames = j.at("n_frames").get<std::size_t>();
        b.manifest.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& t : j.at("types")) b.manifest.types.push_back(PerturbationType::parse(t.get<std::string>()));
        continue;
      }
      SequenceRecord r{j.at("sequence_id"), j.at("source_id"), PerturbationType::parse(j.at("type").get<std::string>()),
                       j.at("seed"), j.at("file"), j.at("clean_hash"), j.at("frame_hashes")};
      auto frames = io::read_npy<float>(dir / r.file).template cast<T>();
      if (frames.shape().n != r.frame_hashes.size()) throw ValidationError("frame count mismatch for " + r.sequence_id);
      for (std::size_t f = 0; f < frames.shape().n; ++f)
        if (hex64(hash_values<T>(frames.frame(f))) != r.frame_hashes[f])
          throw ValidationError("hash mismatch in " + r.file + " frame " + std::to_string(f));
      PerturbationSequence<T> seq{std::move(frames), r.type,
                                  severity_schedule(b.manifest.n_frames, r.type.max_severity()), r.source_id, r.seed};
      b.sequences.push_back(std::move(seq));
      b.manifest.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed benchmark manifest: " + std::string(e.what()));
  } catch (const ContractError& e) {
    throw ValidationError("malformed benchmark manifest: " + std::string(e.what()));
  }
  if (!header) throw ValidationError("benchmark manifest has no header record");
  return b;
}

/// Predicted label tokens for every frame of every sequence.
template <class T>
PredictionTable predict_benchmark(const Classifier<T>& model, const Benchmark<T>& b) {
  PredictionTable table;
  for (std::size_t s = 0; s < b.sequences.size(); ++s) {
    const auto preds = predict_labels(model, b.sequences[s].frames);
    std::vector<std::string> tokens;
    for (std::size_t j = 0; j < preds.size(); ++j) tokens.push_back(prediction_token(preds, j));
    table.sequence_ids.push_back(b.manifest.records[s].sequence_id);
    table.labels.push_back(std::move(tokens));
  }
  return table;
}

struct FlipReport {
  /// Pooled over all sequences, each compared in its own mode.
  double fp = 0.0;
  std::map<std::string, double> per_type;
  std::map<std::string, double> per_category;
  /// Mode used per type name.
  std::map<std::string, std::string> modes;
};

/// FP of a prediction table against a manifest. `mode` overrides the per-type default.
inline FlipReport flip_report(const PredictionTable& preds, const BenchmarkManifest& manifest,
                              std::optional<FlipMode> mode = std::nullopt) {
  std::map<std::string, const SequenceRecord*> by_id;
  for (const auto& r : manifest.records) by_id[r.sequence_id] = &r;
  FlipCount total;
  std::map<std::string, FlipCount> types, cats;
  FlipReport out;
  std::optional<std::size_t> n;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto it = by_id.find(preds.sequence_ids[s]);
    if (it == by_id.end()) throw ValidationError("prediction for unknown sequence '" + preds.sequence_ids[s] + "'");
    const auto& labels = preds.labels[s];
    if (n && labels.size() != *n) throw ContractError("ragged prediction sequences");
    n = labels.size();
    const PerturbationType type = it->second->type;
    const FlipMode m = mode.value_or(default_flip_mode(type));
    const auto c = count_flips<std::string>(labels, m);
    total += c;
    types[std::string(type.name())] += c;
    cats[std::string(to_string(type.category()))] += c;
    out.modes[std::string(type.name())] = std::string(to_string(m));
  }
  if (total.comparisons == 0) throw ContractError("flip report needs at least one sequence");
  out.fp = total.rate();
  for (const auto& [k, v] : types) out.per_type[k] = v.rate();
  for (const auto& [k, v] : cats) out.per_category[k] = v.rate();
  return out;
}

}  // namespace advbench
