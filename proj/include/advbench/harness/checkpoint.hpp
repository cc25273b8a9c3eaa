#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "json.hpp"

#include "advbench/core/zoo.hpp"

// Checkpoint file: one JSON header line, then every parameter block as little-endian
// float32 in block order. The header records the zoo spec, input frame, k, the training
// seed, the experiment config hash and the FNV-1a hash of the float32 payload.

namespace advbench::harness {

struct CheckpointInfo {
  ZooSpec spec;
  Shape input;
  int k = 2;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string parameter_hash;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline std::vector<float> flatten_float(const Parameters<float>& p) {
  std::vector<float> out;
  out.reserve(p.num_values());
  for (std::size_t b = 0; b < p.num_blocks(); ++b) out.insert(out.end(), p.block(b).begin(), p.block(b).end());
  return out;
}

}  // namespace detail

/// FNV-1a over the float32 parameter payload, as written to checkpoints.
inline std::string checkpoint_hash(const Parameters<float>& p) {
  const auto flat = detail::flatten_float(p);
  return hex64(fnv1a(flat.data(), flat.size() * sizeof(float)));
}

inline CheckpointInfo save_checkpoint(const std::filesystem::path& path, const Classifier<float>& model,
                                      const ZooSpec& spec, const std::string& config_hash) {
  CheckpointInfo info{spec, model.input_shape(), model.num_classes(), model.seed(), config_hash,
                      checkpoint_hash(model.parameters())};
  const auto& p = model.parameters();
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t b = 0; b < p.num_blocks(); ++b) blocks.push_back({{"name", p.name(b)}, {"count", p.block(b).size()}});
  const nlohmann::json header = {{"format", "advbench-checkpoint"},
                                 {"version", 1},
                                 {"zoo", std::string(to_string(spec.model))},
                                 {"conv1", spec.conv1_channels},
                                 {"conv2", spec.conv2_channels},
                                 {"input", {info.input.c, info.input.h, info.input.w}},
                                 {"k", info.k},
                                 {"seed", info.seed},
                                 {"config_hash", config_hash},
                                 {"parameter_hash", info.parameter_hash},
                                 {"blocks", blocks}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << header.dump() << '\n';
  const auto flat = detail::flatten_float(p);
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
  return info;
}

struct LoadedCheckpoint {
  CheckpointInfo info;
  std::unique_ptr<Classifier<float>> model;
};

/// Rebuilds the zoo model and restores its parameters. A payload whose hash differs from
/// the header, or a block layout that differs from the architecture, is a ValidationError.
inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  LoadedCheckpoint out;
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
    if (h.at("format") != "advbench-checkpoint") throw ValidationError("'" + path.string() + "' is not a checkpoint");
    out.info.spec.model = parse_zoo_model(h.at("zoo").get<std::string>());
    out.info.spec.conv1_channels = h.at("conv1").get<std::size_t>();
    out.info.spec.conv2_channels = h.at("conv2").get<std::size_t>();
    const auto in_shape = h.at("input").get<std::vector<std::size_t>>();
    if (in_shape.size() != 3) throw ValidationError("'" + path.string() + "': bad input shape");
    out.info.input = {1, in_shape[0], in_shape[1], in_shape[2]};
    out.info.k = h.at("k").get<int>();
    out.info.seed = h.at("seed").get<std::uint64_t>();
    out.info.config_hash = h.at("config_hash").get<std::string>();
    out.info.parameter_hash = h.at("parameter_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path.string() + "': bad checkpoint header: " + e.what());
  }
  out.model = make_classifier<float>(out.info.spec, out.info.input, out.info.k, out.info.seed);
  auto& p = out.model->parameters();
  const auto& blocks = h["blocks"];
  if (!blocks.is_array() || blocks.size() != p.num_blocks())
    throw ValidationError("'" + path.string() + "': block layout does not match '" + std::string(to_string(out.info.spec.model)) + "'");
  for (std::size_t b = 0; b < p.num_blocks(); ++b) {
    if (!blocks[b].is_object() || blocks[b].value("name", "") != p.name(b) || blocks[b].value("count", std::size_t{0}) != p.block(b).size())
      throw ValidationError("'" + path.string() + "': block " + std::to_string(b) + " does not match the architecture");
    in.read(reinterpret_cast<char*>(p.block(b).data()), static_cast<std::streamsize>(p.block(b).size() * sizeof(float)));
  }
  if (!in) throw ValidationError("'" + path.string() + "': truncated parameter payload");
  if (in.peek() != std::char_traits<char>::eof()) throw ValidationError("'" + path.string() + "': trailing bytes");
  if (checkpoint_hash(p) != out.info.parameter_hash)
    throw ValidationError("'" + path.string() + "': parameter hash mismatch");
  return out;
}

}  // namespace advbench::harness
