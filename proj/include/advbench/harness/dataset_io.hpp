#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "advbench/core/data.hpp"
#include "advbench/io/image.hpp"
#include "advbench/io/npy.hpp"

// Dataset directory layout:
//   dataset.json     {"name", "task", "k", "channels", "height", "width", "count"}
//   manifest.jsonl   one record per image: {"id", "file", "label" | "labels", "split"}
//   images/          one file per image; .pgm/.ppm (8-bit) or .npy (exact float)
//   budget.json      adversarial sets only: the attack budget that produced them
// Single-label records carry "label": <class>; multi-label records carry "labels": [0/1...].

namespace advbench::harness {

enum class ImageFormat { pnm, npy };

namespace detail {

inline std::string image_file(const std::string& id, ImageFormat f, std::size_t channels) {
  if (f == ImageFormat::npy) return "images/" + id + ".npy";
  return "images/" + id + (channels == 1 ? ".pgm" : ".ppm");
}

inline void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..")
    throw ValidationError("image id '" + id + "' cannot be used as a file name");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Writes `data` under `dir`, which must not exist yet.
template <class T>
void write_dataset(const Dataset<T>& data, const std::filesystem::path& dir, ImageFormat format,
                   const std::optional<nlohmann::json>& budget = std::nullopt) {
  data.validate();
  if (std::filesystem::exists(dir)) throw IoError("refusing to overwrite existing dataset '" + dir.string() + "'");
  std::filesystem::create_directories(dir / "images");
  const Shape frame = data.images.data.shape().frame();
  detail::write_json_file(dir / "dataset.json", {{"name", data.name},
                                                  {"task", std::string(to_string(data.task()))},
                                                  {"k", data.num_classes()},
                                                  {"channels", frame.c},
                                                  {"height", frame.h},
                                                  {"width", frame.w},
                                                  {"count", data.size()}});
  if (budget) detail::write_json_file(dir / "budget.json", *budget);
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
  if (!manifest) throw IoError("cannot write '" + (dir / "manifest.jsonl").string() + "'");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& id = data.images.ids[i];
    detail::check_id(id);
    const std::string file = detail::image_file(id, format, frame.c);
    if (format == ImageFormat::npy) {
      std::vector<std::size_t> one{i};
      io::write_npy(dir / file, data.images.data.gather(one));
    } else {
      io::write_pnm<T>(dir / file, data.images.data.frame(i), frame);
    }
    nlohmann::json rec = {{"id", id}, {"file", file}, {"split", std::string(to_string(data.splits[i]))}};
    if (data.task() == Task::single_label) {
      rec["label"] = data.labels.classes[i];
    } else {
      auto r = data.labels.row(i);
      rec["labels"] = std::vector<int>(r.begin(), r.end());
    }
    manifest << rec.dump() << '\n';
  }
  if (!manifest) throw IoError("write failed for '" + (dir / "manifest.jsonl").string() + "'");
}

template <class T>
Dataset<T> read_dataset(const std::filesystem::path& dir) {
  const auto meta = detail::read_json_file(dir / "dataset.json");
  Dataset<T> d;
  std::size_t c = 0, h = 0, w = 0, count = 0;
  int k = 0;
  Task task{};
  try {
    d.name = meta.at("name").get<std::string>();
    const auto t = meta.at("task").get<std::string>();
    if (t == "single-label") task = Task::single_label;
    else if (t == "multi-label") task = Task::multi_label;
    else throw ValidationError("unknown task '" + t + "'");
    k = meta.at("k").get<int>();
    c = meta.at("channels").get<std::size_t>();
    h = meta.at("height").get<std::size_t>();
    w = meta.at("width").get<std::size_t>();
    count = meta.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + (dir / "dataset.json").string() + "': " + e.what());
  }
  if (k < 2) throw ValidationError("'" + (dir / "dataset.json").string() + "': k must be >= 2");
  const auto manifest_path = dir / "manifest.jsonl";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read '" + manifest_path.string() + "'");
  d.labels = LabelBatch{task, k, {}, {}};
  d.images.data = Tensor<T>({count, c, h, w});
  std::size_t i = 0, line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "'" + manifest_path.string() + "' line " + std::to_string(line_no);
    if (i >= count) throw ValidationError(where + ": more records than the declared count " + std::to_string(count));
    try {
      const auto rec = nlohmann::json::parse(line);
      const auto id = rec.at("id").get<std::string>();
      const auto file = rec.at("file").get<std::string>();
      d.splits.push_back(parse_split(rec.at("split").get<std::string>()));
      if (task == Task::single_label) {
        d.labels.classes.push_back(rec.at("label").get<int>());
      } else {
        const auto v = rec.at("labels").get<std::vector<int>>();
        if (v.size() != static_cast<std::size_t>(k)) throw ValidationError(where + ": label vector length != k");
        for (int e : v) d.labels.vectors.push_back(static_cast<std::uint8_t>(e));
      }
      const auto path = dir / file;
      const auto img = path.extension() == ".npy" ? io::read_npy<T>(path) : io::read_pnm<T>(path);
      const Shape s = img.shape();
      if (s.n != 1 || s.c != c || s.h != h || s.w != w)
        throw ValidationError(where + ": image '" + file + "' has shape " + s.str());
      std::copy(img.values().begin(), img.values().end(), d.images.data.frame(i).begin());
      d.images.ids.push_back(id);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    ++i;
  }
  if (i != count) throw ValidationError("'" + manifest_path.string() + "' has " + std::to_string(i) +
                                        " records, dataset.json declares " + std::to_string(count));
  try {
    d.validate();
  } catch (const ContractError& e) {
    throw ValidationError("dataset '" + dir.string() + "': " + e.what());
  }
  return d;
}

}  // namespace advbench::harness
