#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include "json.hpp"

#include "advbench/core/tensor.hpp"

// 8-bit binary PGM (1 channel) and PPM (3 channels). Values in [0,1] are stored as
// round(255 v) and read back as byte / 255.

namespace advbench::io {

template <class T>
void write_pnm(const std::filesystem::path& path, std::span<const T> frame, Shape frame_shape) {
  require(frame_shape.c == 1 || frame_shape.c == 3, "PNM export supports 1 or 3 channels, got " +
                                                        std::to_string(frame_shape.c));
  require(frame.size() == frame_shape.frame_size(), "PNM export: frame size mismatch");
  const std::size_t plane = frame_shape.h * frame_shape.w;
  std::string bytes(plane * frame_shape.c, '\0');
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < frame_shape.c; ++c) {
      const double v = std::clamp(static_cast<double>(frame[c * plane + p]), 0.0, 1.0);
      bytes[p * frame_shape.c + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << (frame_shape.c == 1 ? "P5" : "P6") << '\n' << frame_shape.w << ' ' << frame_shape.h << "\n255\n";
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Returns a (1, c, h, w) tensor.
template <class T>
Tensor<T> read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw ValidationError("'" + path.string() + "' is not a binary PGM/PPM file");
  auto next_number = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = -1;
    in >> v;
    if (!in || v <= 0) throw ValidationError("'" + path.string() + "': bad PNM header");
    return static_cast<std::size_t>(v);
  };
  const std::size_t w = next_number(), h = next_number(), maxval = next_number();
  if (maxval != 255) throw ValidationError("'" + path.string() + "': only 8-bit PNM is supported");
  in.get();
  const std::size_t c = magic == "P5" ? 1 : 3;
  std::string bytes(w * h * c, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw ValidationError("'" + path.string() + "': truncated pixel data");
  Tensor<T> t({1, c, h, w});
  const std::size_t plane = h * w;
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t ch = 0; ch < c; ++ch)
      t[ch * plane + p] = static_cast<T>(static_cast<unsigned char>(bytes[p * c + ch])) / T(255);
  return t;
}

/// Linear min/max rescale to [0,1]; a constant map becomes all zeros.
template <class T>
std::vector<T> minmax_normalize(std::span<const T> values, T& lo, T& hi) {
  lo = values.empty() ? T(0) : *std::min_element(values.begin(), values.end());
  hi = values.empty() ? T(0) : *std::max_element(values.begin(), values.end());
  std::vector<T> out(values.size(), T(0));
  if (hi > lo)
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
  return out;
}

/// Writes a map as a min/max normalized grayscale (or RGB) image plus `<path>.json`
/// holding the original range, so raw values can be recovered up to quantization.
template <class T>
void write_map(const std::filesystem::path& path, std::span<const T> values, Shape frame_shape) {
  T lo{}, hi{};
  const auto norm = minmax_normalize(values, lo, hi);
  write_pnm<T>(path, norm, frame_shape);
  const nlohmann::json meta = {{"min", static_cast<double>(lo)},
                               {"max", static_cast<double>(hi)},
                               {"width", frame_shape.w},
                               {"height", frame_shape.h},
                               {"channels", frame_shape.c}};
  std::ofstream out(path.string() + ".json", std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + ".json'");
  out << meta.dump() << '\n';
}

}  // namespace advbench::io
