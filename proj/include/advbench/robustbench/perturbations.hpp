#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "advbench/core/tensor.hpp"

namespace advbench {

enum class PerturbationKind {
  brightness,
  gaussian_blur,
  gaussian_noise,
  motion_blur,
  rotate,
  scale,
  shear,
  shot_noise,
  snow,
  spatter,
  speckle_noise,
  tilt,
  translate,
  zoom_blur,
};

enum class PerturbationCategory { noise, blur, weather, digital };

inline std::string_view to_string(PerturbationCategory c) {
  switch (c) {
    case PerturbationCategory::noise: return "noise";
    case PerturbationCategory::blur: return "blur";
    case PerturbationCategory::weather: return "weather";
    case PerturbationCategory::digital: return "digital";
  }
  return "?";
}

struct PerturbationType {
  PerturbationKind kind = PerturbationKind::brightness;

  std::string_view name() const {
    switch (kind) {
      case PerturbationKind::brightness: return "Brightness";
      case PerturbationKind::gaussian_blur: return "Gaussian blur";
      case PerturbationKind::gaussian_noise: return "Gaussian noise";
      case PerturbationKind::motion_blur: return "Motion blur";
      case PerturbationKind::rotate: return "Rotate";
      case PerturbationKind::scale: return "Scale";
      case PerturbationKind::shear: return "Shear";
      case PerturbationKind::shot_noise: return "Shot noise";
      case PerturbationKind::snow: return "Snow";
      case PerturbationKind::spatter: return "Spatter";
      case PerturbationKind::speckle_noise: return "Speckle noise";
      case PerturbationKind::tilt: return "Tilt";
      case PerturbationKind::translate: return "Translate";
      case PerturbationKind::zoom_blur: return "Zoom blur";
    }
    return "?";
  }

  /// Lower-case, dash-separated form used in file names and CLI flags.
  std::string slug() const {
    std::string s(name());
    for (auto& ch : s) ch = ch == ' ' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  }

  PerturbationCategory category() const {
    switch (kind) {
      case PerturbationKind::gaussian_noise:
      case PerturbationKind::shot_noise:
      case PerturbationKind::speckle_noise: return PerturbationCategory::noise;
      case PerturbationKind::gaussian_blur:
      case PerturbationKind::motion_blur:
      case PerturbationKind::zoom_blur: return PerturbationCategory::blur;
      case PerturbationKind::brightness:
      case PerturbationKind::snow:
      case PerturbationKind::spatter: return PerturbationCategory::weather;
      default: return PerturbationCategory::digital;
    }
  }

  /// Noise frames are independent redraws, not a temporal sequence.
  bool temporal() const { return category() != PerturbationCategory::noise; }

  /// Severity reached on the last frame.
  double max_severity() const {
    switch (kind) {
      case PerturbationKind::brightness: return 0.3;       // additive offset
      case PerturbationKind::gaussian_blur: return 3.0;    // kernel sigma, pixels
      case PerturbationKind::gaussian_noise: return 0.10;  // sigma
      case PerturbationKind::motion_blur: return 8.0;      // horizontal streak length, pixels
      case PerturbationKind::rotate: return 15.0;          // degrees
      case PerturbationKind::scale: return 0.3;            // shrink factor 1 - s
      case PerturbationKind::shear: return 0.3;            // horizontal shear coefficient
      case PerturbationKind::shot_noise: return 0.10;      // relative amplitude a, photon count 1 / a^2
      case PerturbationKind::snow: return 1.0;             // flake coverage fraction
      case PerturbationKind::spatter: return 1.0;          // droplet coverage fraction
      case PerturbationKind::speckle_noise: return 0.3;    // multiplicative sigma
      case PerturbationKind::tilt: return 0.5;             // keystone strength
      case PerturbationKind::translate: return 0.10;       // fraction of the side
      case PerturbationKind::zoom_blur: return 0.3;        // largest zoom offset
    }
    return 0.0;
  }

  static const std::array<PerturbationType, 14>& all() {
    static const std::array<PerturbationType, 14> types{{
        {PerturbationKind::brightness},   {PerturbationKind::gaussian_blur}, {PerturbationKind::gaussian_noise},
        {PerturbationKind::motion_blur},  {PerturbationKind::rotate},        {PerturbationKind::scale},
        {PerturbationKind::shear},        {PerturbationKind::shot_noise},    {PerturbationKind::snow},
        {PerturbationKind::spatter},      {PerturbationKind::speckle_noise}, {PerturbationKind::tilt},
        {PerturbationKind::translate},    {PerturbationKind::zoom_blur},
    }};
    return types;
  }

  /// Accepts the display name or the slug.
  static PerturbationType parse(std::string_view s) {
    for (const auto& t : all())
      if (t.name() == s || t.slug() == s) return t;
    throw ContractError("unknown perturbation type '" + std::string(s) + "'");
  }

  friend bool operator==(const PerturbationType&, const PerturbationType&) = default;
};

namespace detail {

/// One (c, h, w) frame with edge-replicating bilinear sampling.
template <class T>
struct FrameView {
  const T* data;
  std::size_t c, h, w;

  T at(std::size_t ch, std::ptrdiff_t y, std::ptrdiff_t x) const {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return data[(ch * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)];
  }

  /// Pixel centres sit at integer coordinates.
  double bilinear(std::size_t ch, double y, double x) const {
    const double fy = std::floor(y), fx = std::floor(x);
    const double ty = y - fy, tx = x - fx;
    const auto y0 = static_cast<std::ptrdiff_t>(fy), x0 = static_cast<std::ptrdiff_t>(fx);
    const double a = at(ch, y0, x0), b = at(ch, y0, x0 + 1);
    const double c0 = at(ch, y0 + 1, x0), d = at(ch, y0 + 1, x0 + 1);
    return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c0 + tx * d);
  }
};

/// Resamples by inverse mapping: output pixel (y, x) reads the source at map(y, x).
template <class T, class Map>
void warp(FrameView<T> src, std::span<T> dst, Map map) {
  for (std::size_t ch = 0; ch < src.c; ++ch)
    for (std::size_t y = 0; y < src.h; ++y)
      for (std::size_t x = 0; x < src.w; ++x) {
        const auto [sy, sx] = map(static_cast<double>(y), static_cast<double>(x));
        dst[(ch * src.h + y) * src.w + x] = static_cast<T>(src.bilinear(ch, sy, sx));
      }
}

template <class T>
void separable_blur(FrameView<T> src, std::span<T> dst, const std::vector<double>& kernel) {
  const auto r = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  std::vector<double> tmp(src.c * src.h * src.w);
  for (std::size_t ch = 0; ch < src.c; ++ch)
    for (std::size_t y = 0; y < src.h; ++y)
      for (std::size_t x = 0; x < src.w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -r; k <= r; ++k)
          acc += kernel[static_cast<std::size_t>(k + r)] *
                 src.at(ch, static_cast<std::ptrdiff_t>(y), static_cast<std::ptrdiff_t>(x) + k);
        tmp[(ch * src.h + y) * src.w + x] = acc;
      }
  auto tmp_at = [&](std::size_t ch, std::ptrdiff_t y, std::size_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(src.h) - 1);
    return tmp[(ch * src.h + static_cast<std::size_t>(y)) * src.w + x];
  };
  for (std::size_t ch = 0; ch < src.c; ++ch)
    for (std::size_t y = 0; y < src.h; ++y)
      for (std::size_t x = 0; x < src.w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -r; k <= r; ++k)
          acc += kernel[static_cast<std::size_t>(k + r)] * tmp_at(ch, static_cast<std::ptrdiff_t>(y) + k, x);
        dst[(ch * src.h + y) * src.w + x] = static_cast<T>(acc);
      }
}

/// Random layer of blobs for Snow and Spatter. Each blob carries an activation threshold
/// in [0,1]; at severity s the blobs with threshold < s are drawn, so coverage grows
/// monotonically and frames never flicker.
struct BlobLayer {
  struct Blob {
    double y, x, radius, threshold, strength, stretch;
  };
  std::vector<Blob> blobs;

  static BlobLayer make(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t count, double min_r,
                        double max_r, double stretch) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BlobLayer layer;
    for (std::size_t i = 0; i < count; ++i)
      layer.blobs.push_back({u(rng) * static_cast<double>(h), u(rng) * static_cast<double>(w),
                             min_r + (max_r - min_r) * u(rng), u(rng), 0.6 + 0.4 * u(rng), stretch});
    return layer;
  }

  /// Coverage mask in [0,1] for severity s in [0,1].
  std::vector<double> mask(double s, std::size_t h, std::size_t w) const {
    std::vector<double> m(h * w, 0.0);
    for (const auto& b : blobs) {
      if (b.threshold >= s) continue;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double dy = (static_cast<double>(y) - b.y), dx = (static_cast<double>(x) - b.x) / b.stretch;
          const double cov = std::clamp(b.radius - std::sqrt(dy * dy + dx * dx) + 0.5, 0.0, 1.0) * b.strength;
          m[y * w + x] = std::max(m[y * w + x], cov);
        }
    }
    return m;
  }
};

}  // namespace detail

/// Applies `type` at `severity` to one (c, h, w) frame. Noise types draw from `rng`;
/// Snow and Spatter lay out their blobs from `layer_seed`. Output is clipped to [0,1].
template <class T>
void apply_perturbation(std::span<const T> frame, Shape frame_shape, PerturbationType type, double severity,
                        std::mt19937_64& rng, std::uint64_t layer_seed, std::span<T> out) {
  require(frame.size() == frame_shape.frame_size() && out.size() == frame.size(), "perturbation frame size mismatch");
  const std::size_t c = frame_shape.c, h = frame_shape.h, w = frame_shape.w;
  const detail::FrameView<T> src{frame.data(), c, h, w};
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double s = severity;
  std::copy(frame.begin(), frame.end(), out.begin());
  if (s == 0.0) return;

  switch (type.kind) {
    case PerturbationKind::gaussian_noise: {
      std::normal_distribution<double> n(0.0, s);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(frame[i] + n(rng));
      break;
    }
    case PerturbationKind::shot_noise: {
      const double photons = 1.0 / (s * s);
      for (std::size_t i = 0; i < out.size(); ++i) {
        std::poisson_distribution<long long> p(std::max(0.0, static_cast<double>(frame[i])) * photons);
        out[i] = static_cast<T>(static_cast<double>(p(rng)) / photons);
      }
      break;
    }
    case PerturbationKind::speckle_noise: {
      std::normal_distribution<double> n(0.0, s);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(frame[i] + frame[i] * n(rng));
      break;
    }
    case PerturbationKind::gaussian_blur: {
      const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * s));
      std::vector<double> k;
      double sum = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) sum += k.emplace_back(std::exp(-0.5 * (i * i) / (s * s)));
      for (auto& v : k) v /= sum;
      detail::separable_blur(src, out, k);
      break;
    }
    case PerturbationKind::motion_blur: {
      // Average of bilinear samples along a horizontal streak of length s.
      const int taps = 2 * static_cast<int>(std::ceil(s)) + 1;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = 0; t < taps; ++t) {
              const double off = -s / 2.0 + s * t / (taps - 1);
              acc += src.bilinear(ch, static_cast<double>(y), static_cast<double>(x) + off);
            }
            out[(ch * h + y) * w + x] = static_cast<T>(acc / taps);
          }
      break;
    }
    case PerturbationKind::zoom_blur: {
      constexpr int kZooms = 8;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int z = 0; z < kZooms; ++z) {
              const double f = 1.0 + s * z / (kZooms - 1);
              acc += src.bilinear(ch, cy + (static_cast<double>(y) - cy) / f, cx + (static_cast<double>(x) - cx) / f);
            }
            out[(ch * h + y) * w + x] = static_cast<T>(acc / kZooms);
          }
      break;
    }
    case PerturbationKind::brightness:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(frame[i] + s);
      break;
    case PerturbationKind::snow: {
      const auto layer = detail::BlobLayer::make(layer_seed, h, w, 40, 0.6, 1.4, 1.8);
      const auto m = layer.mask(s, h, w);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h * w; ++i) {
          const double base = frame[ch * h * w + i] * (1.0 - 0.25 * s) + 0.2 * s;
          out[ch * h * w + i] = static_cast<T>(std::max(base, 0.95 * m[i]));
        }
      break;
    }
    case PerturbationKind::spatter: {
      const auto layer = detail::BlobLayer::make(layer_seed, h, w, 12, 1.0, 2.6, 1.0);
      const auto m = layer.mask(s, h, w);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h * w; ++i) {
          const double v = frame[ch * h * w + i];
          out[ch * h * w + i] = static_cast<T>(v * (1.0 - 0.8 * m[i]) + 0.35 * 0.8 * m[i]);
        }
      break;
    }
    case PerturbationKind::rotate: {
      const double a = s * std::numbers::pi / 180.0, ca = std::cos(a), sa = std::sin(a);
      detail::warp(src, out, [&](double y, double x) {
        const double dy = y - cy, dx = x - cx;
        return std::pair{cy - sa * dx + ca * dy, cx + ca * dx + sa * dy};
      });
      break;
    }
    case PerturbationKind::scale: {
      const double f = 1.0 - s;
      detail::warp(src, out, [&](double y, double x) { return std::pair{cy + (y - cy) / f, cx + (x - cx) / f}; });
      break;
    }
    case PerturbationKind::shear:
      detail::warp(src, out, [&](double y, double x) { return std::pair{y, x + s * (y - cy)}; });
      break;
    case PerturbationKind::tilt: {
      const double hh = static_cast<double>(h);
      detail::warp(src, out, [&](double y, double x) {
        const double widen = 1.0 + s * (y - cy) / hh;
        return std::pair{y, cx + (x - cx) / widen};
      });
      break;
    }
    case PerturbationKind::translate: {
      const double dx = s * static_cast<double>(w), dy = 0.5 * s * static_cast<double>(h);
      detail::warp(src, out, [&](double y, double x) { return std::pair{y - dy, x - dx}; });
      break;
    }
  }
  for (auto& v : out) v = std::clamp(v, T(0), T(1));
}

}  // namespace advbench
