#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

#include "advbench/core/data.hpp"

// Synthetic 28x28 grayscale datasets covering the binary, multi-class and multi-label
// code paths. Everything is a pure function of (sizes, seed).

namespace advbench::toy {

enum class Kind { lesions, digits, shapes };

inline Kind parse_kind(std::string_view s) {
  if (s == "toy-lesions") return Kind::lesions;
  if (s == "toy-digits") return Kind::digits;
  if (s == "toy-shapes") return Kind::shapes;
  throw ValidationError("unknown toy dataset '" + std::string(s) + "'");
}

inline std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::lesions: return "toy-lesions";
    case Kind::digits: return "toy-digits";
    case Kind::shapes: return "toy-shapes";
  }
  return "?";
}

struct Sizes {
  std::size_t train = 1000, val = 200, test = 200;
  std::size_t total() const { return train + val + test; }
};

inline constexpr std::size_t kSide = 28;

namespace detail {

using Canvas = std::array<double, kSide * kSide>;

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

/// Anti-aliased stroke: coverage 1 inside half-thickness, linear 1px falloff.
inline void stroke(Canvas& c, double ax, double ay, double bx, double by, double thickness) {
  for (std::size_t y = 0; y < kSide; ++y)
    for (std::size_t x = 0; x < kSide; ++x) {
      const double d = segment_distance(x + 0.5, y + 0.5, ax, ay, bx, by);
      const double cov = std::clamp(thickness / 2.0 + 0.5 - d, 0.0, 1.0);
      c[y * kSide + x] = std::max(c[y * kSide + x], cov);
    }
}

template <class Rng>
void finish(const Canvas& base, double noise, Rng& rng, std::span<float> out) {
  std::normal_distribution<double> n(0.0, noise);
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = static_cast<float>(std::clamp(base[i] + n(rng), 0.0, 1.0));
}

// Seven-segment digits. Segment endpoints in a 1 x 2 box.
inline constexpr std::array<std::array<double, 4>, 7> kSegments{{
    {0, 0, 1, 0}, {1, 0, 1, 1}, {1, 1, 1, 2}, {0, 2, 1, 2}, {0, 1, 0, 2}, {0, 0, 0, 1}, {0, 1, 1, 1},
}};
// bit i set => segment i lit (a b c d e f g)
inline constexpr std::array<unsigned, 10> kDigitSegments{0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
                                                         0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111};

template <class Rng>
void render_digit(int digit, Rng& rng, std::span<float> out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double width = 7.0 + 3.0 * u(rng);
  const double height = width * (0.85 + 0.2 * u(rng));
  const double angle = (u(rng) - 0.5) * 0.35;
  const double slant = (u(rng) - 0.5) * 0.3;
  const double cx = 14.0 + (u(rng) - 0.5) * 5.0, cy = 14.0 + (u(rng) - 0.5) * 5.0;
  const double thickness = 1.6 + 1.0 * u(rng);
  const double ca = std::cos(angle), sa = std::sin(angle);
  auto place = [&](double sx, double sy) {
    const double lx = (sx - 0.5) * width + slant * (sy - 1.0) * height / 2.0;
    const double ly = (sy - 1.0) * height / 2.0;
    return std::pair{cx + ca * lx - sa * ly, cy + sa * lx + ca * ly};
  };
  Canvas strokes{};
  for (std::size_t s = 0; s < 7; ++s) {
    if (!((kDigitSegments[static_cast<std::size_t>(digit)] >> s) & 1u)) continue;
    const auto& seg = kSegments[s];
    auto [ax, ay] = place(seg[0], seg[1]);
    auto [bx, by] = place(seg[2], seg[3]);
    stroke(strokes, ax, ay, bx, by, thickness);
  }
  const double background = 0.15 + 0.2 * u(rng);
  const double contrast = 0.3 + 0.3 * u(rng);
  Canvas img{};
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = background + contrast * strokes[i];
  finish(img, 0.03, rng, out);
}

/// Dark blob on a skin-toned background. Class 1 is larger, darker and two-toned, with an
/// irregular border and dark dots; the class cues overlap so the task is not trivial.
template <class Rng>
void render_lesion(int malignant, Rng& rng, std::span<float> out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double skin = 0.55 + 0.2 * u(rng);
  const double gx = (u(rng) - 0.5) * 0.006, gy = (u(rng) - 0.5) * 0.006;
  const double cx = 14.0 + (u(rng) - 0.5) * 6.0, cy = 14.0 + (u(rng) - 0.5) * 6.0;
  const double radius = malignant ? 5.5 + 3.5 * u(rng) : 4.5 + 3.0 * u(rng);
  const double elong = 0.8 + 0.4 * u(rng);
  const double depth = malignant ? 0.22 + 0.16 * u(rng) : 0.12 + 0.14 * u(rng);
  const double amp = malignant ? 0.15 + 0.2 * u(rng) : 0.07 * u(rng);
  const int freq = 3 + static_cast<int>(4 * u(rng));
  const double phase = 2 * std::numbers::pi * u(rng);
  const double amp2 = malignant ? 0.1 * u(rng) : 0.0;
  const double phase2 = 2 * std::numbers::pi * u(rng);
  // Second tone: a darker off-centre patch inside malignant lesions.
  const double tone = malignant ? 0.06 + 0.1 * u(rng) : 0.0;
  const double ta = 2 * std::numbers::pi * u(rng);
  const double tx = cx + 0.4 * radius * std::cos(ta), ty = cy + 0.4 * radius * std::sin(ta);
  std::array<std::array<double, 3>, 6> dots{};
  const int n_dots = malignant ? 2 + static_cast<int>(5 * u(rng)) : 0;
  for (int d = 0; d < n_dots; ++d) {
    const double r = radius * 0.6 * u(rng), a = 2 * std::numbers::pi * u(rng);
    dots[static_cast<std::size_t>(d)] = {cx + r * std::cos(a), cy + r * std::sin(a), 0.1 + 0.1 * u(rng)};
  }
  Canvas img{};
  for (std::size_t y = 0; y < kSide; ++y)
    for (std::size_t x = 0; x < kSide; ++x) {
      const double dx = (x + 0.5 - cx) / elong, dy = y + 0.5 - cy;
      const double theta = std::atan2(dy, dx);
      const double r = std::sqrt(dx * dx + dy * dy);
      const double edge = radius * (1.0 + amp * std::sin(freq * theta + phase) + amp2 * std::sin(2 * freq * theta + phase2));
      const double inside = std::clamp(edge - r + 0.5, 0.0, 1.0);
      double v = skin + gx * (x - 14.0) + gy * (y - 14.0) - depth * inside;
      v -= tone * inside * std::clamp(0.5 * radius - std::hypot(x + 0.5 - tx, y + 0.5 - ty), 0.0, 1.0);
      for (int d = 0; d < n_dots; ++d) {
        const auto& dot = dots[static_cast<std::size_t>(d)];
        const double dd = std::hypot(x + 0.5 - dot[0], y + 0.5 - dot[1]);
        v -= dot[2] * inside * std::clamp(1.6 - dd, 0.0, 1.0);
      }
      img[y * kSide + x] = v;
    }
  finish(img, 0.02, rng, out);
}

inline constexpr int kShapeKinds = 8;

/// One of eight small glyphs centred at (cx, cy) with half-size s.
inline void draw_shape(Canvas& c, int kind, double cx, double cy, double s) {
  switch (kind) {
    case 0:  // disc
      for (std::size_t y = 0; y < kSide; ++y)
        for (std::size_t x = 0; x < kSide; ++x) {
          const double cov = std::clamp(s - std::hypot(x + 0.5 - cx, y + 0.5 - cy) + 0.5, 0.0, 1.0);
          c[y * kSide + x] = std::max(c[y * kSide + x], cov);
        }
      break;
    case 1:  // square outline
      stroke(c, cx - s, cy - s, cx + s, cy - s, 1.5);
      stroke(c, cx + s, cy - s, cx + s, cy + s, 1.5);
      stroke(c, cx + s, cy + s, cx - s, cy + s, 1.5);
      stroke(c, cx - s, cy + s, cx - s, cy - s, 1.5);
      break;
    case 2:  // triangle
      stroke(c, cx, cy - s, cx + s, cy + s, 1.5);
      stroke(c, cx + s, cy + s, cx - s, cy + s, 1.5);
      stroke(c, cx - s, cy + s, cx, cy - s, 1.5);
      break;
    case 3:  // plus
      stroke(c, cx - s, cy, cx + s, cy, 1.8);
      stroke(c, cx, cy - s, cx, cy + s, 1.8);
      break;
    case 4:  // diagonal cross
      stroke(c, cx - s, cy - s, cx + s, cy + s, 1.5);
      stroke(c, cx - s, cy + s, cx + s, cy - s, 1.5);
      break;
    case 5:  // horizontal bar
      stroke(c, cx - 1.6 * s, cy, cx + 1.6 * s, cy, 2.5);
      break;
    case 6:  // vertical bar
      stroke(c, cx, cy - 1.6 * s, cx, cy + 1.6 * s, 2.5);
      break;
    case 7:  // ring
      for (std::size_t y = 0; y < kSide; ++y)
        for (std::size_t x = 0; x < kSide; ++x) {
          const double d = std::abs(std::hypot(x + 0.5 - cx, y + 0.5 - cy) - s);
          c[y * kSide + x] = std::max(c[y * kSide + x], std::clamp(1.25 - d, 0.0, 1.0));
        }
      break;
    default: break;
  }
}

template <class Rng>
std::array<std::uint8_t, kShapeKinds> render_shapes(Rng& rng, std::span<float> out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<std::uint8_t, kShapeKinds> present{};
  bool any = false;
  for (auto& p : present) any |= (p = u(rng) < 0.3 ? 1 : 0);
  if (!any) present[static_cast<std::size_t>(u(rng) * kShapeKinds) % kShapeKinds] = 1;
  Canvas strokes{};
  for (int k = 0; k < kShapeKinds; ++k) {
    if (!present[static_cast<std::size_t>(k)]) continue;
    draw_shape(strokes, k, 6.0 + 16.0 * u(rng), 6.0 + 16.0 * u(rng), 3.0 + 1.5 * u(rng));
  }
  const double background = 0.1 + 0.15 * u(rng);
  const double contrast = 0.45 + 0.35 * u(rng);
  Canvas img{};
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = background + contrast * strokes[i];
  finish(img, 0.03, rng, out);
  return present;
}

}  // namespace detail

/// Builds a toy dataset with images ordered train, val, test.
inline Dataset<float> make_dataset(Kind kind, Sizes sizes, std::uint64_t seed) {
  const std::size_t m = sizes.total();
  Dataset<float> d;
  d.name = std::string(to_string(kind));
  d.images.data = Tensor<float>({m, 1, kSide, kSide});
  std::mt19937_64 rng(seed);
  const int k = kind == Kind::digits ? 10 : (kind == Kind::lesions ? 2 : detail::kShapeKinds);
  d.labels = LabelBatch{kind == Kind::shapes ? Task::multi_label : Task::single_label, k, {}, {}};
  for (std::size_t i = 0; i < m; ++i) {
    auto frame = d.images.data.frame(i);
    switch (kind) {
      case Kind::digits: {
        const int c = static_cast<int>(i % 10);
        detail::render_digit(c, rng, frame);
        d.labels.classes.push_back(c);
        break;
      }
      case Kind::lesions: {
        const int c = static_cast<int>(i % 2);
        detail::render_lesion(c, rng, frame);
        d.labels.classes.push_back(c);
        break;
      }
      case Kind::shapes: {
        auto present = detail::render_shapes(rng, frame);
        d.labels.vectors.insert(d.labels.vectors.end(), present.begin(), present.end());
        break;
      }
    }
    const Split s = i < sizes.train ? Split::train : (i < sizes.train + sizes.val ? Split::val : Split::test);
    d.splits.push_back(s);
    d.images.ids.push_back(d.name + "-" + std::string(advbench::to_string(s)) + "-" + std::to_string(i));
  }
  d.validate();
  return d;
}

}  // namespace advbench::toy
