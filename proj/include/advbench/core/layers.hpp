#pragma once

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <string>

#include "advbench/core/parameters.hpp"
#include "advbench/core/tensor.hpp"

// Stateless layer kernels. Parameters live in a caller-owned Parameters<T>; layers only
// remember which block holds their weights, so a const model can serve concurrent forward
// and backward queries.

namespace advbench::layers {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Same-padded, stride-1 square convolution.
struct Conv2d {
  std::size_t in_channels = 0, out_channels = 0, kernel = 3;
  std::size_t weight = 0, bias = 0;

  template <class T>
  static Conv2d create(Parameters<T>& params, const std::string& name, std::size_t in, std::size_t out,
                       std::size_t kernel, std::mt19937_64& rng) {
    Conv2d c{in, out, kernel, 0, 0};
    c.weight = params.add(name + ".weight", out * in * kernel * kernel);
    c.bias = params.add(name + ".bias", out);
    he_normal(params.block(c.weight), in * kernel * kernel, rng);
    return c;
  }

  std::size_t pad() const { return kernel / 2; }
  std::size_t patch() const { return in_channels * kernel * kernel; }

  template <class T>
  void im2col(const T* image, std::size_t h, std::size_t w, RowMatrix<T>& cols) const {
    const std::size_t hw = h * w;
    cols.resize(static_cast<Eigen::Index>(patch()), static_cast<Eigen::Index>(hw));
    const auto p = static_cast<std::ptrdiff_t>(pad());
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < in_channels; ++ci) {
      const T* plane = image + ci * hw;
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        for (std::size_t kx = 0; kx < kernel; ++kx, ++row) {
          T* dst = cols.data() + row * hw;
          for (std::size_t y = 0; y < h; ++y) {
            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - p;
            for (std::size_t x = 0; x < w; ++x) {
              const auto sx = static_cast<std::ptrdiff_t>(x + kx) - p;
              const bool inside = sy >= 0 && sy < static_cast<std::ptrdiff_t>(h) && sx >= 0 &&
                                  sx < static_cast<std::ptrdiff_t>(w);
              dst[y * w + x] = inside ? plane[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)] : T(0);
            }
          }
        }
      }
    }
  }

  template <class T>
  void col2im_add(const RowMatrix<T>& cols, std::size_t h, std::size_t w, T* image) const {
    const std::size_t hw = h * w;
    const auto p = static_cast<std::ptrdiff_t>(pad());
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < in_channels; ++ci) {
      T* plane = image + ci * hw;
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        for (std::size_t kx = 0; kx < kernel; ++kx, ++row) {
          const T* src = cols.data() + row * hw;
          for (std::size_t y = 0; y < h; ++y) {
            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - p;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t x = 0; x < w; ++x) {
              const auto sx = static_cast<std::ptrdiff_t>(x + kx) - p;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              plane[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)] += src[y * w + x];
            }
          }
        }
      }
    }
  }

  template <class T>
  Tensor<T> forward(const Parameters<T>& params, const Tensor<T>& x) const {
    const Shape s = x.shape();
    require(s.c == in_channels, "conv expects " + std::to_string(in_channels) + " channels, got " + s.str());
    Tensor<T> out({s.n, out_channels, s.h, s.w});
    const std::size_t hw = s.h * s.w;
    ConstMatrixMap<T> wmat(params.block(weight).data(), static_cast<Eigen::Index>(out_channels),
                           static_cast<Eigen::Index>(patch()));
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(params.block(bias).data(),
                                                                static_cast<Eigen::Index>(out_channels));
    RowMatrix<T> cols;
    for (std::size_t n = 0; n < s.n; ++n) {
      im2col(x.frame(n).data(), s.h, s.w, cols);
      MatrixMap<T> o(out.frame(n).data(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(hw));
      o.noalias() = wmat * cols;
      o.colwise() += bvec;
    }
    return out;
  }

  /// Accumulates parameter gradients into `grads` (if given) and returns dL/dx when requested.
  template <class T>
  Tensor<T> backward(const Parameters<T>& params, const Tensor<T>& x, const Tensor<T>& grad_out,
                     Parameters<T>* grads, bool need_input_grad) const {
    const Shape s = x.shape();
    const std::size_t hw = s.h * s.w;
    const auto co = static_cast<Eigen::Index>(out_channels);
    const auto pa = static_cast<Eigen::Index>(patch());
    ConstMatrixMap<T> wmat(params.block(weight).data(), co, pa);
    Tensor<T> grad_in;
    if (need_input_grad) grad_in = Tensor<T>(s);
    RowMatrix<T> cols, dcols;
    for (std::size_t n = 0; n < s.n; ++n) {
      ConstMatrixMap<T> go(grad_out.frame(n).data(), co, static_cast<Eigen::Index>(hw));
      if (grads) {
        im2col(x.frame(n).data(), s.h, s.w, cols);
        MatrixMap<T> dw(grads->block(weight).data(), co, pa);
        dw.noalias() += go * cols.transpose();
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grads->block(bias).data(), co);
        db += go.rowwise().sum();
      }
      if (need_input_grad) {
        dcols.noalias() = wmat.transpose() * go;
        col2im_add(dcols, s.h, s.w, grad_in.frame(n).data());
      }
    }
    return grad_in;
  }
};

/// Fully connected layer over the flattened frame.
struct Dense {
  std::size_t inputs = 0, outputs = 0;
  std::size_t weight = 0, bias = 0;

  template <class T>
  static Dense create(Parameters<T>& params, const std::string& name, std::size_t in, std::size_t out,
                      std::mt19937_64& rng) {
    Dense d{in, out, 0, 0};
    d.weight = params.add(name + ".weight", out * in);
    d.bias = params.add(name + ".bias", out);
    he_normal(params.block(d.weight), in, rng);
    // He scaling is for ReLU inputs; a linear read-out starts smaller.
    for (auto& v : params.block(d.weight)) v *= T(0.5);
    return d;
  }

  template <class T>
  Tensor<T> forward(const Parameters<T>& params, const Tensor<T>& x) const {
    const Shape s = x.shape();
    require(s.frame_size() == inputs, "dense expects " + std::to_string(inputs) + " inputs, got " + s.str());
    Tensor<T> out({s.n, outputs, 1, 1});
    ConstMatrixMap<T> xm(x.data(), static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(inputs));
    ConstMatrixMap<T> wm(params.block(weight).data(), static_cast<Eigen::Index>(outputs),
                         static_cast<Eigen::Index>(inputs));
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(params.block(bias).data(),
                                                            static_cast<Eigen::Index>(outputs));
    MatrixMap<T> om(out.data(), static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(outputs));
    om.noalias() = xm * wm.transpose();
    om.rowwise() += b;
    return out;
  }

  template <class T>
  Tensor<T> backward(const Parameters<T>& params, const Tensor<T>& x, const Tensor<T>& grad_out,
                     Parameters<T>* grads, bool need_input_grad) const {
    const Shape s = x.shape();
    const auto n = static_cast<Eigen::Index>(s.n);
    const auto in = static_cast<Eigen::Index>(inputs);
    const auto out = static_cast<Eigen::Index>(outputs);
    ConstMatrixMap<T> xm(x.data(), n, in);
    ConstMatrixMap<T> go(grad_out.data(), n, out);
    if (grads) {
      MatrixMap<T> dw(grads->block(weight).data(), out, in);
      dw.noalias() += go.transpose() * xm;
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(grads->block(bias).data(), out);
      db += go.colwise().sum();
    }
    Tensor<T> grad_in;
    if (need_input_grad) {
      grad_in = Tensor<T>(s);
      ConstMatrixMap<T> wm(params.block(weight).data(), out, in);
      MatrixMap<T> gi(grad_in.data(), n, in);
      gi.noalias() = go * wm;
    }
    return grad_in;
  }
};

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

/// Uses the forward output y = tanh(x).
template <class T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
  Tensor<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = grad_out[i] * (T(1) - y[i] * y[i]);
  return g;
}

/// 2x2 max pooling, stride 2. Ties route to the first element in row-major window order.
template <class T>
Tensor<T> max_pool2(const Tensor<T>& x) {
  const Shape s = x.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, "max_pool2 needs even spatial extents, got " + s.str());
  Tensor<T> out({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h / 2; ++y)
        for (std::size_t xx = 0; xx < s.w / 2; ++xx) {
          T m = x.at(n, c, 2 * y, 2 * xx);
          m = std::max(m, x.at(n, c, 2 * y, 2 * xx + 1));
          m = std::max(m, x.at(n, c, 2 * y + 1, 2 * xx));
          m = std::max(m, x.at(n, c, 2 * y + 1, 2 * xx + 1));
          out.at(n, c, y, xx) = m;
        }
  return out;
}

template <class T>
Tensor<T> max_pool2_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  const Shape s = x.shape();
  Tensor<T> g(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h / 2; ++y)
        for (std::size_t xx = 0; xx < s.w / 2; ++xx) {
          std::size_t by = 2 * y, bx = 2 * xx;
          T best = x.at(n, c, by, bx);
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx)
              if (x.at(n, c, 2 * y + dy, 2 * xx + dx) > best) {
                best = x.at(n, c, 2 * y + dy, 2 * xx + dx);
                by = 2 * y + dy;
                bx = 2 * xx + dx;
              }
          g.at(n, c, by, bx) += grad_out.at(n, c, y, xx);
        }
  return g;
}

/// Nearest-neighbour 2x upsampling.
template <class T>
Tensor<T> upsample2(const Tensor<T>& x) {
  const Shape s = x.shape();
  Tensor<T> out({s.n, s.c, s.h * 2, s.w * 2});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h * 2; ++y)
        for (std::size_t xx = 0; xx < s.w * 2; ++xx) out.at(n, c, y, xx) = x.at(n, c, y / 2, xx / 2);
  return out;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& grad_out) {
  const Shape s = grad_out.shape();
  Tensor<T> g({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t xx = 0; xx < s.w; ++xx) g.at(n, c, y / 2, xx / 2) += grad_out.at(n, c, y, xx);
  return g;
}

/// Channel concatenation [a | b].
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, "concat shape mismatch " + sa.str() + " " + sb.str());
  Tensor<T> out({sa.n, sa.c + sb.c, sa.h, sa.w});
  for (std::size_t n = 0; n < sa.n; ++n) {
    auto dst = out.frame(n);
    std::copy(a.frame(n).begin(), a.frame(n).end(), dst.begin());
    std::copy(b.frame(n).begin(), b.frame(n).end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.frame_size()));
  }
  return out;
}

/// Inverse of concat_channels for gradients: returns the part belonging to the first `channels`.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, std::size_t channels) {
  const Shape s = g.shape();
  Tensor<T> a({s.n, channels, s.h, s.w}), b({s.n, s.c - channels, s.h, s.w});
  const std::size_t fa = a.shape().frame_size();
  for (std::size_t n = 0; n < s.n; ++n) {
    auto src = g.frame(n);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(fa), a.frame(n).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(fa), src.end(), b.frame(n).begin());
  }
  return {std::move(a), std::move(b)};
}

template <class T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  require(dst.shape() == src.shape(), "add shape mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace advbench::layers
