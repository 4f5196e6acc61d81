#include "lvnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "lvnet/gemm.hpp"

namespace lvnet {
namespace {

struct ConvGeometry {
  std::size_t n, c, h, w, j, k, oh, ow, stride, pad;
  std::size_t patch() const { return c * k * k; }
  std::size_t out_plane() const { return oh * ow; }
};

void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const std::size_t plane = g.out_plane();
  for (std::size_t ch = 0; ch < g.c; ++ch)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((ch * g.k + ky) * g.k + kx) * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.ow + ox] = inside ? image[(ch * g.h + iy) * g.w + ix] : 0.0;
          }
        }
      }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* image) {
  const std::size_t plane = g.out_plane();
  for (std::size_t ch = 0; ch < g.c; ++ch)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((ch * g.k + ky) * g.k + kx) * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            image[(ch * g.h + iy) * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + " tensor, got " +
                                to_string(t.shape()));
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  if (kernel == 0 || in + 2 * padding < kernel)
    throw std::invalid_argument("window of size " + std::to_string(kernel) + " does not fit extent " +
                                std::to_string(in) + " with padding " + std::to_string(padding));
  return (in + 2 * padding - kernel) / stride + 1;
}

Var conv2d(Tape& tape, Var input, Var kernels, Conv2dParams params) {
  const Tensor& x = tape.value(input);
  const Tensor& kt = tape.value(kernels);
  require_rank(x, 4, "conv2d input");
  require_rank(kt, 4, "conv2d kernels");
  if (kt.dim(1) != x.dim(1) || kt.dim(2) != kt.dim(3)) throw ShapeError("conv2d", x.shape(), kt.shape());

  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kt.dim(0), kt.dim(2), 0, 0, params.stride, params.padding};
  g.oh = conv_output_extent(g.h, g.k, g.stride, g.pad);
  g.ow = conv_output_extent(g.w, g.k, g.stride, g.pad);

  Tensor out({g.n, g.j, g.oh, g.ow});
  std::vector<double> cols(g.patch() * g.out_plane());
  const std::size_t in_image = g.c * g.h * g.w;
  const std::size_t out_image = g.j * g.out_plane();
  for (std::size_t i = 0; i < g.n; ++i) {
    im2col(x.ptr() + i * in_image, g, cols.data());
    gemm_nn_acc(g.j, g.out_plane(), g.patch(), kt.ptr(), cols.data(), out.ptr() + i * out_image);
  }
  tape.counters().conv_macs.push_back(static_cast<std::uint64_t>(g.n) * out_image * g.patch());

  return tape.record(std::move(out), {input, kernels},
                     [input, kernels, g](const Tape& t, const Tensor& dy, std::span<Tensor* const> grads) {
                       const Tensor& xv = t.value(input);
                       const Tensor& kv = t.value(kernels);
                       const std::size_t in_image = g.c * g.h * g.w;
                       const std::size_t out_image = g.j * g.out_plane();
                       std::vector<double> cols(g.patch() * g.out_plane());
                       std::vector<double> dcols(grads[0] ? cols.size() : 0);
                       for (std::size_t i = 0; i < g.n; ++i) {
                         const double* dyi = dy.ptr() + i * out_image;
                         if (grads[1]) {
                           im2col(xv.ptr() + i * in_image, g, cols.data());
                           gemm_nt_acc(g.j, g.patch(), g.out_plane(), dyi, cols.data(), grads[1]->ptr());
                         }
                         if (grads[0]) {
                           std::fill(dcols.begin(), dcols.end(), 0.0);
                           gemm_tn_acc(g.patch(), g.out_plane(), g.j, kv.ptr(), dyi, dcols.data());
                           col2im_add(dcols.data(), g, grads[0]->ptr() + i * in_image);
                         }
                       }
                     });
}

Var add_channel_bias(Tape& tape, Var input, Var bias) {
  const Tensor& x = tape.value(input);
  const Tensor& b = tape.value(bias);
  if (x.rank() < 2 || b.rank() != 1 || b.dim(0) != x.dim(1)) throw ShapeError("add_channel_bias", x.shape(), b.shape());
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  Tensor out = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* p = out.ptr() + (i * c + ch) * inner;
      for (std::size_t e = 0; e < inner; ++e) p[e] += b[ch];
    }
  return tape.record(std::move(out), {input, bias},
                     [n, c, inner](const Tape&, const Tensor& dy, std::span<Tensor* const> grads) {
                       if (grads[0])
                         for (std::size_t e = 0; e < dy.size(); ++e) (*grads[0])[e] += dy[e];
                       if (grads[1])
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             const double* p = dy.ptr() + (i * c + ch) * inner;
                             double s = 0.0;
                             for (std::size_t e = 0; e < inner; ++e) s += p[e];
                             (*grads[1])[ch] += s;
                           }
                     });
}

Var dense(Tape& tape, Var input, Var weights, Var bias) {
  const Tensor& x = tape.value(input);
  const Tensor& w = tape.value(weights);
  const Tensor& b = tape.value(bias);
  require_rank(x, 2, "dense input");
  require_rank(w, 2, "dense weights");
  if (x.dim(1) != w.dim(0)) throw ShapeError("dense", x.shape(), w.shape());
  if (b.rank() != 1 || b.dim(0) != w.dim(1)) throw ShapeError("dense bias", w.shape(), b.shape());
  const std::size_t n = x.dim(0), d = x.dim(1), k = w.dim(1);
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = b[j];
  gemm_nn_acc(n, k, d, x.ptr(), w.ptr(), out.ptr());
  return tape.record(std::move(out), {input, weights, bias},
                     [input, weights, n, d, k](const Tape& t, const Tensor& dy, std::span<Tensor* const> grads) {
                       if (grads[0]) gemm_nt_acc(n, d, k, dy.ptr(), t.value(weights).ptr(), grads[0]->ptr());
                       if (grads[1]) gemm_tn_acc(d, k, n, t.value(input).ptr(), dy.ptr(), grads[1]->ptr());
                       if (grads[2])
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < k; ++j) (*grads[2])[j] += dy[i * k + j];
                     });
}

Var relu(Tape& tape, Var input) {
  Tensor out = tape.value(input);
  double& margin = tape.counters().kink_margin;
  for (double& v : out.data()) {
    margin = std::min(margin, std::abs(v));
    v = v > 0.0 ? v : 0.0;
  }
  return tape.record(std::move(out), {input}, [input](const Tape& t, const Tensor& dy, std::span<Tensor* const> grads) {
    const Tensor& x = t.value(input);
    for (std::size_t e = 0; e < dy.size(); ++e)
      if (x[e] > 0.0) (*grads[0])[e] += dy[e];
  });
}

Var max_pool2d(Tape& tape, Var input, std::size_t window, std::size_t stride) {
  const Tensor& x = tape.value(input);
  require_rank(x, 4, "max_pool2d input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = conv_output_extent(h, window, stride, 0);
  const std::size_t ow = conv_output_extent(w, window, stride, 0);
  Tensor out({n, c, oh, ow});
  double& margin = tape.counters().kink_margin;
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = x.ptr() + plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * stride) * w + ox * stride;
        for (std::size_t wy = 0; wy < window; ++wy)
          for (std::size_t wx = 0; wx < window; ++wx) {
            const std::size_t idx = (oy * stride + wy) * w + ox * stride + wx;
            if (src[idx] > src[best]) best = idx;
          }
        double runner_up = -std::numeric_limits<double>::infinity();
        for (std::size_t wy = 0; wy < window; ++wy)
          for (std::size_t wx = 0; wx < window; ++wx) {
            const std::size_t idx = (oy * stride + wy) * w + ox * stride + wx;
            if (idx != best) runner_up = std::max(runner_up, src[idx]);
          }
        if (src[best] != 0.0 || runner_up != 0.0) margin = std::min(margin, src[best] - runner_up);
        const std::size_t o = (plane * oh + oy) * ow + ox;
        out[o] = src[best];
        (*argmax)[o] = plane * h * w + best;
      }
  }
  return tape.record(std::move(out), {input}, [argmax](const Tape&, const Tensor& dy, std::span<Tensor* const> grads) {
    for (std::size_t o = 0; o < dy.size(); ++o) (*grads[0])[(*argmax)[o]] += dy[o];
  });
}

Var flatten(Tape& tape, Var input) {
  const Tensor& x = tape.value(input);
  if (x.rank() < 1) throw std::invalid_argument("flatten: rank-0 tensor");
  const std::size_t n = x.dim(0);
  return tape.record(x.reshaped({n, x.size() / n}), {input},
                     [](const Tape&, const Tensor& dy, std::span<Tensor* const> grads) {
                       for (std::size_t e = 0; e < dy.size(); ++e) (*grads[0])[e] += dy[e];
                     });
}

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels) {
  const Tensor& z = tape.value(logits);
  require_rank(z, 2, "softmax_cross_entropy logits");
  const std::size_t n = z.dim(0), k = z.dim(1);
  if (labels.size() != n)
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " rows");
  auto probs = std::make_shared<std::vector<double>>(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0," + std::to_string(k) + ")");
    const double* row = z.ptr() + i * k;
    const double mx = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - lse);
    loss += lse - row[labels[i]];
  }
  std::vector<int> ls(labels.begin(), labels.end());
  return tape.record(Tensor({1}, {loss / static_cast<double>(n)}), {logits},
                     [probs, ls = std::move(ls), n, k](const Tape&, const Tensor& dy, std::span<Tensor* const> grads) {
                       const double scale = dy[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < k; ++j) {
                           const double target = static_cast<std::size_t>(ls[i]) == j ? 1.0 : 0.0;
                           (*grads[0])[i * k + j] += scale * ((*probs)[i * k + j] - target);
                         }
                     });
}

Var sum(Tape& tape, Var input) {
  double s = 0.0;
  for (double v : tape.value(input).data()) s += v;
  return tape.record(Tensor({1}, {s}), {input}, [](const Tape&, const Tensor& dy, std::span<Tensor* const> grads) {
    for (double& g : grads[0]->data()) g += dy[0];
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  if (x.shape() != y.shape()) throw ShapeError("add", x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t e = 0; e < out.size(); ++e) out[e] += y[e];
  return tape.record(std::move(out), {a, b}, [](const Tape&, const Tensor& dy, std::span<Tensor* const> grads) {
    for (Tensor* g : grads)
      if (g)
        for (std::size_t e = 0; e < dy.size(); ++e) (*g)[e] += dy[e];
  });
}

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  if (x.shape() != y.shape()) throw ShapeError("mul", x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t e = 0; e < out.size(); ++e) out[e] *= y[e];
  return tape.record(std::move(out), {a, b}, [a, b](const Tape& t, const Tensor& dy, std::span<Tensor* const> grads) {
    const Tensor& xv = t.value(a);
    const Tensor& yv = t.value(b);
    if (grads[0])
      for (std::size_t e = 0; e < dy.size(); ++e) (*grads[0])[e] += dy[e] * yv[e];
    if (grads[1])
      for (std::size_t e = 0; e < dy.size(); ++e) (*grads[1])[e] += dy[e] * xv[e];
  });
}

}  // namespace lvnet
