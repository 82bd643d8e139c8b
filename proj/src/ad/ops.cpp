// SPDX-License-Identifier: Apache-2.0
#include "mvgb/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace mvgb::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

[[noreturn]] void shape_error(const char *op, const Shape &a, const Shape &b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

[[noreturn]] void shape_error(const char *op, const Shape &a, const std::string &why) {
  throw ShapeError(std::string(op) + ": " + why + " for shape " + to_string(a));
}

Tape &tape_of(Var a, Var b) {
  if (&a.tape() != &b.tape())
    throw std::invalid_argument("operands recorded on different tapes");
  return a.tape();
}

/// b broadcasts against a when b's shape is a trailing suffix of a's shape.
void check_suffix(const char *op, const Shape &a, const Shape &b) {
  if (b.size() > a.size() || !std::equal(b.rbegin(), b.rend(), a.rbegin()))
    shape_error(op, a, b);
}

/// Elementwise op whose derivative is a function of the output y (or of the
/// input x when UsesInput is set); only that operand is kept for backward.
template <bool UsesInput, class Fwd, class Bwd>
Var unary(const char *op, Var x, Fwd fwd, Bwd derivative) {
  const Tensor &xv = x.value();
  Tensor y(xv.shape());
  const double *px = xv.data();
  double *py = y.data();
  for (std::size_t i = 0; i < xv.size(); ++i)
    py[i] = fwd(px[i]);
  Tensor saved;
  if (x.tape().requires_grad(x))
    saved = UsesInput ? xv : y;
  return x.tape().record(op, {x}, std::move(y),
                         [s = std::move(saved), derivative](const Tensor &g, GradSlots gin) {
                           double *gx = gin[0]->data();
                           const double *pg = g.data(), *ps = s.data();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             gx[i] += pg[i] * derivative(ps[i]);
                         });
}

std::size_t padding_before(std::size_t in, std::size_t out, std::size_t k, std::size_t s,
                           Padding pad) {
  if (pad == Padding::valid)
    return 0;
  std::size_t needed = (out - 1) * s + k;
  return needed > in ? (needed - in) / 2 : 0;
}

struct ConvGeometry {
  std::size_t n, h, w, c;
  std::size_t kh, kw;
  std::size_t sh, sw;
  std::size_t oh, ow;
  std::size_t pt, pl;
  std::size_t patch() const { return kh * kw * c; }
  std::size_t rows() const { return n * oh * ow; }
};

void im2col(const ConvGeometry &g, const double *x, double *col) {
  const std::size_t patch = g.patch();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oh = 0; oh < g.oh; ++oh)
      for (std::size_t ow = 0; ow < g.ow; ++ow) {
        double *row = col + ((n * g.oh + oh) * g.ow + ow) * patch;
        for (std::size_t i = 0; i < g.kh; ++i) {
          const long ih = static_cast<long>(oh * g.sh + i) - static_cast<long>(g.pt);
          for (std::size_t j = 0; j < g.kw; ++j) {
            const long iw = static_cast<long>(ow * g.sw + j) - static_cast<long>(g.pl);
            double *dst = row + (i * g.kw + j) * g.c;
            if (ih < 0 || iw < 0 || ih >= static_cast<long>(g.h) || iw >= static_cast<long>(g.w)) {
              std::fill(dst, dst + g.c, 0.0);
            } else if (g.c == 1) {
              *dst = x[(n * g.h + ih) * g.w + iw];
            } else {
              const double *src = x + ((n * g.h + ih) * g.w + iw) * g.c;
              std::copy(src, src + g.c, dst);
            }
          }
        }
      }
}

void col2im(const ConvGeometry &g, const double *col, double *dx) {
  const std::size_t patch = g.patch();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oh = 0; oh < g.oh; ++oh)
      for (std::size_t ow = 0; ow < g.ow; ++ow) {
        const double *row = col + ((n * g.oh + oh) * g.ow + ow) * patch;
        for (std::size_t i = 0; i < g.kh; ++i) {
          const long ih = static_cast<long>(oh * g.sh + i) - static_cast<long>(g.pt);
          if (ih < 0 || ih >= static_cast<long>(g.h))
            continue;
          for (std::size_t j = 0; j < g.kw; ++j) {
            const long iw = static_cast<long>(ow * g.sw + j) - static_cast<long>(g.pl);
            if (iw < 0 || iw >= static_cast<long>(g.w))
              continue;
            const double *src = row + (i * g.kw + j) * g.c;
            double *dst = dx + ((n * g.h + ih) * g.w + iw) * g.c;
            for (std::size_t c = 0; c < g.c; ++c)
              dst[c] += src[c];
          }
        }
      }
}

} // namespace

std::size_t window_output(std::size_t in, std::size_t kernel, std::size_t stride, Padding pad,
                          const char *op) {
  if (stride == 0)
    throw ShapeError(std::string(op) + ": stride must be positive");
  if (kernel == 0)
    throw ShapeError(std::string(op) + ": kernel extent must be positive");
  if (pad == Padding::same)
    return (in + stride - 1) / stride;
  if (kernel > in)
    throw ShapeError(std::string(op) + ": kernel " + std::to_string(kernel) +
                     " exceeds input extent " + std::to_string(in));
  return (in - kernel) / stride + 1;
}

// ---------------------------------------------------------------- elementwise

namespace {

// Visits (i, i mod nb) for i < n without a division per element.
template <class F> void broadcast_loop(std::size_t n, std::size_t nb, F &&f) {
  for (std::size_t base = 0; base < n; base += nb)
    for (std::size_t j = 0; j < nb; ++j)
      f(base + j, j);
}

} // namespace

Var add(Var a, Var b) {
  Tape &tape = tape_of(a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  check_suffix("add", av.shape(), bv.shape());
  const std::size_t nb = bv.size();
  Tensor y(av.shape());
  const double *pa = av.data(), *pb = bv.data();
  double *py = y.data();
  broadcast_loop(av.size(), nb, [&](std::size_t i, std::size_t j) { py[i] = pa[i] + pb[j]; });
  return tape.record("add", {a, b}, std::move(y), [nb](const Tensor &g, GradSlots gin) {
    if (gin[0])
      *gin[0] += g;
    if (gin[1]) {
      double *d = gin[1]->data();
      const double *pg = g.data();
      broadcast_loop(g.size(), nb, [&](std::size_t i, std::size_t j) { d[j] += pg[i]; });
    }
  });
}

Var sub(Var a, Var b) {
  Tape &tape = tape_of(a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  check_suffix("sub", av.shape(), bv.shape());
  const std::size_t nb = bv.size();
  Tensor y(av.shape());
  const double *pa = av.data(), *pb = bv.data();
  double *py = y.data();
  broadcast_loop(av.size(), nb, [&](std::size_t i, std::size_t j) { py[i] = pa[i] - pb[j]; });
  return tape.record("sub", {a, b}, std::move(y), [nb](const Tensor &g, GradSlots gin) {
    if (gin[0])
      *gin[0] += g;
    if (gin[1]) {
      double *d = gin[1]->data();
      const double *pg = g.data();
      broadcast_loop(g.size(), nb, [&](std::size_t i, std::size_t j) { d[j] -= pg[i]; });
    }
  });
}

Var mul(Var a, Var b) {
  Tape &tape = tape_of(a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  check_suffix("mul", av.shape(), bv.shape());
  const std::size_t nb = bv.size();
  Tensor y(av.shape());
  const double *pa = av.data(), *pb = bv.data();
  double *py = y.data();
  broadcast_loop(av.size(), nb, [&](std::size_t i, std::size_t j) { py[i] = pa[i] * pb[j]; });
  bool need = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record("mul", {a, b}, std::move(y),
                     [nb, sa = need ? av : Tensor(), sb = need ? bv : Tensor()](const Tensor &g,
                                                                              GradSlots gin) {
                       const double *pg = g.data();
                       if (gin[0]) {
                         double *d = gin[0]->data();
                         const double *pb = sb.data();
                         broadcast_loop(g.size(), nb, [&](std::size_t i, std::size_t j) {
                           d[i] += pg[i] * pb[j];
                         });
                       }
                       if (gin[1]) {
                         double *d = gin[1]->data();
                         const double *pa = sa.data();
                         broadcast_loop(g.size(), nb, [&](std::size_t i, std::size_t j) {
                           d[j] += pg[i] * pa[i];
                         });
                       }
                     });
}

Var scale(Var a, double factor) {
  const Tensor &av = a.value();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i)
    y[i] = av[i] * factor;
  return a.tape().record("scale", {a}, std::move(y), [factor](const Tensor &g, GradSlots gin) {
    Tensor &gx = *gin[0];
    for (std::size_t i = 0; i < g.size(); ++i)
      gx[i] += g[i] * factor;
  });
}

Var relu(Var x) {
  return unary<false>(
      "relu", x, [](double v) { return v < 0.0 ? 0.0 : v; }, // NaN passes through
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary<false>(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0)
          return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary<false>(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var exp(Var x) {
  return unary<false>(
      "exp", x, [](double v) { return std::exp(v); }, [](double y) { return y; });
}

Var log(Var x) {
  return unary<true>(
      "log", x, [](double v) { return std::log(v); }, [](double xv) { return 1.0 / xv; });
}

// --------------------------------------------------------------------- matmul

Var matmul(Var a, Var b) {
  Tape &tape = tape_of(a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  const Shape &as = av.shape();
  const Shape &bs = bv.shape();
  const bool need = tape.requires_grad(a) || tape.requires_grad(b);

  if (bs.size() == 2 && !as.empty() && as.back() == bs[0]) {
    const std::size_t k = bs[0], n = bs[1], m = av.size() / k;
    Shape out_shape(as.begin(), as.end() - 1);
    out_shape.push_back(n);
    Tensor y(out_shape);
    MatMap(y.data(), m, n).noalias() = ConstMatMap(av.data(), m, k) * ConstMatMap(bv.data(), k, n);
    return tape.record("matmul", {a, b}, std::move(y),
                       [m, k, n, sa = need ? av : Tensor(),
                        sb = need ? bv : Tensor()](const Tensor &g, GradSlots gin) {
                         ConstMatMap G(g.data(), m, n);
                         if (gin[0])
                           MatMap(gin[0]->data(), m, k).noalias() +=
                               G * ConstMatMap(sb.data(), k, n).transpose();
                         if (gin[1])
                           MatMap(gin[1]->data(), k, n).noalias() +=
                               ConstMatMap(sa.data(), m, k).transpose() * G;
                       });
  }

  if (as.size() == 3 && bs.size() == 3 && as[0] == bs[0] && as[2] == bs[1]) {
    const std::size_t batch = as[0], m = as[1], k = as[2], n = bs[2];
    Tensor y(Shape{batch, m, n});
    for (std::size_t i = 0; i < batch; ++i)
      MatMap(y.data() + i * m * n, m, n).noalias() =
          ConstMatMap(av.data() + i * m * k, m, k) * ConstMatMap(bv.data() + i * k * n, k, n);
    return tape.record(
        "matmul", {a, b}, std::move(y),
        [batch, m, k, n, sa = need ? av : Tensor(), sb = need ? bv : Tensor()](const Tensor &g,
                                                                             GradSlots gin) {
          for (std::size_t i = 0; i < batch; ++i) {
            ConstMatMap G(g.data() + i * m * n, m, n);
            if (gin[0])
              MatMap(gin[0]->data() + i * m * k, m, k).noalias() +=
                  G * ConstMatMap(sb.data() + i * k * n, k, n).transpose();
            if (gin[1])
              MatMap(gin[1]->data() + i * k * n, k, n).noalias() +=
                  ConstMatMap(sa.data() + i * m * k, m, k).transpose() * G;
          }
        });
  }
  shape_error("matmul", as, bs);
}

// -------------------------------------------------------------- conv and pool

Var conv2d(Var x, Var kernel, Extent2 stride, Padding pad) {
  Tape &tape = tape_of(x, kernel);
  const Tensor &xv = x.value();
  const Tensor &kv = kernel.value();
  const Shape &xs = xv.shape();
  const Shape &ks = kv.shape();
  if (xs.size() != 4 || ks.size() != 4 || ks[2] != xs[3])
    shape_error("conv2d", xs, ks);

  ConvGeometry geo{};
  geo.n = xs[0];
  geo.h = xs[1];
  geo.w = xs[2];
  geo.c = xs[3];
  geo.kh = ks[0];
  geo.kw = ks[1];
  geo.sh = stride.rows;
  geo.sw = stride.cols;
  geo.oh = window_output(geo.h, geo.kh, geo.sh, pad, "conv2d");
  geo.ow = window_output(geo.w, geo.kw, geo.sw, pad, "conv2d");
  geo.pt = padding_before(geo.h, geo.oh, geo.kh, geo.sh, pad);
  geo.pl = padding_before(geo.w, geo.ow, geo.kw, geo.sw, pad);
  const std::size_t out_c = ks[3];

  std::vector<double> col(geo.rows() * geo.patch());
  im2col(geo, xv.data(), col.data());
  Tensor y(Shape{geo.n, geo.oh, geo.ow, out_c});
  MatMap(y.data(), geo.rows(), out_c).noalias() =
      ConstMatMap(col.data(), geo.rows(), geo.patch()) *
      ConstMatMap(kv.data(), geo.patch(), out_c);

  const bool need = tape.requires_grad(x) || tape.requires_grad(kernel);
  if (!need)
    col.clear();
  return tape.record("conv2d", {x, kernel}, std::move(y),
                     [geo, out_c, col = std::move(col),
                      sk = need ? kv : Tensor()](const Tensor &g, GradSlots gin) {
                       ConstMatMap G(g.data(), geo.rows(), out_c);
                       if (gin[1])
                         MatMap(gin[1]->data(), geo.patch(), out_c).noalias() +=
                             ConstMatMap(col.data(), geo.rows(), geo.patch()).transpose() * G;
                       if (gin[0]) {
                         RowMat dcol = G * ConstMatMap(sk.data(), geo.patch(), out_c).transpose();
                         col2im(geo, dcol.data(), gin[0]->data());
                       }
                     });
}

Var maxpool2d(Var x, Extent2 kernel, Extent2 stride, Padding pad) {
  const Tensor &xv = x.value();
  const Shape &xs = xv.shape();
  if (xs.size() != 4)
    shape_error("maxpool2d", xs, "expected rank-4 NHWC input");
  const std::size_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const std::size_t oh = window_output(h, kernel.rows, stride.rows, pad, "maxpool2d");
  const std::size_t ow = window_output(w, kernel.cols, stride.cols, pad, "maxpool2d");
  const std::size_t pt = padding_before(h, oh, kernel.rows, stride.rows, pad);
  const std::size_t pl = padding_before(w, ow, kernel.cols, stride.cols, pad);

  Tensor y(Shape{n, oh, ow, c});
  std::vector<std::size_t> arg(y.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (std::size_t ch = 0; ch < c; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t di = 0; di < kernel.rows; ++di) {
            const long ih = static_cast<long>(i * stride.rows + di) - static_cast<long>(pt);
            if (ih < 0 || ih >= static_cast<long>(h))
              continue;
            for (std::size_t dj = 0; dj < kernel.cols; ++dj) {
              const long iw = static_cast<long>(j * stride.cols + dj) - static_cast<long>(pl);
              if (iw < 0 || iw >= static_cast<long>(w))
                continue;
              const std::size_t idx = ((b * h + ih) * w + iw) * c + ch;
              if (xv[idx] > best || std::isnan(xv[idx])) {
                best = xv[idx];
                best_idx = idx;
              }
            }
          }
          const std::size_t o = ((b * oh + i) * ow + j) * c + ch;
          y[o] = best;
          arg[o] = best_idx;
        }
  return x.tape().record("maxpool2d", {x}, std::move(y),
                         [arg = std::move(arg)](const Tensor &g, GradSlots gin) {
                           Tensor &gx = *gin[0];
                           for (std::size_t o = 0; o < g.size(); ++o)
                             gx[arg[o]] += g[o];
                         });
}

// ----------------------------------------------------------------- reductions

Var sum(Var x) {
  const Tensor &xv = x.value();
  double s = 0.0;
  for (double v : xv.values())
    s += v;
  return x.tape().record("sum", {x}, Tensor::scalar(s), [](const Tensor &g, GradSlots gin) {
    const double gv = g[0];
    for (double &v : gin[0]->values())
      v += gv;
  });
}

Var mean(Var x) {
  const Tensor &xv = x.value();
  const double n = static_cast<double>(xv.size());
  double s = 0.0;
  for (double v : xv.values())
    s += v;
  return x.tape().record("mean", {x}, Tensor::scalar(s / n), [n](const Tensor &g, GradSlots gin) {
    const double gv = g[0] / n;
    for (double &v : gin[0]->values())
      v += gv;
  });
}

// ---------------------------------------------------------- layout transforms

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty())
    throw ShapeError("concat: no inputs");
  Tape &tape = parts[0].tape();
  const Shape &first = parts[0].shape();
  if (first.empty())
    shape_error("concat", first, "cannot concatenate scalars");
  Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var &p : parts) {
    tape_of(parts[0], p);
    const Shape &s = p.shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin()))
      shape_error("concat", first, s);
    widths.push_back(s.back());
    total += s.back();
  }
  const std::size_t rows = shape_size(lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor y(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor &v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data() + r * widths[p], widths[p], y.data() + r * total + offset);
    offset += widths[p];
  }
  return tape.record("concat", parts, std::move(y),
                     [rows, total, widths](const Tensor &g, GradSlots gin) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         if (gin[p])
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double *src = g.data() + r * total + off;
                             double *dst = gin[p]->data() + r * widths[p];
                             for (std::size_t i = 0; i < widths[p]; ++i)
                               dst[i] += src[i];
                           }
                         off += widths[p];
                       }
                     });
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  const Tensor &xv = x.value();
  const Shape &xs = xv.shape();
  if (axis >= xs.size() || length == 0 || start + length > xs[axis])
    shape_error("slice", xs,
                "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                    ") on axis " + std::to_string(axis) + " out of bounds");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i)
    outer *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i)
    inner *= xs[i];
  const std::size_t extent = xs[axis];
  Shape out_shape = xs;
  out_shape[axis] = length;
  Tensor y(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.data() + (o * extent + start) * inner, length * inner,
                y.data() + o * length * inner);
  return x.tape().record(
      "slice", {x}, std::move(y),
      [outer, inner, extent, start, length](const Tensor &g, GradSlots gin) {
        for (std::size_t o = 0; o < outer; ++o) {
          const double *src = g.data() + o * length * inner;
          double *dst = gin[0]->data() + (o * extent + start) * inner;
          for (std::size_t i = 0; i < length * inner; ++i)
            dst[i] += src[i];
        }
      });
}

Var stack(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty())
    throw ShapeError("stack: no inputs");
  const Shape &s = parts[0].shape();
  if (axis > s.size())
    shape_error("stack", s, "axis " + std::to_string(axis) + " out of range");
  for (const Var &p : parts) {
    tape_of(parts[0], p);
    if (p.shape() != s)
      shape_error("stack", s, p.shape());
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i)
    outer *= s[i];
  for (std::size_t i = axis; i < s.size(); ++i)
    inner *= s[i];
  const std::size_t count = parts.size();
  Shape out_shape = s;
  out_shape.insert(out_shape.begin() + static_cast<long>(axis), count);
  Tensor y(out_shape);
  for (std::size_t p = 0; p < count; ++p) {
    const Tensor &v = parts[p].value();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * inner, inner, y.data() + (o * count + p) * inner);
  }
  return parts[0].tape().record("stack", parts, std::move(y),
                                [outer, inner, count](const Tensor &g, GradSlots gin) {
                                  for (std::size_t p = 0; p < count; ++p) {
                                    if (!gin[p])
                                      continue;
                                    for (std::size_t o = 0; o < outer; ++o) {
                                      const double *src = g.data() + (o * count + p) * inner;
                                      double *dst = gin[p]->data() + o * inner;
                                      for (std::size_t i = 0; i < inner; ++i)
                                        dst[i] += src[i];
                                    }
                                  }
                                });
}

Var reshape(Var x, Shape shape) {
  const Tensor &xv = x.value();
  if (shape_size(shape) != xv.size())
    shape_error("reshape", xv.shape(), shape);
  return x.tape().record("reshape", {x}, xv.reshaped(std::move(shape)),
                         [](const Tensor &g, GradSlots gin) {
                           double *dst = gin[0]->data();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             dst[i] += g[i];
                         });
}

Var transpose(Var x) {
  const Tensor &xv = x.value();
  const Shape &xs = xv.shape();
  if (xs.size() < 2)
    shape_error("transpose", xs, "needs rank >= 2");
  const std::size_t r = xs[xs.size() - 2], c = xs.back(), batch = xv.size() / (r * c);
  Shape out_shape = xs;
  std::swap(out_shape[xs.size() - 2], out_shape.back());
  Tensor y(out_shape);
  for (std::size_t b = 0; b < batch; ++b)
    MatMap(y.data() + b * r * c, c, r) = ConstMatMap(xv.data() + b * r * c, r, c).transpose();
  return x.tape().record("transpose", {x}, std::move(y),
                         [batch, r, c](const Tensor &g, GradSlots gin) {
                           for (std::size_t b = 0; b < batch; ++b)
                             MatMap(gin[0]->data() + b * r * c, r, c) +=
                                 ConstMatMap(g.data() + b * r * c, c, r).transpose();
                         });
}

// -------------------------------------------------------------------- softmax

Tensor softmax_rows(const Tensor &logits) {
  if (logits.rank() == 0)
    throw ShapeError("softmax: scalar input");
  const std::size_t c = logits.shape().back();
  const std::size_t rows = logits.size() / c;
  Tensor y(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double *z = logits.data() + r * c;
    double *p = y.data() + r * c;
    const double zmax = *std::max_element(z, z + c);
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      p[i] = std::exp(z[i] - zmax);
      total += p[i];
    }
    for (std::size_t i = 0; i < c; ++i)
      p[i] /= total;
  }
  return y;
}

Var softmax(Var x) {
  Tensor y = softmax_rows(x.value());
  const std::size_t c = y.shape().back();
  Tensor saved = x.tape().requires_grad(x) ? y : Tensor();
  return x.tape().record("softmax", {x}, std::move(y),
                         [c, sy = std::move(saved)](const Tensor &g, GradSlots gin) {
                           const std::size_t rows = g.size() / c;
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double *gy = g.data() + r * c;
                             const double *p = sy.data() + r * c;
                             double dot = 0.0;
                             for (std::size_t i = 0; i < c; ++i)
                               dot += gy[i] * p[i];
                             double *gx = gin[0]->data() + r * c;
                             for (std::size_t i = 0; i < c; ++i)
                               gx[i] += p[i] * (gy[i] - dot);
                           }
                         });
}

Var softmax_cross_entropy(Var logits, const Tensor &labels) {
  const Tensor &z = logits.value();
  if (z.rank() != 2 || labels.shape() != z.shape())
    shape_error("softmax_cross_entropy", z.shape(), labels.shape());
  const std::size_t m = z.dim(0), c = z.dim(1);
  Tensor p = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double *zr = z.data() + r * c;
    const double zmax = *std::max_element(zr, zr + c);
    double lse = 0.0;
    for (std::size_t i = 0; i < c; ++i)
      lse += std::exp(zr[i] - zmax);
    lse = zmax + std::log(lse);
    for (std::size_t i = 0; i < c; ++i)
      loss -= labels[r * c + i] * (zr[i] - lse);
  }
  loss /= static_cast<double>(m);
  return logits.tape().record(
      "softmax_cross_entropy", {logits}, Tensor::scalar(loss),
      [m, c, p = std::move(p), labels](const Tensor &g, GradSlots gin) {
        const double scale = g[0] / static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r) {
          double mass = 0.0;
          for (std::size_t i = 0; i < c; ++i)
            mass += labels[r * c + i];
          for (std::size_t i = 0; i < c; ++i)
            (*gin[0])[r * c + i] += scale * (p[r * c + i] * mass - labels[r * c + i]);
        }
      });
}

// ------------------------------------------------------ dropout and batchnorm

Var dropout(Var x, double rate, bool train, Rng &rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!train || rate == 0.0)
    return x;
  const Tensor &xv = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(xv.shape());
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = keep(rng) ? keep_scale : 0.0;
    y[i] = xv[i] * mask[i];
  }
  return x.tape().record("dropout", {x}, std::move(y),
                         [mask = std::move(mask)](const Tensor &g, GradSlots gin) {
                           for (std::size_t i = 0; i < g.size(); ++i)
                             (*gin[0])[i] += g[i] * mask[i];
                         });
}

Var batchnorm(Var x, Var gamma, Var beta, Tensor &running_mean, Tensor &running_var, bool train,
              double momentum, double eps) {
  Tape &tape = tape_of(x, gamma);
  tape_of(x, beta);
  const Tensor &xv = x.value();
  const Shape &xs = xv.shape();
  if (xs.empty())
    shape_error("batchnorm", xs, "needs a channel axis");
  const std::size_t c = xs.back();
  const Shape channel{c};
  if (gamma.shape() != channel || beta.shape() != channel || running_mean.shape() != channel ||
      running_var.shape() != channel)
    shape_error("batchnorm", xs, gamma.shape());
  const std::size_t m = xv.size() / c;
  const Tensor &gv = gamma.value();
  const Tensor &bv = beta.value();

  std::vector<double> mu(c, 0.0), inv_std(c, 0.0);
  if (train) {
    std::vector<double> var(c, 0.0);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t k = 0; k < c; ++k)
        mu[k] += xv[r * c + k];
    for (auto &v : mu)
      v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = xv[r * c + k] - mu[k];
        var[k] += d * d;
      }
    for (std::size_t k = 0; k < c; ++k) {
      var[k] /= static_cast<double>(m);
      inv_std[k] = 1.0 / std::sqrt(var[k] + eps);
      running_mean[k] = momentum * running_mean[k] + (1.0 - momentum) * mu[k];
      running_var[k] = momentum * running_var[k] + (1.0 - momentum) * var[k];
    }
  } else {
    for (std::size_t k = 0; k < c; ++k) {
      mu[k] = running_mean[k];
      inv_std[k] = 1.0 / std::sqrt(running_var[k] + eps);
    }
  }

  Tensor xhat(xs);
  Tensor y(xs);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = r * c + k;
      xhat[i] = (xv[i] - mu[k]) * inv_std[k];
      y[i] = gv[k] * xhat[i] + bv[k];
    }

  return tape.record(
      "batchnorm", {x, gamma, beta}, std::move(y),
      [m, c, train, inv_std = std::move(inv_std), xhat = std::move(xhat),
       gcopy = gv](const Tensor &g, GradSlots gin) {
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t k = 0; k < c; ++k) {
            sum_g[k] += g[r * c + k];
            sum_gx[k] += g[r * c + k] * xhat[r * c + k];
          }
        if (gin[1])
          for (std::size_t k = 0; k < c; ++k)
            (*gin[1])[k] += sum_gx[k];
        if (gin[2])
          for (std::size_t k = 0; k < c; ++k)
            (*gin[2])[k] += sum_g[k];
        if (!gin[0])
          return;
        Tensor &gx = *gin[0];
        const double md = static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t k = 0; k < c; ++k) {
            const std::size_t i = r * c + k;
            if (train)
              gx[i] += gcopy[k] * inv_std[k] / md *
                       (md * g[i] - sum_g[k] - xhat[i] * sum_gx[k]);
            else
              gx[i] += gcopy[k] * inv_std[k] * g[i];
          }
      });
}

} // namespace mvgb::ad
