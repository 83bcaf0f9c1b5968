// Copyright 2026 The SynergyNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "synergy/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"
#include "synergy/errors.hpp"

namespace synergy {

namespace {

using Slots = std::span<std::vector<double>* const>;

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Output shape of a broadcasting binary op; throws on unsupported pairs.
Shape broadcast_shape(const char* op, const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa == sb) return sa;
  if (b.numel() == 1) return sa;
  if (a.numel() == 1) return sb;
  if (is_suffix(sb, sa)) return sa;
  if (is_suffix(sa, sb)) return sb;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " + shape_str(sb));
}

template <typename Fwd, typename Bwd>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  Shape out_shape = broadcast_shape(name, a, b);
  const std::size_t n = shape_numel(out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  std::vector<double> out(n);
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(da[i % na], db[i % nb]);
  ImplPtr ia = a.impl();
  ImplPtr ib = b.impl();
  return make_op(name, std::move(out_shape), std::move(out), {a, b},
                 [ia, ib, na, nb, bwd](const TensorImpl& o, Slots g) {
                   const auto& go = o.grad;
                   for (std::size_t i = 0; i < go.size(); ++i) {
                     const double x = ia->data[i % na];
                     const double y = ib->data[i % nb];
                     double dx = 0.0;
                     double dy = 0.0;
                     bwd(x, y, o.data[i], dx, dy);
                     if (g[0]) (*g[0])[i % na] += go[i] * dx;
                     if (g[1]) (*g[1])[i % nb] += go[i] * dy;
                   }
                 });
}

// Unary op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) out[i] = fwd(dx[i]);
  ImplPtr ix = x.impl();
  return make_op(name, x.shape(), std::move(out), {x}, [ix, deriv](const TensorImpl& o, Slots g) {
    auto& gx = *g[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * deriv(ix->data[i], o.data[i]);
  });
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= s[i];
  return n;
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double, double, double& dx, double& dy) { dx = 1.0; dy = 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double, double, double& dx, double& dy) { dx = 1.0; dy = -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double x, double y, double, double& dx, double& dy) { dx = y; dy = x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary("div", a, b, [](double x, double y) { return x / y; },
                [](double, double y, double z, double& dx, double& dy) {
                  dx = 1.0 / y;
                  dy = -z / y;
                });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double factor) {
  return unary("scale", x, [factor](double v) { return factor * v; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary("add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  // NaN passes through so non-finite activations stay visible downstream.
  return unary("relu", x, [](double v) { return v > 0.0 || std::isnan(v) ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double s) { return s * (1.0 - s); });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double e) { return e; });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary("sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double r) { return 0.5 / r; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_op("sum", {}, {acc}, {x}, [](const TensorImpl& o, Slots g) {
    for (auto& v : *g[0]) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const auto n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_op("mean", {}, {acc / n}, {x}, [n](const TensorImpl& o, Slots g) {
    for (auto& v : *g[0]) v += o.grad[0] / n;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op("reshape", std::move(shape), std::move(out), {x}, [](const TensorImpl& o, Slots g) {
    auto& gx = *g[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("transpose: rank >= 2 required, got " + shape_str(x.shape()));
  const Shape& s = x.shape();
  const std::size_t r = s[s.size() - 2];
  const std::size_t c = s[s.size() - 1];
  const std::size_t batch = x.numel() / (r * c);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  std::vector<double> out(x.numel());
  const auto d = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = d[b * r * c + i * c + j];
    }
  }
  return make_op("transpose", std::move(out_shape), std::move(out), {x},
                 [batch, r, c](const TensorImpl& o, Slots g) {
                   auto& gx = *g[0];
                   for (std::size_t b = 0; b < batch; ++b) {
                     for (std::size_t i = 0; i < r; ++i) {
                       for (std::size_t j = 0; j < c; ++j) gx[b * r * c + i * c + j] += o.grad[b * r * c + j * r + i];
                     }
                   }
                 });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || start + length > s[axis] || length == 0) {
    throw DimensionError("slice: axis " + std::to_string(axis) + " range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") invalid for " + shape_str(s));
  }
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t inner = prod(s, axis + 1, s.size());
  const std::size_t extent = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  std::vector<double> out(outer * length * inner);
  const auto d = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(d.begin() + static_cast<long>((o * extent + start) * inner), length * inner,
                out.begin() + static_cast<long>(o * length * inner));
  }
  return make_op("slice", std::move(out_shape), std::move(out), {x},
                 [outer, inner, extent, start, length](const TensorImpl& out_node, Slots g) {
                   auto& gx = *g[0];
                   for (std::size_t o = 0; o < outer; ++o) {
                     for (std::size_t i = 0; i < length * inner; ++i) {
                       gx[(o * extent + start) * inner + i] += out_node.grad[o * length * inner + i];
                     }
                   }
                 });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range for " + shape_str(s0));
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == s0[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(s0));
    extents.push_back(s[axis]);
    total += s[axis];
  }
  const std::size_t outer = prod(s0, 0, axis);
  const std::size_t inner = prod(s0, axis + 1, s0.size());
  Shape out_shape = s0;
  out_shape[axis] = total;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto d = parts[p].data();
    const std::size_t len = extents[p] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(d.begin() + static_cast<long>(o * len), len,
                  out.begin() + static_cast<long>(o * total * inner + offset * inner));
    }
    offset += extents[p];
  }
  return make_op("concat", std::move(out_shape), std::move(out), parts,
                 [outer, inner, total, extents](const TensorImpl& o_node, Slots g) {
                   std::size_t off = 0;
                   for (std::size_t p = 0; p < extents.size(); ++p) {
                     const std::size_t len = extents[p] * inner;
                     if (g[p]) {
                       auto& gp = *g[p];
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t i = 0; i < len; ++i) gp[o * len + i] += o_node.grad[o * total * inner + off * inner + i];
                       }
                     }
                     off += extents[p];
                   }
                 });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank("gather_rows", table, 2);
  const std::size_t rows = table.dim(0);
  const std::size_t cols = table.dim(1);
  std::vector<double> out(indices.size() * cols);
  const auto d = table.data();
  for (std::size_t n = 0; n < indices.size(); ++n) {
    if (indices[n] >= rows) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[n]) + " out of range for " +
                           shape_str(table.shape()));
    }
    std::copy_n(d.begin() + static_cast<long>(indices[n] * cols), cols, out.begin() + static_cast<long>(n * cols));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_op("gather_rows", {indices.size(), cols}, std::move(out), {table},
                 [idx = std::move(idx), cols](const TensorImpl& o, Slots g) {
                   auto& gt = *g[0];
                   for (std::size_t n = 0; n < idx.size(); ++n) {
                     for (std::size_t c = 0; c < cols; ++c) gt[idx[n] * cols + c] += o.grad[n * cols + c];
                   }
                 });
}

Tensor stop_gradient(const Tensor& x) { return x.detach(); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto mismatch = [&] {
    return DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  };
  std::size_t batch = 1;
  bool shared_rhs = false;
  if (a.rank() == 2 && b.rank() == 2) {
  } else if (a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0)) {
    batch = a.dim(0);
  } else if (a.rank() == 3 && b.rank() == 2) {
    batch = a.dim(0);
    shared_rhs = true;
  } else {
    throw mismatch();
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  if (k != kb) throw mismatch();

  Shape out_shape = a.rank() == 2 ? Shape{m, n} : Shape{batch, m, n};
  std::vector<double> out(batch * m * n, 0.0);
  const double* da = a.data().data();
  const double* db = b.data().data();
  const std::size_t b_stride = shared_rhs ? 0 : k * n;
  for (std::size_t t = 0; t < batch; ++t) {
    detail::gemm_nn(m, n, k, da + t * m * k, db + t * b_stride, out.data() + t * m * n);
  }
  ImplPtr ia = a.impl();
  ImplPtr ib = b.impl();
  return make_op("matmul", std::move(out_shape), std::move(out), {a, b},
                 [ia, ib, batch, m, k, n, b_stride](const TensorImpl& o, Slots g) {
                   const double* go = o.grad.data();
                   for (std::size_t t = 0; t < batch; ++t) {
                     if (g[0]) {  // grad_a = grad_out * b^T
                       detail::gemm_nt(m, k, n, go + t * m * n, ib->data.data() + t * b_stride,
                                       g[0]->data() + t * m * k);
                     }
                     if (g[1]) {  // grad_b = a^T * grad_out
                       detail::gemm_tn(k, n, m, ia->data.data() + t * m * k, go + t * m * n,
                                       g[1]->data() + t * b_stride);
                     }
                   }
                 });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("softmax: axis out of range for " + shape_str(s));
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t len = s[axis];
  const std::size_t inner = prod(s, axis + 1, s.size());
  std::vector<double> out(x.numel());
  const auto d = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, d[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(d[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= z;
    }
  }
  return make_op("softmax", s, std::move(out), {x}, [outer, len, inner](const TensorImpl& o, Slots g) {
    auto& gx = *g[0];
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = a * len * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) dot += o.grad[base + j * inner] * o.data[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t at = base + j * inner;
          gx[at] += o.data[at] * (o.grad[at] - dot);
        }
      }
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t out_channels, kh, kw;
  std::size_t stride, pad;
  std::size_t out_h, out_w;
  std::size_t patch() const { return channels * kh * kw; }
  std::size_t pixels() const { return out_h * out_w; }
};

// col[(c*kh + i)*kw + j][oy*out_w + ox] = x[c][oy*s - p + i][ox*s - p + j]
void im2col(const ConvGeometry& g, const double* x, double* col) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = col + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long xx = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            const bool inside = y >= 0 && y < static_cast<long>(g.height) && xx >= 0 && xx < static_cast<long>(g.width);
            row[oy * g.out_w + ox] = inside ? x[(c * g.height + static_cast<std::size_t>(y)) * g.width + static_cast<std::size_t>(xx)] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* x) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = col + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          if (y < 0 || y >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long xx = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            if (xx < 0 || xx >= static_cast<long>(g.width)) continue;
            x[(c * g.height + static_cast<std::size_t>(y)) * g.width + static_cast<std::size_t>(xx)] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank("conv2d input", input, 4);
  require_rank("conv2d kernel", kernel, 4);
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0), kernel.dim(2),
                 kernel.dim(3), stride, padding, 0, 0};
  if (kernel.dim(1) != g.channels || stride == 0 || g.height + 2 * padding < g.kh ||
      g.width + 2 * padding < g.kw) {
    throw DimensionError("conv2d: input " + shape_str(input.shape()) + " incompatible with kernel " +
                         shape_str(kernel.shape()) + " (stride " + std::to_string(stride) + ", padding " +
                         std::to_string(padding) + ")");
  }
  if (bias.defined() && bias.numel() != g.out_channels) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " for " + std::to_string(g.out_channels) +
                         " output channels");
  }
  g.out_h = (g.height + 2 * padding - g.kh) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kw) / stride + 1;

  const std::size_t in_size = g.channels * g.height * g.width;
  const std::size_t out_size = g.out_channels * g.pixels();
  std::vector<double> out(g.batch * out_size, 0.0);
  std::vector<double> col(g.patch() * g.pixels());
  const double* dx = input.data().data();
  const double* dw = kernel.data().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    im2col(g, dx + b * in_size, col.data());
    double* ob = out.data() + b * out_size;
    if (bias.defined()) {
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) std::fill_n(ob + oc * g.pixels(), g.pixels(), bias.data()[oc]);
    }
    detail::gemm_nn(g.out_channels, g.pixels(), g.patch(), dw, col.data(), ob);
  }

  std::vector<Tensor> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  ImplPtr ix = input.impl();
  ImplPtr iw = kernel.impl();
  return make_op("conv2d", {g.batch, g.out_channels, g.out_h, g.out_w}, std::move(out), std::move(inputs),
                 [ix, iw, g, in_size, out_size](const TensorImpl& o, Slots grads) {
                   std::vector<double> col(g.patch() * g.pixels());
                   for (std::size_t b = 0; b < g.batch; ++b) {
                     const double* go = o.grad.data() + b * out_size;
                     if (grads[1]) {  // kernel: grad_out[b] * col^T
                       im2col(g, ix->data.data() + b * in_size, col.data());
                       detail::gemm_nt(g.out_channels, g.patch(), g.pixels(), go, col.data(), grads[1]->data());
                     }
                     if (grads[0]) {  // input: col2im(kernel^T * grad_out[b])
                       std::fill(col.begin(), col.end(), 0.0);
                       detail::gemm_tn(g.patch(), g.pixels(), g.out_channels, iw->data.data(), go, col.data());
                       col2im_add(g, col.data(), grads[0]->data() + b * in_size);
                     }
                     if (grads.size() > 2 && grads[2]) {
                       auto& gb = *grads[2];
                       for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
                         double acc = 0.0;
                         for (std::size_t p = 0; p < g.pixels(); ++p) acc += go[oc * g.pixels() + p];
                         gb[oc] += acc;
                       }
                     }
                   }
                 });
}

Tensor upsample_nearest2x(const Tensor& input) {
  require_rank("upsample_nearest2x", input, 4);
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  std::vector<double> out(planes * 4 * h * w);
  const auto d = input.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t x = 0; x < 2 * w; ++x) out[(p * 2 * h + y) * 2 * w + x] = d[(p * h + y / 2) * w + x / 2];
    }
  }
  return make_op("upsample_nearest2x", {input.dim(0), input.dim(1), 2 * h, 2 * w}, std::move(out), {input},
                 [planes, h, w](const TensorImpl& o, Slots g) {
                   auto& gx = *g[0];
                   for (std::size_t p = 0; p < planes; ++p) {
                     for (std::size_t y = 0; y < 2 * h; ++y) {
                       for (std::size_t x = 0; x < 2 * w; ++x) gx[(p * h + y / 2) * w + x / 2] += o.grad[(p * 2 * h + y) * 2 * w + x];
                     }
                   }
                 });
}

Tensor avg_pool2x2(const Tensor& input) {
  require_rank("avg_pool2x2", input, 4);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw DimensionError("avg_pool2x2: odd spatial extent in " + shape_str(input.shape()));
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  std::vector<double> out(planes * oh * ow);
  const auto d = input.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double* r0 = &d[(p * h + 2 * y) * w + 2 * x];
        const double* r1 = r0 + w;
        out[(p * oh + y) * ow + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
  return make_op("avg_pool2x2", {input.dim(0), input.dim(1), oh, ow}, std::move(out), {input},
                 [planes, h, w, oh, ow](const TensorImpl& o, Slots g) {
                   auto& gx = *g[0];
                   for (std::size_t p = 0; p < planes; ++p) {
                     for (std::size_t y = 0; y < h; ++y) {
                       for (std::size_t x = 0; x < w; ++x) gx[(p * h + y) * w + x] += 0.25 * o.grad[(p * oh + y / 2) * ow + x / 2];
                     }
                   }
                 });
}

Tensor group_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
  if (input.rank() < 2) throw DimensionError("group_norm: rank >= 2 required, got " + shape_str(input.shape()));
  const std::size_t batch = input.dim(0);
  const std::size_t channels = input.dim(1);
  if (gamma.numel() != channels || beta.numel() != channels) {
    throw DimensionError("group_norm: affine params " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                         " for " + std::to_string(channels) + " channels");
  }
  const std::size_t spatial = input.numel() / (batch * channels);
  const std::size_t per = channels * spatial;
  std::vector<double> out(input.numel());
  std::vector<double> xhat(input.numel());
  std::vector<double> inv_std(batch);
  const auto d = input.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = d.data() + b * per;
    double mu = 0.0;
    for (std::size_t i = 0; i < per; ++i) mu += xb[i];
    mu /= static_cast<double>(per);
    double var = 0.0;
    for (std::size_t i = 0; i < per; ++i) var += (xb[i] - mu) * (xb[i] - mu);
    var /= static_cast<double>(per);
    inv_std[b] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t at = b * per + c * spatial + s;
        xhat[at] = (d[at] - mu) * inv_std[b];
        out[at] = gm[c] * xhat[at] + bt[c];
      }
    }
  }
  ImplPtr igamma = gamma.impl();
  return make_op("group_norm", input.shape(), std::move(out), {input, gamma, beta},
                 [igamma, xhat = std::move(xhat), inv_std = std::move(inv_std), batch, channels, spatial,
                  per](const TensorImpl& o, Slots g) {
                   for (std::size_t b = 0; b < batch; ++b) {
                     if (g[0]) {
                       // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
                       double m1 = 0.0;
                       double m2 = 0.0;
                       for (std::size_t c = 0; c < channels; ++c) {
                         for (std::size_t s = 0; s < spatial; ++s) {
                           const std::size_t at = b * per + c * spatial + s;
                           const double dxh = o.grad[at] * igamma->data[c];
                           m1 += dxh;
                           m2 += dxh * xhat[at];
                         }
                       }
                       m1 /= static_cast<double>(per);
                       m2 /= static_cast<double>(per);
                       auto& gx = *g[0];
                       for (std::size_t c = 0; c < channels; ++c) {
                         for (std::size_t s = 0; s < spatial; ++s) {
                           const std::size_t at = b * per + c * spatial + s;
                           const double dxh = o.grad[at] * igamma->data[c];
                           gx[at] += inv_std[b] * (dxh - m1 - xhat[at] * m2);
                         }
                       }
                     }
                     for (std::size_t c = 0; c < channels; ++c) {
                       double sg = 0.0;
                       double sgx = 0.0;
                       for (std::size_t s = 0; s < spatial; ++s) {
                         const std::size_t at = b * per + c * spatial + s;
                         sg += o.grad[at];
                         sgx += o.grad[at] * xhat[at];
                       }
                       if (g[1]) (*g[1])[c] += sgx;
                       if (g[2]) (*g[2])[c] += sg;
                     }
                   }
                 });
}

}  // namespace synergy
