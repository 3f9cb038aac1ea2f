// Copyright 2026 The Gradsense Authors.
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

#include <algorithm>
#include <cmath>
#include <string>

#include "gradsense/autodiff.hpp"
#include "kernels.hpp"

namespace gradsense::autodiff {

namespace {

[[noreturn]] void shape_fail(Op op, const std::string& what) {
  throw ShapeError(std::string(op_name(op)) + ": " + what);
}

void require_arity(Op op, const std::vector<NodeRef>& in, std::size_t n) {
  if (in.size() != n) {
    shape_fail(op, "expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
  }
}

void require_same(Op op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    shape_fail(op, "shape " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
}

void require_rank(Op op, const Tensor& a, std::size_t rank) {
  if (a.shape.size() != rank) {
    shape_fail(op, "expected rank " + std::to_string(rank) + ", got " +
                       shape_string(a.shape));
  }
}

template <typename F>
Tensor unary(const Tensor& a, F f) {
  Tensor out(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor log_softmax_rows(const Tensor& a) {
  const std::size_t rows = a.shape[0], cols = a.shape[1];
  Tensor out(a.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = &a.data[r * cols];
    double mx = x[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(x[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[c] - lse;
  }
  return out;
}

Tensor matmul_kernel(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* o = &out.data[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.data[i * k + p];
      if (av == 0.0) continue;
      const double* br = &b.data[p * n];
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Tensor transpose_kernel(const Tensor& a) {
  const std::size_t m = a.shape[0], n = a.shape[1];
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = a.data[i * n + j];
  return out;
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride) {
  return (in - k) / stride + 1;
}

// out[n,o,p,q] = sum_{c,a,b} x[n,c,p*s+a,q*s+b] * w[o,c,a,b]
Tensor conv2d_kernel(const Tensor& x, const Tensor& w, std::size_t s) {
  const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const std::size_t O = w.shape[0], K = w.shape[2];
  const std::size_t Ho = conv_out(H, K, s), Wo = conv_out(W, K, s);
  Tensor out(Shape{N, O, Ho, Wo});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t p = 0; p < Ho; ++p)
        for (std::size_t q = 0; q < Wo; ++q) {
          double acc = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            const double* xb = &x.data[((n * C + c) * H + p * s) * W + q * s];
            const double* wb = &w.data[((o * C + c) * K) * K];
            for (std::size_t a = 0; a < K; ++a)
              for (std::size_t b = 0; b < K; ++b) acc += xb[a * W + b] * wb[a * K + b];
          }
          out.data[((n * O + o) * Ho + p) * Wo + q] = acc;
        }
  return out;
}

// z[n,c,p*s+a,q*s+b] += g[n,o,p,q] * w[o,c,a,b]
Tensor conv_input_grad_kernel(const Tensor& g, const Tensor& w, std::size_t s,
                              std::size_t H, std::size_t W) {
  const std::size_t N = g.shape[0], O = g.shape[1], Ho = g.shape[2], Wo = g.shape[3];
  const std::size_t C = w.shape[1], K = w.shape[2];
  Tensor out(Shape{N, C, H, W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t p = 0; p < Ho; ++p)
        for (std::size_t q = 0; q < Wo; ++q) {
          const double gv = g.data[((n * O + o) * Ho + p) * Wo + q];
          if (gv == 0.0) continue;
          for (std::size_t c = 0; c < C; ++c) {
            double* zb = &out.data[((n * C + c) * H + p * s) * W + q * s];
            const double* wb = &w.data[((o * C + c) * K) * K];
            for (std::size_t a = 0; a < K; ++a)
              for (std::size_t b = 0; b < K; ++b) zb[a * W + b] += gv * wb[a * K + b];
          }
        }
  return out;
}

// dw[o,c,a,b] = sum_{n,p,q} x[n,c,p*s+a,q*s+b] * g[n,o,p,q]
Tensor conv_weight_grad_kernel(const Tensor& x, const Tensor& g, std::size_t s,
                               std::size_t K) {
  const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const std::size_t O = g.shape[1], Ho = g.shape[2], Wo = g.shape[3];
  Tensor out(Shape{O, C, K, K});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t p = 0; p < Ho; ++p)
        for (std::size_t q = 0; q < Wo; ++q) {
          const double gv = g.data[((n * O + o) * Ho + p) * Wo + q];
          if (gv == 0.0) continue;
          for (std::size_t c = 0; c < C; ++c) {
            const double* xb = &x.data[((n * C + c) * H + p * s) * W + q * s];
            double* db = &out.data[((o * C + c) * K) * K];
            for (std::size_t a = 0; a < K; ++a)
              for (std::size_t b = 0; b < K; ++b) db[a * K + b] += gv * xb[a * W + b];
          }
        }
  return out;
}

void check_conv_geometry(Op op, std::size_t H, std::size_t W, std::size_t K,
                         std::size_t s) {
  if (s == 0) shape_fail(op, "stride must be positive");
  if (K == 0 || K > H || K > W) {
    shape_fail(op, "kernel " + std::to_string(K) + " does not fit " + std::to_string(H) +
                       "x" + std::to_string(W));
  }
}

// Forward difference along rows (axis 0) or columns (axis 1) of the trailing
// two dimensions.
Tensor diff_kernel(const Tensor& a, std::size_t axis, bool adjoint) {
  const std::size_t rank = a.shape.size();
  const std::size_t H = a.shape[rank - 2], W = a.shape[rank - 1];
  const std::size_t planes = a.size() / (H * W);
  Tensor out(a.shape);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* x = &a.data[pl * H * W];
    double* y = &out.data[pl * H * W];
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const std::size_t at = i * W + j;
        if (!adjoint) {
          if (axis == 1 && j + 1 < W) y[at] = x[at + 1] - x[at];
          if (axis == 0 && i + 1 < H) y[at] = x[at + W] - x[at];
        } else {
          // Transpose of the map above: y[at] = g[at-1] - g[at] on valid sites.
          double v = 0.0;
          if (axis == 1) {
            if (j + 1 < W) v -= x[at];
            if (j >= 1) v += x[at - 1];
          } else {
            if (i + 1 < H) v -= x[at];
            if (i >= 1) v += x[at - W];
          }
          y[at] = v;
        }
      }
  }
  return out;
}

}  // namespace

NonFiniteError::NonFiniteError(Op op)
    : std::runtime_error("non-finite value produced by op '" + std::string(op_name(op)) +
                         "'"),
      op_(op) {}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "subtract";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kPow: return "scalar-power";
    case Op::kExp: return "exp";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kStep: return "step";
    case Op::kLogSoftmax: return "softmax-log";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kConv2d: return "conv2d";
    case Op::kConvInputGrad: return "conv2d-input-grad";
    case Op::kConvWeightGrad: return "conv2d-weight-grad";
    case Op::kExpand: return "expand";
    case Op::kReduce: return "sum";
    case Op::kReshape: return "reshape";
    case Op::kStack: return "stack";
    case Op::kSlice: return "slice";
    case Op::kEmbed: return "embed";
    case Op::kDiff: return "diff";
    case Op::kDiffAdjoint: return "diff-adjoint";
  }
  return "unknown";
}

namespace detail {

Tensor compute(Op op, const std::vector<NodeRef>& in, const Attrs& at) {
  Tensor out;
  switch (op) {
    case Op::kLeaf:
      throw std::logic_error("compute: leaf nodes have no kernel");
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      require_arity(op, in, 2);
      const Tensor& a = in[0]->value();
      const Tensor& b = in[1]->value();
      require_same(op, a, b);
      if (op == Op::kAdd) out = binary(a, b, [](double x, double y) { return x + y; });
      if (op == Op::kSub) out = binary(a, b, [](double x, double y) { return x - y; });
      if (op == Op::kMul) out = binary(a, b, [](double x, double y) { return x * y; });
      break;
    }
    case Op::kScale:
      require_arity(op, in, 1);
      out = unary(in[0]->value(), [c = at.scalar](double x) { return c * x; });
      break;
    case Op::kShift:
      require_arity(op, in, 1);
      out = unary(in[0]->value(), [c = at.scalar](double x) { return x + c; });
      break;
    case Op::kPow: {
      require_arity(op, in, 1);
      const double p = at.scalar;
      if (p == 2.0) {
        out = unary(in[0]->value(), [](double x) { return x * x; });
      } else if (p == 0.5) {
        out = unary(in[0]->value(), [](double x) { return std::sqrt(x); });
      } else {
        out = unary(in[0]->value(), [p](double x) { return std::pow(x, p); });
      }
      break;
    }
    case Op::kExp:
      require_arity(op, in, 1);
      out = unary(in[0]->value(), [](double x) { return std::exp(x); });
      break;
    case Op::kSigmoid:
      require_arity(op, in, 1);
      out = unary(in[0]->value(), sigmoid_scalar);
      break;
    case Op::kRelu:
      require_arity(op, in, 1);
      out = unary(in[0]->value(), [](double x) { return x > 0.0 ? x : 0.0; });
      break;
    case Op::kStep:
      require_arity(op, in, 1);
      out = unary(in[0]->value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
      break;
    case Op::kLogSoftmax:
      require_arity(op, in, 1);
      require_rank(op, in[0]->value(), 2);
      if (in[0]->shape()[1] == 0) shape_fail(op, "empty rows");
      out = log_softmax_rows(in[0]->value());
      break;
    case Op::kMatMul: {
      require_arity(op, in, 2);
      const Tensor& a = in[0]->value();
      const Tensor& b = in[1]->value();
      require_rank(op, a, 2);
      require_rank(op, b, 2);
      if (a.shape[1] != b.shape[0]) {
        shape_fail(op, shape_string(a.shape) + " x " + shape_string(b.shape));
      }
      out = matmul_kernel(a, b);
      break;
    }
    case Op::kTranspose:
      require_arity(op, in, 1);
      require_rank(op, in[0]->value(), 2);
      out = transpose_kernel(in[0]->value());
      break;
    case Op::kConv2d: {
      require_arity(op, in, 2);
      const Tensor& x = in[0]->value();
      const Tensor& w = in[1]->value();
      require_rank(op, x, 4);
      require_rank(op, w, 4);
      if (w.shape[1] != x.shape[1] || w.shape[2] != w.shape[3]) {
        shape_fail(op, "weight " + shape_string(w.shape) + " vs input " +
                           shape_string(x.shape));
      }
      check_conv_geometry(op, x.shape[2], x.shape[3], w.shape[2], at.stride);
      out = conv2d_kernel(x, w, at.stride);
      break;
    }
    case Op::kConvInputGrad: {
      require_arity(op, in, 2);
      const Tensor& g = in[0]->value();
      const Tensor& w = in[1]->value();
      require_rank(op, g, 4);
      require_rank(op, w, 4);
      if (at.shape.size() != 2) shape_fail(op, "missing spatial size");
      const std::size_t H = at.shape[0], W = at.shape[1], K = w.shape[2];
      check_conv_geometry(op, H, W, K, at.stride);
      if (g.shape[1] != w.shape[0] || w.shape[2] != w.shape[3] ||
          g.shape[2] != conv_out(H, K, at.stride) || g.shape[3] != conv_out(W, K, at.stride)) {
        shape_fail(op, "gradient " + shape_string(g.shape) + " vs weight " +
                           shape_string(w.shape));
      }
      out = conv_input_grad_kernel(g, w, at.stride, H, W);
      break;
    }
    case Op::kConvWeightGrad: {
      require_arity(op, in, 2);
      const Tensor& x = in[0]->value();
      const Tensor& g = in[1]->value();
      require_rank(op, x, 4);
      require_rank(op, g, 4);
      if (at.shape.size() != 1) shape_fail(op, "missing kernel size");
      const std::size_t K = at.shape[0];
      check_conv_geometry(op, x.shape[2], x.shape[3], K, at.stride);
      if (g.shape[0] != x.shape[0] || g.shape[2] != conv_out(x.shape[2], K, at.stride) ||
          g.shape[3] != conv_out(x.shape[3], K, at.stride)) {
        shape_fail(op, "gradient " + shape_string(g.shape) + " vs input " +
                           shape_string(x.shape));
      }
      out = conv_weight_grad_kernel(x, g, at.stride, K);
      break;
    }
    case Op::kExpand: {
      require_arity(op, in, 1);
      const Tensor& a = in[0]->value();
      const std::size_t mid = a.size();
      if (numel(at.shape) != at.outer * mid * at.inner) {
        shape_fail(op, shape_string(a.shape) + " cannot expand to " + shape_string(at.shape));
      }
      out = Tensor(at.shape);
      for (std::size_t o = 0; o < at.outer; ++o)
        for (std::size_t m = 0; m < mid; ++m) {
          double* dst = &out.data[(o * mid + m) * at.inner];
          std::fill(dst, dst + at.inner, a.data[m]);
        }
      break;
    }
    case Op::kReduce: {
      require_arity(op, in, 1);
      const Tensor& a = in[0]->value();
      const std::size_t block = at.outer * at.inner;
      if (block == 0 || a.size() % block != 0) {
        shape_fail(op, shape_string(a.shape) + " not divisible into outer=" +
                           std::to_string(at.outer) + " inner=" + std::to_string(at.inner));
      }
      const std::size_t mid = a.size() / block;
      out = Tensor(Shape{mid});
      for (std::size_t o = 0; o < at.outer; ++o)
        for (std::size_t m = 0; m < mid; ++m) {
          const double* src = &a.data[(o * mid + m) * at.inner];
          double acc = 0.0;
          for (std::size_t i = 0; i < at.inner; ++i) acc += src[i];
          out.data[m] += acc;
        }
      break;
    }
    case Op::kReshape:
      require_arity(op, in, 1);
      if (numel(at.shape) != in[0]->value().size()) {
        shape_fail(op, shape_string(in[0]->shape()) + " -> " + shape_string(at.shape));
      }
      out = Tensor(at.shape, in[0]->value().data);
      break;
    case Op::kStack: {
      if (in.empty()) shape_fail(op, "nothing to stack");
      const Shape& part = in[0]->shape();
      Shape shape{in.size()};
      shape.insert(shape.end(), part.begin(), part.end());
      out = Tensor(shape);
      const std::size_t n = in[0]->value().size();
      for (std::size_t i = 0; i < in.size(); ++i) {
        require_same(op, in[0]->value(), in[i]->value());
        std::copy(in[i]->value().data.begin(), in[i]->value().data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(i * n));
      }
      break;
    }
    case Op::kSlice: {
      require_arity(op, in, 1);
      const Tensor& a = in[0]->value();
      if (a.shape.empty() || at.index >= a.shape[0]) {
        shape_fail(op, "index " + std::to_string(at.index) + " out of " + shape_string(a.shape));
      }
      Shape shape(a.shape.begin() + 1, a.shape.end());
      const std::size_t n = numel(shape);
      const auto first = a.data.begin() + static_cast<std::ptrdiff_t>(at.index * n);
      out = Tensor(shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n)));
      break;
    }
    case Op::kEmbed: {
      require_arity(op, in, 1);
      const Tensor& a = in[0]->value();
      if (at.index >= at.outer) {
        shape_fail(op, "index " + std::to_string(at.index) + " out of " +
                           std::to_string(at.outer));
      }
      Shape shape{at.outer};
      shape.insert(shape.end(), a.shape.begin(), a.shape.end());
      out = Tensor(shape);
      std::copy(a.data.begin(), a.data.end(),
                out.data.begin() + static_cast<std::ptrdiff_t>(at.index * a.size()));
      break;
    }
    case Op::kDiff:
    case Op::kDiffAdjoint: {
      require_arity(op, in, 1);
      const Tensor& a = in[0]->value();
      if (a.shape.size() < 2 || at.index > 1) shape_fail(op, "needs rank >= 2 and axis 0/1");
      out = diff_kernel(a, at.index, op == Op::kDiffAdjoint);
      break;
    }
  }
  if (!out.all_finite()) throw NonFiniteError(op);
  return out;
}

}  // namespace detail

NodeRef make_node(Op op, std::vector<NodeRef> inputs, Attrs attrs) {
  for (const auto& in : inputs) {
    if (!in) throw ShapeError(std::string(op_name(op)) + ": null input");
  }
  Tensor value = detail::compute(op, inputs, attrs);
  const bool rg = std::any_of(inputs.begin(), inputs.end(),
                              [](const NodeRef& n) { return n->requires_grad(); });
  return NodeRef(new Node(op, std::move(inputs), std::move(attrs), std::move(value), rg));
}

NodeRef make_leaf(Tensor value, bool requires_grad) {
  return NodeRef(new Node(Op::kLeaf, {}, {}, std::move(value), requires_grad));
}

NodeRef constant(Tensor value) { return make_leaf(std::move(value), false); }

NodeRef constant_like(const NodeRef& like, double fill) {
  return constant(Tensor(like->shape(), fill));
}

NodeRef add(const NodeRef& a, const NodeRef& b) { return make_node(Op::kAdd, {a, b}); }
NodeRef sub(const NodeRef& a, const NodeRef& b) { return make_node(Op::kSub, {a, b}); }
NodeRef mul(const NodeRef& a, const NodeRef& b) { return make_node(Op::kMul, {a, b}); }

NodeRef scale(const NodeRef& a, double c) {
  Attrs at;
  at.scalar = c;
  return make_node(Op::kScale, {a}, at);
}

NodeRef shift(const NodeRef& a, double c) {
  Attrs at;
  at.scalar = c;
  return make_node(Op::kShift, {a}, at);
}

NodeRef power(const NodeRef& a, double p) {
  Attrs at;
  at.scalar = p;
  return make_node(Op::kPow, {a}, at);
}

NodeRef exp(const NodeRef& a) { return make_node(Op::kExp, {a}); }
NodeRef sigmoid(const NodeRef& a) { return make_node(Op::kSigmoid, {a}); }
NodeRef relu(const NodeRef& a) { return make_node(Op::kRelu, {a}); }
NodeRef step(const NodeRef& a) { return make_node(Op::kStep, {a}); }
NodeRef log_softmax(const NodeRef& a) { return make_node(Op::kLogSoftmax, {a}); }
NodeRef matmul(const NodeRef& a, const NodeRef& b) { return make_node(Op::kMatMul, {a, b}); }
NodeRef transpose(const NodeRef& a) { return make_node(Op::kTranspose, {a}); }

NodeRef conv2d(const NodeRef& x, const NodeRef& w, std::size_t stride) {
  Attrs at;
  at.stride = stride;
  return make_node(Op::kConv2d, {x, w}, at);
}

NodeRef conv_input_grad(const NodeRef& g, const NodeRef& w, std::size_t stride,
                        std::size_t height, std::size_t width) {
  Attrs at;
  at.stride = stride;
  at.shape = {height, width};
  return make_node(Op::kConvInputGrad, {g, w}, at);
}

NodeRef conv_weight_grad(const NodeRef& x, const NodeRef& g, std::size_t stride,
                         std::size_t kernel) {
  Attrs at;
  at.stride = stride;
  at.shape = {kernel};
  return make_node(Op::kConvWeightGrad, {x, g}, at);
}

NodeRef expand(const NodeRef& a, std::size_t outer, std::size_t inner, Shape out_shape) {
  Attrs at;
  at.outer = outer;
  at.inner = inner;
  at.shape = std::move(out_shape);
  return make_node(Op::kExpand, {a}, at);
}

NodeRef reduce(const NodeRef& a, std::size_t outer, std::size_t inner) {
  Attrs at;
  at.outer = outer;
  at.inner = inner;
  return make_node(Op::kReduce, {a}, at);
}

NodeRef sum(const NodeRef& a) { return reduce(a, 1, a->value().size()); }

NodeRef reshape(const NodeRef& a, Shape shape) {
  if (shape == a->shape()) return a;
  Attrs at;
  at.shape = std::move(shape);
  return make_node(Op::kReshape, {a}, at);
}

NodeRef stack(std::span<const NodeRef> parts) {
  return make_node(Op::kStack, std::vector<NodeRef>(parts.begin(), parts.end()));
}

NodeRef slice(const NodeRef& a, std::size_t index) {
  Attrs at;
  at.index = index;
  return make_node(Op::kSlice, {a}, at);
}

NodeRef embed(const NodeRef& a, std::size_t index, std::size_t count) {
  Attrs at;
  at.index = index;
  at.outer = count;
  return make_node(Op::kEmbed, {a}, at);
}

NodeRef diff(const NodeRef& a, std::size_t axis) {
  Attrs at;
  at.index = axis;
  return make_node(Op::kDiff, {a}, at);
}

NodeRef diff_adjoint(const NodeRef& a, std::size_t axis) {
  Attrs at;
  at.index = axis;
  return make_node(Op::kDiffAdjoint, {a}, at);
}

}  // namespace gradsense::autodiff
