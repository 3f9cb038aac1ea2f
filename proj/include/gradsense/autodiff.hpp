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

#ifndef GRADSENSE_AUTODIFF_HPP_
#define GRADSENSE_AUTODIFF_HPP_

// Reverse-mode automatic differentiation over a persistent expression graph.
//
// Every node owns its forward value, computed eagerly at construction. The
// adjoint rules of every op are themselves expressed as graph ops, so the
// gradient nodes returned by differentiate(..., create_graph = true) can be
// differentiated again. This is what gradient matching needs: the loss is a
// function of dL/dtheta, and the attack differentiates it w.r.t. the inputs.
//
// The op set is closed under differentiation: each op's adjoint is built from
// ops in this list (e.g. conv2d <-> conv_input_grad <-> conv_weight_grad,
// slice <-> embed, expand <-> reduce, diff <-> diff_adjoint).

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradsense/tensor.hpp"

namespace gradsense::autodiff {

enum class Op {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScale,
  kShift,
  kPow,
  kExp,
  kSigmoid,
  kRelu,
  kStep,
  kLogSoftmax,
  kMatMul,
  kTranspose,
  kConv2d,
  kConvInputGrad,
  kConvWeightGrad,
  kExpand,
  kReduce,
  kReshape,
  kStack,
  kSlice,
  kEmbed,
  kDiff,
  kDiffAdjoint,
};

std::string_view op_name(Op op);

// Construction-time shape mismatch. Always a programming error upstream.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(Op op);
  Op op() const { return op_; }

 private:
  Op op_;
};

class Node;
using NodeRef = std::shared_ptr<Node>;

// Op-specific parameters. Unused fields stay at their defaults.
struct Attrs {
  double scalar = 0.0;
  std::size_t stride = 1;
  std::size_t index = 0;
  std::size_t outer = 1;
  std::size_t inner = 1;
  Shape shape;
};

class Node {
 public:
  Op op() const { return op_; }
  const std::vector<NodeRef>& inputs() const { return inputs_; }
  const Tensor& value() const { return value_; }
  const Shape& shape() const { return value_.shape; }
  const Attrs& attrs() const { return attrs_; }
  bool requires_grad() const { return requires_grad_; }
  bool is_leaf() const { return op_ == Op::kLeaf; }

 private:
  friend class Variable;
  friend NodeRef make_node(Op, std::vector<NodeRef>, Attrs);
  friend NodeRef make_leaf(Tensor, bool);
  friend Tensor evaluate(const NodeRef&);

  Node(Op op, std::vector<NodeRef> inputs, Attrs attrs, Tensor value, bool requires_grad)
      : op_(op), inputs_(std::move(inputs)), attrs_(std::move(attrs)),
        value_(std::move(value)), requires_grad_(requires_grad) {}

  Op op_;
  std::vector<NodeRef> inputs_;
  Attrs attrs_;
  Tensor value_;
  bool requires_grad_;
};

// Low-level constructors. Prefer the typed builders below.
NodeRef make_node(Op op, std::vector<NodeRef> inputs, Attrs attrs = {});
NodeRef make_leaf(Tensor value, bool requires_grad);

NodeRef constant(Tensor value);
NodeRef constant_like(const NodeRef& like, double fill);

NodeRef add(const NodeRef& a, const NodeRef& b);
NodeRef sub(const NodeRef& a, const NodeRef& b);
NodeRef mul(const NodeRef& a, const NodeRef& b);
NodeRef scale(const NodeRef& a, double c);
NodeRef shift(const NodeRef& a, double c);
NodeRef power(const NodeRef& a, double p);
NodeRef exp(const NodeRef& a);
NodeRef sigmoid(const NodeRef& a);
NodeRef relu(const NodeRef& a);
// Heaviside step of a; treated as piecewise constant (zero derivative).
NodeRef step(const NodeRef& a);
// Row-wise log-softmax of a [rows, cols] matrix.
NodeRef log_softmax(const NodeRef& a);
NodeRef matmul(const NodeRef& a, const NodeRef& b);
NodeRef transpose(const NodeRef& a);
// x: [N, C, H, W], w: [O, C, K, K], no padding.
NodeRef conv2d(const NodeRef& x, const NodeRef& w, std::size_t stride);
// Adjoint of conv2d w.r.t. its input; output is [N, C, height, width].
NodeRef conv_input_grad(const NodeRef& g, const NodeRef& w, std::size_t stride,
                        std::size_t height, std::size_t width);
// Adjoint of conv2d w.r.t. its weight; output is [O, C, kernel, kernel].
NodeRef conv_weight_grad(const NodeRef& x, const NodeRef& g, std::size_t stride,
                         std::size_t kernel);
// Views `out_shape` as [outer, a.size(), inner] and copies a along outer/inner.
NodeRef expand(const NodeRef& a, std::size_t outer, std::size_t inner, Shape out_shape);
// Views a as [outer, mid, inner] and sums over outer and inner; result is [mid].
NodeRef reduce(const NodeRef& a, std::size_t outer, std::size_t inner);
NodeRef sum(const NodeRef& a);
NodeRef reshape(const NodeRef& a, Shape shape);
NodeRef stack(std::span<const NodeRef> parts);
NodeRef slice(const NodeRef& a, std::size_t index);
NodeRef embed(const NodeRef& a, std::size_t index, std::size_t count);
// Forward difference along one of the two trailing axes (0 = rows, 1 = cols),
// zero where the neighbour does not exist.
NodeRef diff(const NodeRef& a, std::size_t axis);
NodeRef diff_adjoint(const NodeRef& a, std::size_t axis);

// A differentiable leaf with mutable data and an accumulated gradient.
class Variable {
 public:
  Variable() = default;
  explicit Variable(Tensor data);

  const NodeRef& node() const { return node_; }
  const Tensor& data() const { return node_->value_; }
  const Shape& shape() const { return node_->value_.shape; }
  void set_data(std::span<const double> values);

  const Tensor& grad() const { return grad_; }
  void zero_grad();
  void accumulate_grad(const Tensor& g);

 private:
  NodeRef node_;
  Tensor grad_;
};

// Recomputes every non-leaf node reachable from output from current leaf data.
Tensor evaluate(const NodeRef& output);

// Gradients of a single-element output w.r.t. each node in wrt, in order.
// Nodes unreachable from output receive zeros. When create_graph is false the
// results are detached constants.
std::vector<NodeRef> differentiate(const NodeRef& output, std::span<const NodeRef> wrt,
                                   bool create_graph);
std::vector<NodeRef> differentiate(const NodeRef& output,
                                   std::span<const Variable> wrt, bool create_graph);

// Accumulates d(output)/d(var) into each variable's grad.
void backward(const NodeRef& output, std::span<Variable> vars);

// Topological order of the graph rooted at output; inputs precede consumers.
std::vector<NodeRef> topological_order(const NodeRef& output);

}  // namespace gradsense::autodiff

#endif  // GRADSENSE_AUTODIFF_HPP_
