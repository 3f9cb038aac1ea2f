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
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "gradsense/autodiff.hpp"
#include "kernels.hpp"

namespace gradsense::autodiff {

namespace {


// Builds the contribution of node n's adjoint g to each input that needs one.
// Every rule is expressed with graph ops so the result stays differentiable.
template <typename Sink>
void vjp(const NodeRef& n, const NodeRef& g, const std::vector<char>& need, Sink&& emit) {
  const auto& in = n->inputs();
  const Attrs& at = n->attrs();
  switch (n->op()) {
    case Op::kLeaf:
    case Op::kStep:
      return;
    case Op::kAdd:
      if (need[0]) emit(0, g);
      if (need[1]) emit(1, g);
      return;
    case Op::kSub:
      if (need[0]) emit(0, g);
      if (need[1]) emit(1, scale(g, -1.0));
      return;
    case Op::kMul:
      if (need[0]) emit(0, mul(g, in[1]));
      if (need[1]) emit(1, mul(g, in[0]));
      return;
    case Op::kScale:
      emit(0, scale(g, at.scalar));
      return;
    case Op::kShift:
    case Op::kReshape:
      emit(0, reshape(g, in[0]->shape()));
      return;
    case Op::kPow: {
      const double p = at.scalar;
      if (p == 0.0) return;
      if (p == 1.0) {
        emit(0, g);
      } else if (p == 2.0) {
        emit(0, mul(g, scale(in[0], 2.0)));
      } else {
        emit(0, mul(g, scale(power(in[0], p - 1.0), p)));
      }
      return;
    }
    case Op::kExp:
      emit(0, mul(g, n));
      return;
    case Op::kSigmoid:
      // s' = s (1 - s)
      emit(0, mul(g, mul(n, shift(scale(n, -1.0), 1.0))));
      return;
    case Op::kRelu:
      emit(0, mul(g, step(in[0])));
      return;
    case Op::kLogSoftmax: {
      // dx = g - softmax * rowsum(g)
      const std::size_t cols = n->shape()[1];
      const NodeRef rows = reduce(g, 1, cols);
      emit(0, sub(g, mul(exp(n), expand(rows, 1, cols, n->shape()))));
      return;
    }
    case Op::kMatMul:
      if (need[0]) emit(0, matmul(g, transpose(in[1])));
      if (need[1]) emit(1, matmul(transpose(in[0]), g));
      return;
    case Op::kTranspose:
      emit(0, transpose(g));
      return;
    case Op::kConv2d: {
      const Shape& xs = in[0]->shape();
      if (need[0]) emit(0, conv_input_grad(g, in[1], at.stride, xs[2], xs[3]));
      if (need[1]) emit(1, conv_weight_grad(in[0], g, at.stride, in[1]->shape()[2]));
      return;
    }
    case Op::kConvInputGrad: {
      // z = conv_input_grad(h, w)
      if (need[0]) emit(0, conv2d(g, in[1], at.stride));
      if (need[1]) emit(1, conv_weight_grad(g, in[0], at.stride, in[1]->shape()[2]));
      return;
    }
    case Op::kConvWeightGrad: {
      // dw = conv_weight_grad(x, h)
      const Shape& xs = in[0]->shape();
      if (need[0]) emit(0, conv_input_grad(in[1], g, at.stride, xs[2], xs[3]));
      if (need[1]) emit(1, conv2d(in[0], g, at.stride));
      return;
    }
    case Op::kExpand:
      emit(0, reshape(reduce(g, at.outer, at.inner), in[0]->shape()));
      return;
    case Op::kReduce:
      emit(0, expand(g, at.outer, at.inner, in[0]->shape()));
      return;
    case Op::kStack:
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (need[i]) emit(i, reshape(slice(g, i), in[i]->shape()));
      }
      return;
    case Op::kSlice:
      emit(0, reshape(embed(g, at.index, in[0]->shape()[0]), in[0]->shape()));
      return;
    case Op::kEmbed:
      emit(0, reshape(slice(g, at.index), in[0]->shape()));
      return;
    case Op::kDiff:
      emit(0, diff_adjoint(g, at.index));
      return;
    case Op::kDiffAdjoint:
      emit(0, diff(g, at.index));
      return;
  }
}

}  // namespace

std::vector<NodeRef> topological_order(const NodeRef& output) {
  std::vector<NodeRef> order;
  std::unordered_set<const Node*> seen;
  // Iterative post-order DFS; inputs are visited in declaration order so the
  // result depends only on construction order.
  std::vector<std::pair<NodeRef, std::size_t>> stack;
  stack.emplace_back(output, 0);
  seen.insert(output.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs().size()) {
      const NodeRef& child = node->inputs()[next++];
      if (seen.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

Tensor evaluate(const NodeRef& output) {
  for (const NodeRef& n : topological_order(output)) {
    if (!n->is_leaf()) n->value_ = detail::compute(n->op(), n->inputs(), n->attrs());
  }
  return output->value();
}

std::vector<NodeRef> differentiate(const NodeRef& output, std::span<const NodeRef> wrt,
                                   bool create_graph) {
  if (output->value().size() != 1) {
    throw ShapeError("differentiate: output must be scalar, got shape " +
                     shape_string(output->shape()));
  }
  const std::vector<NodeRef> order = topological_order(output);
  std::unordered_map<const Node*, std::size_t> position;
  position.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) position.emplace(order[i].get(), i);

  // A node is relevant if some wrt node lies in its input cone.
  std::vector<char> relevant(order.size(), 0);
  for (const NodeRef& w : wrt) {
    auto it = position.find(w.get());
    if (it != position.end()) relevant[it->second] = 1;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (relevant[i]) continue;
    for (const NodeRef& in : order[i]->inputs()) {
      if (relevant[position.at(in.get())]) {
        relevant[i] = 1;
        break;
      }
    }
  }

  std::vector<NodeRef> adjoint(order.size());
  const std::size_t root = order.size() - 1;
  if (relevant[root]) adjoint[root] = constant_like(output, 1.0);

  // Reverse topological sweep. Contributions into a shared node arrive in a
  // fixed order (consumer position, then input index).
  for (std::size_t r = order.size(); r-- > 0;) {
    const NodeRef& n = order[r];
    if (!adjoint[r] || n->is_leaf()) continue;
    const auto& in = n->inputs();
    std::vector<char> need(in.size());
    bool any = false;
    for (std::size_t i = 0; i < in.size(); ++i) {
      need[i] = relevant[position.at(in[i].get())];
      any = any || need[i];
    }
    if (!any) continue;
    vjp(n, adjoint[r], need, [&](std::size_t i, NodeRef contribution) {
      NodeRef& slot = adjoint[position.at(in[i].get())];
      slot = slot ? add(slot, contribution) : std::move(contribution);
    });
  }

  std::vector<NodeRef> result;
  result.reserve(wrt.size());
  for (const NodeRef& w : wrt) {
    auto it = position.find(w.get());
    NodeRef g = it == position.end() ? nullptr : adjoint[it->second];
    if (!g) {
      result.push_back(constant_like(w, 0.0));
    } else if (create_graph) {
      result.push_back(std::move(g));
    } else {
      result.push_back(constant(g->value()));
    }
  }
  return result;
}

std::vector<NodeRef> differentiate(const NodeRef& output, std::span<const Variable> wrt,
                                   bool create_graph) {
  std::vector<NodeRef> nodes;
  nodes.reserve(wrt.size());
  for (const Variable& v : wrt) nodes.push_back(v.node());
  return differentiate(output, nodes, create_graph);
}

void backward(const NodeRef& output, std::span<Variable> vars) {
  std::vector<NodeRef> nodes;
  nodes.reserve(vars.size());
  for (const Variable& v : vars) nodes.push_back(v.node());
  const auto grads = differentiate(output, nodes, false);
  for (std::size_t i = 0; i < vars.size(); ++i) vars[i].accumulate_grad(grads[i]->value());
}

Variable::Variable(Tensor data)
    : node_(make_leaf(std::move(data), true)), grad_(node_->value().shape) {}

void Variable::set_data(std::span<const double> values) {
  Tensor& v = node_->value_;
  if (values.size() != v.size()) {
    throw ShapeError("variable: " + std::to_string(values.size()) +
                     " values for shape " + shape_string(v.shape));
  }
  std::copy(values.begin(), values.end(), v.data.begin());
}

void Variable::zero_grad() { std::fill(grad_.data.begin(), grad_.data.end(), 0.0); }

void Variable::accumulate_grad(const Tensor& g) {
  if (g.shape != grad_.shape) {
    throw ShapeError("variable: gradient shape " + shape_string(g.shape) + " vs " +
                     shape_string(grad_.shape));
  }
  for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += g[i];
}

}  // namespace gradsense::autodiff
