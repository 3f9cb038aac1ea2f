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

#include <charconv>
#include <cmath>
#include <random>

#include "gradsense/victim.hpp"

namespace gradsense::victim {

namespace ad = autodiff;

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec l;
  l.kind = Kind::kDense;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
  LayerSpec l;
  l.kind = Kind::kConv2d;
  l.units = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::activate(Activation a) {
  LayerSpec l;
  l.kind = Kind::kActivation;
  l.activation = a;
  return l;
}

LayerSpec LayerSpec::flatten() { return LayerSpec{}; }

namespace {

// Walks the layer list, tracking the per-sample shape. Calls visit(layer,
// in_shape, out_shape) for each layer.
template <typename Visit>
Shape walk_shapes(const ArchSpec& arch, Visit&& visit) {
  if (arch.input.size() == 0) throw ArchError(arch.name + ": empty input shape");
  Shape cur = arch.input.shape();
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    const std::string where = arch.name + " layer " + std::to_string(i) + ": ";
    Shape next;
    switch (l.kind) {
      case LayerSpec::Kind::kFlatten:
        next = {numel(cur)};
        break;
      case LayerSpec::Kind::kActivation:
        next = cur;
        break;
      case LayerSpec::Kind::kDense:
        if (cur.size() != 1) throw ArchError(where + "dense needs flattened input, got " + shape_string(cur));
        if (l.units == 0) throw ArchError(where + "dense with zero units");
        next = {l.units};
        break;
      case LayerSpec::Kind::kConv2d:
        if (cur.size() != 3) throw ArchError(where + "conv2d needs CxHxW input, got " + shape_string(cur));
        if (l.units == 0 || l.kernel == 0 || l.stride == 0) throw ArchError(where + "degenerate conv2d");
        if (l.kernel > cur[1] || l.kernel > cur[2]) {
          throw ArchError(where + "kernel " + std::to_string(l.kernel) + " exceeds input " +
                          shape_string(cur));
        }
        next = {l.units, (cur[1] - l.kernel) / l.stride + 1, (cur[2] - l.kernel) / l.stride + 1};
        break;
    }
    visit(l, cur, next);
    cur = std::move(next);
  }
  return cur;
}

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || v == 0) {
    throw ArchError("arch: bad value '" + std::string(text) + "' for " + std::string(what));
  }
  return v;
}

}  // namespace

void ArchSpec::validate() const {
  if (num_classes == 0) throw ArchError(name + ": num_classes must be positive");
  const Shape out = walk_shapes(*this, [](const LayerSpec&, const Shape&, const Shape&) {});
  if (out != Shape{num_classes}) {
    throw ArchError(name + ": final output " + shape_string(out) + " != num_classes " +
                    std::to_string(num_classes));
  }
}

std::vector<Shape> ArchSpec::param_shapes() const {
  std::vector<Shape> shapes;
  walk_shapes(*this, [&](const LayerSpec& l, const Shape& in, const Shape&) {
    if (l.kind == LayerSpec::Kind::kDense) {
      shapes.push_back({l.units, in[0]});
      shapes.push_back({l.units});
    } else if (l.kind == LayerSpec::Kind::kConv2d) {
      shapes.push_back({l.units, in[0], l.kernel, l.kernel});
      shapes.push_back({l.units});
    }
  });
  return shapes;
}

ArchSpec mlp(ImageShape input, std::size_t hidden, std::size_t classes, Activation act) {
  ArchSpec a;
  a.name = "mlp:h=" + std::to_string(hidden);
  a.input = input;
  a.num_classes = classes;
  a.layers = {LayerSpec::flatten(), LayerSpec::dense(hidden), LayerSpec::activate(act),
              LayerSpec::dense(classes)};
  return a;
}

ArchSpec lenet_lite(ImageShape input, std::size_t channels, std::size_t classes, Activation act) {
  ArchSpec a;
  a.name = "lenet-lite:c=" + std::to_string(channels);
  a.input = input;
  a.num_classes = classes;
  a.layers = {LayerSpec::conv2d(channels, 5, 2), LayerSpec::activate(act),
              LayerSpec::conv2d(channels, 5, 2), LayerSpec::activate(act),
              LayerSpec::flatten(),              LayerSpec::dense(classes)};
  return a;
}

ArchSpec parse_arch(std::string_view text, ImageShape input, std::size_t classes) {
  const auto colon = text.find(':');
  const std::string_view family = text.substr(0, colon);
  std::size_t width = family == "mlp" ? 64 : 12;
  Activation act = Activation::kSigmoid;
  if (family != "mlp" && family != "lenet-lite") {
    throw ArchError("arch: unknown family '" + std::string(family) +
                    "' (expected mlp or lenet-lite)");
  }
  std::string_view rest = colon == std::string_view::npos ? "" : text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? "" : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ArchError("arch: expected key=value, got '" + std::string(item) + "'");
    const std::string_view key = item.substr(0, eq), value = item.substr(eq + 1);
    if ((family == "mlp" && key == "h") || (family == "lenet-lite" && key == "c")) {
      width = parse_size(value, key);
    } else if (key == "act") {
      if (value == "sigmoid") {
        act = Activation::kSigmoid;
      } else if (value == "relu") {
        act = Activation::kRelu;
      } else {
        throw ArchError("arch: activation must be sigmoid or relu, got '" + std::string(value) + "'");
      }
    } else {
      throw ArchError("arch: unknown option '" + std::string(key) + "' for " + std::string(family));
    }
  }
  ArchSpec a = family == "mlp" ? mlp(input, width, classes, act) : lenet_lite(input, width, classes, act);
  if (act == Activation::kRelu) a.name += ",act=relu";
  a.validate();
  return a;
}

VictimModel init_model(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  VictimModel model;
  model.arch = arch;
  std::mt19937_64 rng(seed);
  for (const Shape& shape : arch.param_shapes()) {
    Tensor t(shape);
    // Bias shapes are [out]; the matching weight precedes it and sets fan_in.
    const std::size_t fan_in =
        shape.size() > 1 ? numel(shape) / shape[0]
                         : numel(model.params.back().shape()) / model.params.back().shape()[0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.data) v = u(rng);
    model.param_count += t.size();
    model.params.emplace_back(std::move(t));
  }
  return model;
}

void TargetGradient::validate(const VictimModel& model) const {
  if (g_star.size() != model.param_count) {
    throw std::invalid_argument("target gradient has " + std::to_string(g_star.size()) +
                                " entries, model has " + std::to_string(model.param_count) +
                                " parameters");
  }
  if (batch_size == 0) throw std::invalid_argument("target gradient: batch size is zero");
  for (double v : g_star) {
    if (!std::isfinite(v)) throw std::invalid_argument("target gradient: non-finite entry");
  }
}

ad::NodeRef logits(const VictimModel& model, const ad::NodeRef& images) {
  const ArchSpec& arch = model.arch;
  const Shape& s = images->shape();
  if (s.size() != 4 || Shape(s.begin() + 1, s.end()) != arch.input.shape()) {
    throw ad::ShapeError("logits: images " + shape_string(s) + " do not match input " +
                         shape_string(arch.input.shape()));
  }
  const std::size_t n = s[0];
  ad::NodeRef x = images;
  std::size_t p = 0;
  for (const LayerSpec& l : arch.layers) {
    switch (l.kind) {
      case LayerSpec::Kind::kFlatten:
        x = ad::reshape(x, {n, x->value().size() / n});
        break;
      case LayerSpec::Kind::kActivation:
        x = l.activation == Activation::kSigmoid ? ad::sigmoid(x) : ad::relu(x);
        break;
      case LayerSpec::Kind::kDense: {
        const ad::NodeRef& w = model.params[p++].node();
        const ad::NodeRef& b = model.params[p++].node();
        x = ad::add(ad::matmul(x, ad::transpose(w)), ad::expand(b, n, 1, {n, l.units}));
        break;
      }
      case LayerSpec::Kind::kConv2d: {
        const ad::NodeRef& w = model.params[p++].node();
        const ad::NodeRef& b = model.params[p++].node();
        x = ad::conv2d(x, w, l.stride);
        const Shape out = x->shape();
        x = ad::add(x, ad::expand(b, n, out[2] * out[3], out));
        break;
      }
    }
  }
  return x;
}

ad::NodeRef forward_loss(const VictimModel& model, const ad::NodeRef& images,
                         const ad::NodeRef& label_distributions) {
  const ad::NodeRef z = logits(model, images);
  if (label_distributions->shape() != z->shape()) {
    throw ad::ShapeError("forward_loss: labels " + shape_string(label_distributions->shape()) +
                         " vs logits " + shape_string(z->shape()));
  }
  const double n = static_cast<double>(z->shape()[0]);
  return ad::scale(ad::sum(ad::mul(label_distributions, ad::log_softmax(z))), -1.0 / n);
}

std::vector<ad::NodeRef> batch_mean_gradient(const VictimModel& model, const ad::NodeRef& images,
                                             const ad::NodeRef& label_distributions,
                                             bool create_graph) {
  return ad::differentiate(forward_loss(model, images, label_distributions), model.params,
                           create_graph);
}

GradientVector flatten(std::span<const ad::NodeRef> grads) {
  GradientVector out;
  for (const auto& g : grads) out.insert(out.end(), g->value().data.begin(), g->value().data.end());
  return out;
}

std::vector<Tensor> unflatten(const VictimModel& model, std::span<const double> flat) {
  if (flat.size() != model.param_count) {
    throw std::invalid_argument("unflatten: " + std::to_string(flat.size()) + " values for " +
                                std::to_string(model.param_count) + " parameters");
  }
  std::vector<Tensor> out;
  std::size_t at = 0;
  for (const auto& p : model.params) {
    const std::size_t n = p.data().size();
    out.emplace_back(p.shape(), std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(at),
                                                    flat.begin() + static_cast<std::ptrdiff_t>(at + n)));
    at += n;
  }
  return out;
}

}  // namespace gradsense::victim
