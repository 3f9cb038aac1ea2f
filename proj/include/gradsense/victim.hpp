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

#ifndef GRADSENSE_VICTIM_HPP_
#define GRADSENSE_VICTIM_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradsense/autodiff.hpp"
#include "gradsense/tensor.hpp"

namespace gradsense {

// Flattened concatenation of all parameter gradients in canonical order.
using GradientVector = std::vector<double>;

namespace victim {

class ArchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Activation { kSigmoid, kRelu };

struct LayerSpec {
  enum class Kind { kDense, kConv2d, kActivation, kFlatten };

  Kind kind = Kind::kFlatten;
  std::size_t units = 0;  // dense units or conv output channels
  std::size_t kernel = 0;
  std::size_t stride = 1;
  Activation activation = Activation::kSigmoid;

  static LayerSpec dense(std::size_t units);
  static LayerSpec conv2d(std::size_t out_channels, std::size_t kernel, std::size_t stride);
  static LayerSpec activate(Activation a);
  static LayerSpec flatten();
};

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  Shape shape() const { return {channels, height, width}; }
  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

struct ArchSpec {
  std::string name;
  ImageShape input;
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 0;

  // Throws ArchError unless the layer shapes compose and end in num_classes.
  void validate() const;
  // Parameter tensor shapes in canonical order (layer, then weight, bias).
  std::vector<Shape> param_shapes() const;
};

// flatten -> dense(hidden) -> act -> dense(classes)
ArchSpec mlp(ImageShape input, std::size_t hidden, std::size_t classes,
             Activation act = Activation::kSigmoid);
// conv(c,5,2) -> act -> conv(c,5,2) -> act -> flatten -> dense(classes)
ArchSpec lenet_lite(ImageShape input, std::size_t channels, std::size_t classes,
                    Activation act = Activation::kSigmoid);

// "mlp:h=64", "lenet-lite:c=12", optionally followed by ",act=relu".
ArchSpec parse_arch(std::string_view text, ImageShape input, std::size_t classes);

// Architecture plus parameters. Immutable after init_model; copies share the
// parameter leaves, so a model may be read from several threads.
struct VictimModel {
  ArchSpec arch;
  std::vector<autodiff::Variable> params;
  std::size_t param_count = 0;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
VictimModel init_model(const ArchSpec& arch, std::uint64_t seed);

// What the server observes: the batch-mean gradient and the batch size.
struct TargetGradient {
  GradientVector g_star;
  std::size_t batch_size = 0;

  void validate(const VictimModel& model) const;
};

// images: [N, C, H, W]; returns logits [N, num_classes].
autodiff::NodeRef logits(const VictimModel& model, const autodiff::NodeRef& images);

// Mean over the batch of -sum_c p_c log softmax(logits)_c.
// label_distributions: [N, num_classes].
autodiff::NodeRef forward_loss(const VictimModel& model, const autodiff::NodeRef& images,
                               const autodiff::NodeRef& label_distributions);

// Gradient of forward_loss w.r.t. every parameter tensor, canonical order.
std::vector<autodiff::NodeRef> batch_mean_gradient(const VictimModel& model,
                                                   const autodiff::NodeRef& images,
                                                   const autodiff::NodeRef& label_distributions,
                                                   bool create_graph);

GradientVector flatten(std::span<const autodiff::NodeRef> grads);
// Splits a flat gradient into per-parameter tensors.
std::vector<Tensor> unflatten(const VictimModel& model, std::span<const double> flat);

}  // namespace victim
}  // namespace gradsense

#endif  // GRADSENSE_VICTIM_HPP_
