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

#include <cmath>
#include <string>

#include "gradsense/sag.hpp"

namespace gradsense::victim {

namespace ad = autodiff;

void LabeledBatch::validate(const ArchSpec& arch) const {
  if (images.empty()) throw std::invalid_argument("batch: empty");
  if (labels.size() != images.size()) {
    throw std::invalid_argument("batch: " + std::to_string(images.size()) + " images but " +
                                std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape != arch.input.shape()) {
      throw std::invalid_argument("batch: image " + std::to_string(i) + " has shape " +
                                  shape_string(images[i].shape));
    }
    for (double v : images[i].data) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("batch: image " + std::to_string(i) + " leaves [0,1]");
      }
    }
    const auto& p = labels[i];
    if (p.size() != arch.num_classes) {
      throw std::invalid_argument("batch: label " + std::to_string(i) + " has length " +
                                  std::to_string(p.size()));
    }
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw std::invalid_argument("batch: negative label mass");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("batch: label " + std::to_string(i) + " sums to " +
                                  std::to_string(total));
    }
  }
}

LabeledBatch LabeledBatch::with_class_labels(std::vector<Tensor> images,
                                             const std::vector<std::size_t>& classes,
                                             std::size_t num_classes) {
  LabeledBatch b;
  b.images = std::move(images);
  for (std::size_t c : classes) {
    if (c >= num_classes) {
      throw std::invalid_argument("batch: class " + std::to_string(c) + " >= " +
                                  std::to_string(num_classes));
    }
    std::vector<double> p(num_classes, 0.0);
    p[c] = 1.0;
    b.labels.push_back(std::move(p));
  }
  return b;
}

ad::NodeRef LabeledBatch::images_node() const {
  std::vector<ad::NodeRef> parts;
  parts.reserve(images.size());
  for (const Tensor& t : images) parts.push_back(ad::constant(t));
  return ad::stack(parts);
}

ad::NodeRef LabeledBatch::labels_node() const {
  const std::size_t c = labels.empty() ? 0 : labels.front().size();
  Tensor t(Shape{labels.size(), c});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::copy(labels[i].begin(), labels[i].end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return ad::constant(std::move(t));
}

std::vector<GradientVector> per_sample_gradients(const VictimModel& model, const LabeledBatch& batch) {
  batch.validate(model.arch);
  std::vector<GradientVector> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    LabeledBatch one;
    one.images = {batch.images[i]};
    one.labels = {batch.labels[i]};
    out.push_back(flatten(batch_mean_gradient(model, one.images_node(), one.labels_node(), false)));
  }
  return out;
}

TargetGradient sag_capture(const VictimModel& model, const LabeledBatch& hidden_batch) {
  hidden_batch.validate(model.arch);
  TargetGradient t;
  t.g_star = flatten(batch_mean_gradient(model, hidden_batch.images_node(),
                                         hidden_batch.labels_node(), false));
  t.batch_size = hidden_batch.size();
  t.validate(model);
  return t;
}

}  // namespace gradsense::victim
