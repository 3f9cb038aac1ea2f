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

#ifndef GRADSENSE_SAG_HPP_
#define GRADSENSE_SAG_HPP_

// The single-round averaged-gradient oracle. This is the only place where the
// private batch meets the model; attack code links against victim.hpp alone
// and receives nothing but a TargetGradient.

#include <cstddef>
#include <vector>

#include "gradsense/victim.hpp"

namespace gradsense::victim {

// A private batch. Labels are probability vectors; one-hot for class labels.
struct LabeledBatch {
  std::vector<Tensor> images;
  std::vector<std::vector<double>> labels;

  std::size_t size() const { return images.size(); }
  void validate(const ArchSpec& arch) const;

  static LabeledBatch with_class_labels(std::vector<Tensor> images,
                                        const std::vector<std::size_t>& classes,
                                        std::size_t num_classes);

  autodiff::NodeRef images_node() const;
  autodiff::NodeRef labels_node() const;
};

std::vector<GradientVector> per_sample_gradients(const VictimModel& model,
                                                 const LabeledBatch& batch);

// g* of the batch, detached.
TargetGradient sag_capture(const VictimModel& model, const LabeledBatch& hidden_batch);

}  // namespace gradsense::victim

#endif  // GRADSENSE_SAG_HPP_
