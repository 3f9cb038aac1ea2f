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

#include <stdexcept>
#include <string>

#include "gradsense/objective.hpp"

namespace gradsense::objective {

namespace ad = gradsense::autodiff;

std::vector<ad::Variable> DummyBatch::variables() const {
  std::vector<ad::Variable> out(images.begin(), images.end());
  out.insert(out.end(), label_logits.begin(), label_logits.end());
  return out;
}

ad::NodeRef DummyBatch::images_node(const SubsetIndexSet& subset) const {
  std::vector<ad::NodeRef> parts;
  parts.reserve(subset.size());
  for (std::size_t i : subset.indices) parts.push_back(images.at(i).node());
  return ad::stack(parts);
}

ad::NodeRef DummyBatch::label_distributions(const SubsetIndexSet& subset) const {
  std::vector<ad::NodeRef> parts;
  parts.reserve(subset.size());
  for (std::size_t i : subset.indices) parts.push_back(label_logits.at(i).node());
  return ad::exp(ad::log_softmax(ad::stack(parts)));
}

std::vector<Tensor> DummyBatch::label_probabilities() const {
  std::vector<Tensor> out;
  out.reserve(label_logits.size());
  for (const auto& l : label_logits) {
    const auto row = ad::reshape(ad::constant(l.data()), {1, l.data().size()});
    out.push_back(Tensor({l.data().size()}, ad::exp(ad::log_softmax(row))->value().data));
  }
  return out;
}

ad::NodeRef gradient_distance(std::span<const ad::NodeRef> dummy_grad,
                              const victim::TargetGradient& g_star) {
  std::size_t total = 0;
  for (const auto& g : dummy_grad) total += g->value().size();
  if (total != g_star.g_star.size()) {
    throw std::invalid_argument("gradient length " + std::to_string(total) +
                                " does not match target length " +
                                std::to_string(g_star.g_star.size()));
  }
  ad::NodeRef acc;
  std::size_t offset = 0;
  for (const auto& g : dummy_grad) {
    const std::size_t n = g->value().size();
    Tensor target(g->shape(), std::vector<double>(g_star.g_star.begin() + static_cast<std::ptrdiff_t>(offset),
                                                  g_star.g_star.begin() + static_cast<std::ptrdiff_t>(offset + n)));
    offset += n;
    const auto d = ad::sub(g, ad::constant(std::move(target)));
    const auto sq = ad::sum(ad::mul(d, d));
    acc = acc ? ad::add(acc, sq) : sq;
  }
  if (!acc) throw std::invalid_argument("gradient_distance: empty gradient");
  return acc;
}

ad::NodeRef subset_loss(const victim::VictimModel& model, const DummyBatch& dummy,
                        const SubsetIndexSet& subset, const victim::TargetGradient& g_star) {
  if (subset.indices.empty()) throw std::invalid_argument("subset_loss: empty subset");
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (subset.indices[k] >= dummy.size() || (k > 0 && subset.indices[k] <= subset.indices[k - 1])) {
      throw std::invalid_argument("subset_loss: indices must be strictly increasing and below " +
                                  std::to_string(dummy.size()));
    }
  }
  const auto grads = victim::batch_mean_gradient(model, dummy.images_node(subset),
                                                 dummy.label_distributions(subset), true);
  return gradient_distance(grads, g_star);
}

ad::NodeRef dlg_loss(const victim::VictimModel& model, const DummyBatch& dummy,
                     const victim::TargetGradient& g_star) {
  return subset_loss(model, dummy, full_subset(dummy.size()), g_star);
}

ad::NodeRef tv_prior(const ad::NodeRef& images) {
  const Shape& s = images->shape();
  if (s.size() < 2 || s[s.size() - 1] < 2 || s[s.size() - 2] < 2) {
    throw std::invalid_argument("tv_prior: images must be at least 2x2, got " + shape_string(s));
  }
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  const auto dh = ad::diff(images, 1);
  const auto dv = ad::diff(images, 0);
  const auto mag = ad::power(ad::shift(ad::add(ad::mul(dh, dh), ad::mul(dv, dv)), kTvEpsilon), 0.5);
  // The bottom-right pixel of each plane has no forward neighbour at all.
  Tensor mask(s, 1.0);
  for (std::size_t p = 0; p < mask.size() / (h * w); ++p) mask[p * h * w + h * w - 1] = 0.0;
  return ad::sum(ad::mul(mag, ad::constant(std::move(mask))));
}

MagiaTerms magia_terms(const victim::VictimModel& model, const DummyBatch& dummy,
                       const SubsetIndexSet& subset, const victim::TargetGradient& g_star,
                       const MixParams& mix, std::size_t subset_size, std::size_t batch) {
  mix.validate();
  if (dummy.size() != batch) {
    throw std::invalid_argument("magia_total: dummy batch has " + std::to_string(dummy.size()) +
                                " samples, expected " + std::to_string(batch));
  }
  if (subset.size() != subset_size) {
    throw std::invalid_argument("magia_total: subset has " + std::to_string(subset.size()) +
                                " indices, expected " + std::to_string(subset_size));
  }
  MagiaTerms t;
  t.coefficient = adaptive_coefficient(batch, subset_size);
  ad::NodeRef mixed;
  if (mix.alpha > 0.0) {
    t.dlg = dlg_loss(model, dummy, g_star);
    mixed = ad::scale(t.dlg, mix.alpha);
  }
  if (mix.alpha < 1.0) {
    t.subset = subset_loss(model, dummy, subset, g_star);
    const auto part = ad::scale(t.subset, 1.0 - mix.alpha);
    mixed = mixed ? ad::add(mixed, part) : part;
  }
  t.total = ad::scale(mixed, t.coefficient);
  if (mix.tv_weight > 0.0) {
    t.tv = tv_prior(dummy.images_node(full_subset(batch)));
    t.total = ad::add(t.total, ad::scale(t.tv, mix.tv_weight));
  }
  return t;
}

ad::NodeRef magia_total(const victim::VictimModel& model, const DummyBatch& dummy,
                        const SubsetIndexSet& subset, const victim::TargetGradient& g_star,
                        const MixParams& mix, std::size_t subset_size, std::size_t batch) {
  return magia_terms(model, dummy, subset, g_star, mix, subset_size, batch).total;
}

}  // namespace gradsense::objective
