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

#ifndef GRADSENSE_OBJECTIVE_HPP_
#define GRADSENSE_OBJECTIVE_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gradsense/autodiff.hpp"
#include "gradsense/victim.hpp"

namespace gradsense::objective {

using BigInt = boost::multiprecision::cpp_int;

// C(n, k), exact. Zero when k > n.
BigInt binomial(std::uint64_t n, std::uint64_t k);

// 2 C(B-1, S-1) / (C(B, S) S^2), evaluated exactly and rounded once to double.
double adaptive_coefficient(std::size_t batch, std::size_t subset);

enum class Strategy { kConstant, kFracTotal, kFracConst, kRevTotal, kRevConst };

std::string_view strategy_name(Strategy s);
// Throws std::invalid_argument listing the accepted names.
Strategy parse_strategy(std::string_view name);

struct ScheduleSpec {
  Strategy strategy = Strategy::kConstant;
  std::size_t constant_S = 1;
  std::size_t E_script = 1;   // horizon for frac_const / rev_const
  std::size_t total_iters = 1;

  void validate(std::size_t batch) const;
};

std::size_t schedule_subset_size(const ScheduleSpec& spec, std::size_t e, std::size_t batch);

// Strictly increasing indices in [0, B).
struct SubsetIndexSet {
  std::vector<std::size_t> indices;
  std::size_t size() const { return indices.size(); }
};

SubsetIndexSet sample_subset(std::mt19937_64& rng, std::size_t batch, std::size_t subset);
SubsetIndexSet full_subset(std::size_t batch);

struct MixParams {
  double alpha = 0.999;
  double tv_weight = 0.005;

  void validate() const;
};

// The attacker's optimisation variables. Labels are kept as logits and
// pass through a softmax inside the loss.
struct DummyBatch {
  std::vector<autodiff::Variable> images;
  std::vector<autodiff::Variable> label_logits;

  std::size_t size() const { return images.size(); }
  // Images then logits, in sample order.
  std::vector<autodiff::Variable> variables() const;

  autodiff::NodeRef images_node(const SubsetIndexSet& subset) const;
  autodiff::NodeRef label_distributions(const SubsetIndexSet& subset) const;
  std::vector<Tensor> label_probabilities() const;
};

// Squared distance between a per-parameter gradient and the flat target.
autodiff::NodeRef gradient_distance(std::span<const autodiff::NodeRef> dummy_grad,
                                    const victim::TargetGradient& g_star);

autodiff::NodeRef dlg_loss(const victim::VictimModel& model, const DummyBatch& dummy,
                           const victim::TargetGradient& g_star);

autodiff::NodeRef subset_loss(const victim::VictimModel& model, const DummyBatch& dummy,
                              const SubsetIndexSet& subset,
                              const victim::TargetGradient& g_star);

// Smoothed isotropic total variation of images [N, C, H, W].
autodiff::NodeRef tv_prior(const autodiff::NodeRef& images);

inline constexpr double kTvEpsilon = 1e-8;

struct MagiaTerms {
  autodiff::NodeRef total;
  autodiff::NodeRef dlg;     // null when its weight is zero
  autodiff::NodeRef subset;  // null when its weight is zero
  autodiff::NodeRef tv;      // null when tv_weight is zero
  double coefficient = 0.0;
};

MagiaTerms magia_terms(const victim::VictimModel& model, const DummyBatch& dummy,
                       const SubsetIndexSet& subset, const victim::TargetGradient& g_star,
                       const MixParams& mix, std::size_t subset_size, std::size_t batch);

autodiff::NodeRef magia_total(const victim::VictimModel& model, const DummyBatch& dummy,
                              const SubsetIndexSet& subset, const victim::TargetGradient& g_star,
                              const MixParams& mix, std::size_t subset_size, std::size_t batch);

}  // namespace gradsense::objective

#endif  // GRADSENSE_OBJECTIVE_HPP_
