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

#ifndef GRADSENSE_VERIFY_HPP_
#define GRADSENSE_VERIFY_HPP_

// Brute-force checks of the subset bound chain. Unlike the attack code this
// module is handed ground-truth per-sample gradients.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gradsense/sag.hpp"

namespace gradsense::verify {

inline constexpr std::size_t kMaxEnumerationBatch = 12;
inline constexpr double kSlack = 1e-12;

struct OracleInputs {
  std::vector<GradientVector> dummy_grads;   // \hat g_j
  std::vector<GradientVector> target_grads;  // g_j

  std::size_t batch() const { return dummy_grads.size(); }
  // Throws std::invalid_argument on mismatched shapes or B outside [1, 12].
  void validate() const;
};

// Per-sample gradients of a dummy and a hidden batch under one model.
OracleInputs oracle_inputs(const victim::VictimModel& model, const victim::LabeledBatch& dummy,
                           const victim::LabeledBatch& hidden);

// All S-subsets of {0..B-1} in lexicographic order.
std::vector<std::vector<std::size_t>> all_subsets(std::size_t batch, std::size_t subset);

// (1/S^2) ||sum_{j in subset} (\hat g_j - g_j)||^2 for every subset, lexicographic.
std::vector<double> enumerate_subset_losses(const OracleInputs& in, std::size_t subset);

struct ChainReport {
  double x_tilde = 0.0;
  double x_tilde_o = 0.0;
  double x_hat = 0.0;
  bool holds_tilde_le_o = false;
  bool holds_o_le_hat = false;
  std::size_t B = 0;
  std::size_t S = 0;
};

ChainReport oracle_chain_probe(const OracleInputs& in, std::size_t subset);

// One flag per subset (lexicographic): ||sum_sub d||^2 <=
// 2 (||sum_sub \hat g - sum_all g||^2 + ||sum_complement g||^2).
std::vector<bool> triangle_step_check(const OracleInputs& in, std::size_t subset);

// Exact check of 2 C(B-1,S-1) / (C(B,S) S^2) == 2 / (B S) for 1 <= S <= B <= b_max,
// plus agreement of the floating-point coefficient.
bool coefficient_identity_check(std::size_t b_max);

// `a <= b` up to kSlack relative to the larger magnitude.
bool le_with_slack(double a, double b);

struct CheckResult {
  std::string name;
  bool passed = false;
  bool asserted = true;  // false: reported only
  std::string detail;
};

struct SuiteOptions {
  std::size_t identity_b_max = 64;
  std::size_t chain_b_max = 6;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
};

std::vector<CheckResult> run_suite(const SuiteOptions& options);

}  // namespace gradsense::verify

#endif  // GRADSENSE_VERIFY_HPP_
