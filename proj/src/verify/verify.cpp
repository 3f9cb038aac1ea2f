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
#include <random>
#include <sstream>
#include <stdexcept>

#include "gradsense/objective.hpp"
#include "gradsense/verify.hpp"

namespace gradsense::verify {

namespace ob = gradsense::objective;

namespace {

double sq_norm(const GradientVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

GradientVector sum_of(const std::vector<GradientVector>& gs, const std::vector<std::size_t>& idx, std::size_t dim) {
  GradientVector out(dim, 0.0);
  for (std::size_t j : idx)
    for (std::size_t k = 0; k < dim; ++k) out[k] += gs[j][k];
  return out;
}

GradientVector diff_sum(const OracleInputs& in, const std::vector<std::size_t>& idx) {
  const std::size_t dim = in.dummy_grads.front().size();
  GradientVector out(dim, 0.0);
  for (std::size_t j : idx)
    for (std::size_t k = 0; k < dim; ++k) out[k] += in.dummy_grads[j][k] - in.target_grads[j][k];
  return out;
}

void require_subset(const OracleInputs& in, std::size_t s) {
  in.validate();
  if (s == 0 || s > in.batch()) {
    throw std::invalid_argument("subset size " + std::to_string(s) + " outside [1, " +
                                std::to_string(in.batch()) + "]");
  }
}

OracleInputs random_inputs(std::mt19937_64& rng, std::size_t b, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  OracleInputs in;
  for (std::size_t j = 0; j < b; ++j) {
    GradientVector d(dim), t(dim);
    for (double& v : d) v = n(rng);
    for (double& v : t) v = n(rng);
    in.dummy_grads.push_back(std::move(d));
    in.target_grads.push_back(std::move(t));
  }
  return in;
}

}  // namespace

void OracleInputs::validate() const {
  if (dummy_grads.empty() || dummy_grads.size() > kMaxEnumerationBatch) {
    throw std::invalid_argument("oracle inputs: batch " + std::to_string(dummy_grads.size()) +
                                " outside [1, " + std::to_string(kMaxEnumerationBatch) + "]");
  }
  if (target_grads.size() != dummy_grads.size()) {
    throw std::invalid_argument("oracle inputs: " + std::to_string(dummy_grads.size()) + " dummy vs " +
                                std::to_string(target_grads.size()) + " target gradients");
  }
  const std::size_t dim = dummy_grads.front().size();
  for (std::size_t j = 0; j < dummy_grads.size(); ++j) {
    if (dummy_grads[j].size() != dim || target_grads[j].size() != dim) {
      throw std::invalid_argument("oracle inputs: gradient " + std::to_string(j) + " has the wrong length");
    }
  }
}

OracleInputs oracle_inputs(const victim::VictimModel& model, const victim::LabeledBatch& dummy,
                           const victim::LabeledBatch& hidden) {
  OracleInputs in{victim::per_sample_gradients(model, dummy), victim::per_sample_gradients(model, hidden)};
  in.validate();
  return in;
}

std::vector<std::vector<std::size_t>> all_subsets(std::size_t b, std::size_t s) {
  std::vector<std::vector<std::size_t>> out;
  if (s == 0 || s > b) return out;
  std::vector<std::size_t> idx(s);
  for (std::size_t i = 0; i < s; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    std::size_t i = s;
    while (i-- > 0) {
      if (idx[i] != i + b - s) break;
      if (i == 0) return out;
    }
    ++idx[i];
    for (std::size_t k = i + 1; k < s; ++k) idx[k] = idx[k - 1] + 1;
  }
}

std::vector<double> enumerate_subset_losses(const OracleInputs& in, std::size_t s) {
  require_subset(in, s);
  std::vector<double> out;
  const double s2 = static_cast<double>(s * s);
  for (const auto& idx : all_subsets(in.batch(), s)) out.push_back(sq_norm(diff_sum(in, idx)) / s2);
  return out;
}

bool le_with_slack(double a, double b) {
  return a <= b + kSlack * std::max({1.0, std::abs(a), std::abs(b)});
}

ChainReport oracle_chain_probe(const OracleInputs& in, std::size_t s) {
  require_subset(in, s);
  const std::size_t b = in.batch();
  ChainReport r;
  r.B = b;
  r.S = s;
  double total = 0.0;
  for (const auto& idx : all_subsets(b, s)) total += sq_norm(diff_sum(in, idx));
  const double denom = static_cast<double>(b * b) * ob::binomial(b, s).convert_to<double>() *
                       ob::binomial(b - 1, s - 1).convert_to<double>();
  r.x_tilde = total / denom;
  GradientVector mean = diff_sum(in, all_subsets(b, b).front());
  for (double& v : mean) v /= static_cast<double>(b);
  r.x_hat = sq_norm(mean);
  r.x_tilde_o = ob::adaptive_coefficient(b, s) * r.x_hat;
  r.holds_tilde_le_o = le_with_slack(r.x_tilde, r.x_tilde_o);
  r.holds_o_le_hat = le_with_slack(r.x_tilde_o, r.x_hat);
  return r;
}

std::vector<bool> triangle_step_check(const OracleInputs& in, std::size_t s) {
  require_subset(in, s);
  const std::size_t b = in.batch(), dim = in.dummy_grads.front().size();
  std::vector<std::size_t> every(b);
  for (std::size_t i = 0; i < b; ++i) every[i] = i;
  const GradientVector all_targets = sum_of(in.target_grads, every, dim);
  std::vector<bool> out;
  for (const auto& idx : all_subsets(b, s)) {
    std::vector<std::size_t> comp;
    std::set_difference(every.begin(), every.end(), idx.begin(), idx.end(), std::back_inserter(comp));
    GradientVector a = sum_of(in.dummy_grads, idx, dim);
    for (std::size_t k = 0; k < dim; ++k) a[k] -= all_targets[k];
    const double lhs = sq_norm(diff_sum(in, idx));
    const double rhs = 2.0 * (sq_norm(a) + sq_norm(sum_of(in.target_grads, comp, dim)));
    out.push_back(lhs <= rhs * (1.0 + kSlack));
  }
  return out;
}

bool coefficient_identity_check(std::size_t b_max) {
  if (b_max > 64) throw std::invalid_argument("coefficient identity range is limited to 64");
  for (std::size_t b = 1; b <= b_max; ++b) {
    for (std::size_t s = 1; s <= b; ++s) {
      // 2 C(B-1,S-1) / (C(B,S) S^2) == 2 / (B S), cross-multiplied.
      const ob::BigInt lhs = 2 * ob::binomial(b - 1, s - 1) * b * s;
      const ob::BigInt rhs = 2 * ob::binomial(b, s) * s * s;
      if (lhs != rhs) return false;
      if (ob::adaptive_coefficient(b, s) != 2.0 / static_cast<double>(b * s)) return false;
    }
  }
  return true;
}

std::vector<CheckResult> run_suite(const SuiteOptions& o) {
  if (o.chain_b_max < 2 || o.chain_b_max > kMaxEnumerationBatch) {
    throw std::invalid_argument("chain_b_max must lie in [2, " + std::to_string(kMaxEnumerationBatch) + "]");
  }
  std::vector<CheckResult> out;
  std::mt19937_64 rng(o.seed);
  auto pick_batch = [&] { return 2 + static_cast<std::size_t>(rng() % (o.chain_b_max - 1)); };

  {
    CheckResult c{"coefficient identity", coefficient_identity_check(o.identity_b_max), true,
                  "1 <= S <= B <= " + std::to_string(o.identity_b_max)};
    out.push_back(c);
  }
  {
    std::size_t bad = 0, probes = 0;
    for (std::size_t t = 0; t < o.trials; ++t) {
      const auto in = random_inputs(rng, pick_batch(), 6);
      for (std::size_t s = 1; s <= in.batch(); ++s) {
        ++probes;
        if (!oracle_chain_probe(in, s).holds_o_le_hat) ++bad;
      }
    }
    out.push_back({"chain tail (rescaled <= DLG)", bad == 0, true,
                   std::to_string(probes - bad) + "/" + std::to_string(probes) + " probes"});
  }
  {
    std::size_t bad = 0, subsets = 0;
    for (std::size_t t = 0; t < o.trials; ++t) {
      const auto in = random_inputs(rng, pick_batch(), 6);
      for (std::size_t s = 1; s <= in.batch(); ++s)
        for (bool ok : triangle_step_check(in, s)) {
          ++subsets;
          if (!ok) ++bad;
        }
    }
    out.push_back({"triangle step", bad == 0, true,
                   std::to_string(subsets - bad) + "/" + std::to_string(subsets) + " subsets"});
  }
  {
    OracleInputs in{{{1.0, 0.0}, {-1.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.0}}};
    const auto r = oracle_chain_probe(in, 1);
    std::ostringstream os;
    os << "X~ = " << r.x_tilde << ", X~o = " << r.x_tilde_o << ", holds = " << std::boolalpha << r.holds_tilde_le_o;
    out.push_back({"cancellation fixture (chain head fails by design)",
                   !r.holds_tilde_le_o && std::abs(r.x_tilde - 0.25) < kSlack && r.x_tilde_o == 0.0 && r.x_hat == 0.0,
                   true, os.str()});
  }
  {
    OracleInputs in{{{0.3, -0.2}, {0.1, 0.4}, {0.0, 1.0}}, {{0.3, -0.2}, {0.1, 0.4}, {0.0, 1.0}}};
    bool zero = true;
    for (std::size_t s = 1; s <= 3; ++s) {
      const auto r = oracle_chain_probe(in, s);
      zero = zero && r.x_tilde == 0.0 && r.x_tilde_o == 0.0 && r.x_hat == 0.0;
    }
    out.push_back({"identical per-sample fixture", zero, true, "all chain values zero"});
  }
  {
    OracleInputs in;
    for (int j = 0; j < 4; ++j) {
      in.dummy_grads.push_back({0.5, 1.5, -2.0});
      in.target_grads.push_back({0.0, 1.0, -1.0});
    }
    const auto r = oracle_chain_probe(in, 2);
    out.push_back({"equal-difference fixture (chain head holds)", r.holds_tilde_le_o, true,
                   "X~ = " + std::to_string(r.x_tilde) + ", X~o = " + std::to_string(r.x_tilde_o)});
  }
  {
    std::size_t holds = 0, probes = 0;
    for (std::size_t t = 0; t < o.trials; ++t) {
      const auto in = random_inputs(rng, pick_batch(), 6);
      for (std::size_t s = 1; s <= in.batch(); ++s) {
        ++probes;
        if (oracle_chain_probe(in, s).holds_tilde_le_o) ++holds;
      }
    }
    out.push_back({"chain head on random inputs", true, false,
                   std::to_string(holds) + "/" + std::to_string(probes) + " probes satisfy X~ <= X~o"});
  }
  return out;
}

}  // namespace gradsense::verify
