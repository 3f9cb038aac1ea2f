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
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "gradsense/objective.hpp"

namespace gradsense::objective {

namespace {

constexpr std::size_t kMaxBatch = 10000;

constexpr std::array<std::pair<Strategy, std::string_view>, 5> kStrategies{{
    {Strategy::kConstant, "constant"},
    {Strategy::kFracTotal, "frac_total"},
    {Strategy::kFracConst, "frac_const"},
    {Strategy::kRevTotal, "rev_total"},
    {Strategy::kRevConst, "rev_const"},
}};

// ceil(num / den) for den > 0 and num of either sign.
std::int64_t ceil_div(std::int64_t num, std::int64_t den) {
  const std::int64_t q = num / den;
  return (num % den != 0 && num > 0) ? q + 1 : q;
}

}  // namespace

BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    r *= n - i;
    r /= i + 1;  // exact: r is now C(n, i + 1)
  }
  return r;
}

double adaptive_coefficient(std::size_t batch, std::size_t subset) {
  if (batch == 0 || batch > kMaxBatch) {
    throw std::invalid_argument("adaptive_coefficient: batch size " + std::to_string(batch) +
                                " outside [1, " + std::to_string(kMaxBatch) + "]");
  }
  if (subset == 0 || subset > batch) {
    throw std::invalid_argument("adaptive_coefficient: subset size " + std::to_string(subset) +
                                " outside [1, " + std::to_string(batch) + "]");
  }
  BigInt num = 2 * binomial(batch - 1, subset - 1);
  BigInt den = binomial(batch, subset) * subset * subset;
  const BigInt g = boost::multiprecision::gcd(num, den);
  num /= g;
  den /= g;
  constexpr std::uint64_t kExact = std::uint64_t{1} << 53;
  if (num <= kExact && den <= kExact) {
    return num.convert_to<double>() / den.convert_to<double>();
  }
  using Rational = boost::multiprecision::cpp_rational;
  return Rational(num, den).convert_to<double>();
}

std::string_view strategy_name(Strategy s) {
  for (const auto& [k, name] : kStrategies) {
    if (k == s) return name;
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  std::string allowed;
  for (const auto& [k, n] : kStrategies) {
    if (n == name) return k;
    allowed += allowed.empty() ? "" : ", ";
    allowed += n;
  }
  throw std::invalid_argument("unknown schedule strategy '" + std::string(name) +
                              "' (allowed: " + allowed + ")");
}

void ScheduleSpec::validate(std::size_t batch) const {
  if (total_iters == 0) throw std::invalid_argument("schedule: total_iters must be positive");
  if (strategy == Strategy::kConstant && (constant_S == 0 || constant_S > batch)) {
    throw std::invalid_argument("schedule: constant_S = " + std::to_string(constant_S) +
                                " must lie in [1, " + std::to_string(batch) + "]");
  }
  if ((strategy == Strategy::kFracConst || strategy == Strategy::kRevConst) && E_script == 0) {
    throw std::invalid_argument("schedule: E_script must be positive");
  }
}

std::size_t schedule_subset_size(const ScheduleSpec& spec, std::size_t e, std::size_t batch) {
  if (batch == 0) throw std::invalid_argument("schedule: empty batch");
  if (e >= spec.total_iters) {
    throw std::out_of_range("schedule: iteration " + std::to_string(e) + " >= total_iters " +
                            std::to_string(spec.total_iters));
  }
  const auto b = static_cast<std::int64_t>(batch);
  const auto ei = static_cast<std::int64_t>(e);
  const auto total = static_cast<std::int64_t>(spec.total_iters);
  const auto horizon = static_cast<std::int64_t>(std::max<std::size_t>(spec.E_script, 1));
  std::int64_t s = 1;
  switch (spec.strategy) {
    case Strategy::kConstant: s = static_cast<std::int64_t>(spec.constant_S); break;
    case Strategy::kFracTotal: s = ceil_div(b * (ei + 1), total); break;
    case Strategy::kFracConst: s = ceil_div(b * (ei + 1), horizon); break;
    case Strategy::kRevTotal: s = ceil_div(b * (total - ei), total); break;
    case Strategy::kRevConst: s = ceil_div(b * (horizon - ei), horizon); break;
  }
  return static_cast<std::size_t>(std::clamp<std::int64_t>(s, 1, b));
}

SubsetIndexSet sample_subset(std::mt19937_64& rng, std::size_t batch, std::size_t subset) {
  if (subset == 0 || subset > batch) {
    throw std::invalid_argument("sample_subset: S = " + std::to_string(subset) +
                                " outside [1, " + std::to_string(batch) + "]");
  }
  std::vector<std::size_t> all(batch);
  std::iota(all.begin(), all.end(), std::size_t{0});
  SubsetIndexSet out;
  out.indices.reserve(subset);
  // Selection sampling keeps the input order, so the result is sorted.
  std::sample(all.begin(), all.end(), std::back_inserter(out.indices), subset, rng);
  return out;
}

SubsetIndexSet full_subset(std::size_t batch) {
  SubsetIndexSet out;
  out.indices.resize(batch);
  std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
  return out;
}

void MixParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha = " + std::to_string(alpha) + " must lie in [0, 1]");
  }
  if (!(tv_weight >= 0.0) || tv_weight == std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("tv_weight = " + std::to_string(tv_weight) +
                                " must be finite and non-negative");
  }
}

}  // namespace gradsense::objective
