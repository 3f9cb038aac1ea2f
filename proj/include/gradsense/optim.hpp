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

#ifndef GRADSENSE_OPTIM_HPP_
#define GRADSENSE_OPTIM_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gradsense::optim {

struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;

  bool finite() const;
};

// Must be deterministic for the duration of one step.
using Objective = std::function<Evaluation(std::span<const double>)>;

struct CurvaturePair {
  std::vector<double> s;  // x_{k+1} - x_k
  std::vector<double> y;  // g_{k+1} - g_k
};

struct LbfgsState {
  std::size_t m = 10;
  double step_init = 1.0;
  std::size_t max_evals = 20;
  double c1 = 1e-4;
  std::deque<CurvaturePair> history;
  // s.y / y.y of the most recent stored pair; survives history resets so a
  // restarted steepest-descent step keeps a sensible length. Zero until the
  // first pair is stored.
  double gamma = 0.0;
};

struct StepReport {
  bool accepted = false;
  // False when the start point itself produced a non-finite value or gradient.
  bool finite_start = true;
  double value = 0.0;       // objective at the returned x
  double start_value = 0.0;
  std::size_t evaluations = 0;
};

// One two-loop direction plus Armijo backtracking (halving). A trial also
// passes when its value has not increased and its directional derivative
// satisfies the gradient form of the Armijo test, which is exact on quadratics
// and immune to cancellation in f. When the first trial passes, one secant
// step along the direction is tried and kept if it is also acceptable and
// lower. On rejection x is left unchanged and the history is cleared, so the
// next call starts from steepest descent.
StepReport lbfgs_step(LbfgsState& state, const Objective& f, std::vector<double>& x);

struct AdamState {
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

// Throws std::domain_error on a non-finite gradient and std::invalid_argument
// on a dimension mismatch.
void adam_step(AdamState& state, std::span<const double> gradient, std::vector<double>& x);

enum class Method { kLbfgs, kAdam };

struct OptimizerSpec {
  Method method = Method::kLbfgs;
  double learning_rate = 0.1;

  std::string to_string() const;
};

// "lbfgs" or "adam:lr=<v>".
OptimizerSpec parse_optimizer(std::string_view text);

}  // namespace gradsense::optim

#endif  // GRADSENSE_OPTIM_HPP_
