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

#ifndef GRADSENSE_ATTACK_HPP_
#define GRADSENSE_ATTACK_HPP_

// Attack engines. Inputs are limited to the observed gradient, the model and
// the configuration.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradsense/objective.hpp"
#include "gradsense/optim.hpp"
#include "gradsense/victim.hpp"

namespace gradsense::attack {

using objective::DummyBatch;

// Raised when an iteration cannot be evaluated; the message names the
// iteration.
class AttackError : public std::runtime_error {
 public:
  AttackError(std::size_t iteration, const std::string& what);
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

struct AttackConfig {
  std::size_t batch_size = 1;
  std::size_t iterations = 300;
  double alpha = 0.999;
  double tv_weight = 0.005;
  // total_iters is taken from `iterations`.
  objective::ScheduleSpec schedule;
  optim::OptimizerSpec optimizer;
  std::uint64_t seed = 0;
  bool clamp_images = false;
  std::size_t record_every = 50;  // 0 disables snapshots
  bool timing = true;             // false records zero wall times

  // Requires iterations >= 1.
  void validate() const;
  objective::ScheduleSpec effective_schedule() const;
};

struct Snapshot {
  std::size_t iteration = 0;  // number of completed iterations
  std::vector<Tensor> images;
};

struct AttackResult {
  std::vector<Tensor> final_images;
  std::vector<Tensor> final_label_distributions;
  std::vector<double> loss_trace;         // objective value after each iteration
  std::vector<std::size_t> per_iteration_S;
  std::vector<double> iteration_seconds;
  std::vector<Snapshot> snapshots;
  std::size_t rejected_steps = 0;
  std::size_t evaluations = 0;
  std::uint64_t seed = 0;

  double mean_iteration_seconds() const;
};

// Called after every iteration with the flattened dummy variables
// (images, then label logits).
using IterateObserver = std::function<void(std::size_t iteration, std::span<const double> x)>;

// Image entries ~ U(0, 1), label logits ~ N(0, 1).
DummyBatch init_dummy(std::mt19937_64& rng, std::size_t batch, const victim::ArchSpec& arch);

// The dummy generator for a run seed; subset sampling uses a separate stream.
std::mt19937_64 init_stream(std::uint64_t seed);
std::mt19937_64 subset_stream(std::uint64_t seed);

AttackResult run_magia(const AttackConfig& config, const victim::TargetGradient& g_star,
                       const victim::VictimModel& model, const IterateObserver& observer = {});

AttackResult run_dlg(const AttackConfig& config, const victim::TargetGradient& g_star,
                     const victim::VictimModel& model, const IterateObserver& observer = {});

}  // namespace gradsense::attack

#endif  // GRADSENSE_ATTACK_HPP_
