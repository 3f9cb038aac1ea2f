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
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "gradsense/attack.hpp"

namespace gradsense::attack {

namespace ad = gradsense::autodiff;
namespace ob = gradsense::objective;

AttackError::AttackError(std::size_t iteration, const std::string& what)
    : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

void AttackConfig::validate() const {
  if (iterations == 0) throw std::invalid_argument("iterations must be at least 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  ob::MixParams{alpha, tv_weight}.validate();
  effective_schedule().validate(batch_size);
}

ob::ScheduleSpec AttackConfig::effective_schedule() const {
  ob::ScheduleSpec s = schedule;
  s.total_iters = std::max<std::size_t>(iterations, 1);
  return s;
}

double AttackResult::mean_iteration_seconds() const {
  if (iteration_seconds.empty()) return 0.0;
  return std::accumulate(iteration_seconds.begin(), iteration_seconds.end(), 0.0) /
         static_cast<double>(iteration_seconds.size());
}

std::mt19937_64 init_stream(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0u};
  return std::mt19937_64(seq);
}

std::mt19937_64 subset_stream(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 1u};
  return std::mt19937_64(seq);
}

DummyBatch init_dummy(std::mt19937_64& rng, std::size_t batch, const victim::ArchSpec& arch) {
  if (batch == 0) throw std::invalid_argument("init_dummy: batch must be at least 1");
  arch.validate();
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  std::normal_distribution<double> logit(0.0, 1.0);
  DummyBatch d;
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor img(arch.input.shape());
    for (double& v : img.data) v = pixel(rng);
    d.images.emplace_back(std::move(img));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor l({arch.num_classes});
    for (double& v : l.data) v = logit(rng);
    d.label_logits.emplace_back(std::move(l));
  }
  return d;
}

namespace {

// Packs the dummy variables into one flat vector and back.
class Packing {
 public:
  explicit Packing(std::vector<ad::Variable> vars) : vars_(std::move(vars)) {
    for (const auto& v : vars_) size_ += v.data().size();
  }

  std::vector<double> gather() const {
    std::vector<double> x;
    x.reserve(size_);
    for (const auto& v : vars_) x.insert(x.end(), v.data().data.begin(), v.data().data.end());
    return x;
  }

  void scatter(std::span<const double> x) {
    std::size_t off = 0;
    for (auto& v : vars_) {
      const std::size_t n = v.data().size();
      v.set_data(x.subspan(off, n));
      off += n;
    }
  }

  const std::vector<ad::Variable>& vars() const { return vars_; }

 private:
  std::vector<ad::Variable> vars_;
  std::size_t size_ = 0;
};

// Builds the loss for one iteration; the returned closure must be
// deterministic until the next call.
using IterationLoss = std::function<std::function<ad::NodeRef()>(std::size_t e, std::size_t& S)>;

AttackResult run(const AttackConfig& config, const victim::TargetGradient& g_star,
                 const victim::VictimModel& model, const IterateObserver& observer,
                 DummyBatch& dummy, const IterationLoss& loss_for) {
  if (config.iterations > 0) config.validate();
  g_star.validate(model);
  if (g_star.batch_size != config.batch_size) {
    throw std::invalid_argument("target gradient was taken over " + std::to_string(g_star.batch_size) +
                                " samples, config batch_size is " + std::to_string(config.batch_size));
  }
  AttackResult res;
  res.seed = config.seed;
  Packing pack(dummy.variables());
  std::vector<double> x = pack.gather();
  optim::LbfgsState lbfgs;
  optim::AdamState adam;
  adam.learning_rate = config.optimizer.learning_rate;

  for (std::size_t e = 0; e < config.iterations; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t S = config.batch_size;
    const auto build = loss_for(e, S);
    std::string failure;
    auto f = [&](std::span<const double> v) {
      pack.scatter(v);
      try {
        const auto loss = build();
        const auto grads = ad::differentiate(loss, pack.vars(), false);
        optim::Evaluation ev{loss->value().item(), {}};
        ev.gradient.reserve(v.size());
        for (const auto& g : grads) ev.gradient.insert(ev.gradient.end(), g->value().data.begin(), g->value().data.end());
        return ev;
      } catch (const ad::NonFiniteError& err) {
        failure = err.what();
        return optim::Evaluation{std::numeric_limits<double>::quiet_NaN(), {}};
      }
    };

    double value = 0.0;
    if (config.optimizer.method == optim::Method::kLbfgs) {
      const auto rep = optim::lbfgs_step(lbfgs, f, x);
      res.evaluations += rep.evaluations;
      if (!rep.finite_start) {
        throw AttackError(e, "non-finite loss" + (failure.empty() ? std::string() : " (" + failure + ")"));
      }
      if (!rep.accepted) ++res.rejected_steps;
      value = rep.value;
    } else {
      const auto ev = f(x);
      res.evaluations += 1;
      if (!ev.finite()) {
        throw AttackError(e, "non-finite loss" + (failure.empty() ? std::string() : " (" + failure + ")"));
      }
      optim::adam_step(adam, ev.gradient, x);
      value = ev.value;
    }
    if (config.clamp_images) {
      const std::size_t pixels = config.batch_size * model.arch.input.size();
      for (std::size_t i = 0; i < pixels; ++i) x[i] = std::clamp(x[i], 0.0, 1.0);
    }
    pack.scatter(x);

    res.loss_trace.push_back(value);
    res.per_iteration_S.push_back(S);
    res.iteration_seconds.push_back(
        config.timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0);
    if (observer) observer(e, x);
    if (config.record_every > 0 && (e + 1) % config.record_every == 0) {
      Snapshot snap{e + 1, {}};
      for (const auto& img : dummy.images) snap.images.push_back(img.data());
      res.snapshots.push_back(std::move(snap));
    }
  }
  for (const auto& img : dummy.images) res.final_images.push_back(img.data());
  res.final_label_distributions = dummy.label_probabilities();
  return res;
}

}  // namespace

AttackResult run_magia(const AttackConfig& config, const victim::TargetGradient& g_star,
                       const victim::VictimModel& model, const IterateObserver& observer) {
  auto init = init_stream(config.seed);
  auto pick = subset_stream(config.seed);
  DummyBatch dummy = init_dummy(init, config.batch_size, model.arch);
  const ob::ScheduleSpec schedule = config.effective_schedule();
  const ob::MixParams mix{config.alpha, config.tv_weight};
  return run(config, g_star, model, observer, dummy, [&](std::size_t e, std::size_t& S) {
    S = ob::schedule_subset_size(schedule, e, config.batch_size);
    auto subset = ob::sample_subset(pick, config.batch_size, S);
    return std::function<ad::NodeRef()>([&, subset = std::move(subset), S] {
      return ob::magia_total(model, dummy, subset, g_star, mix, S, config.batch_size);
    });
  });
}

AttackResult run_dlg(const AttackConfig& config, const victim::TargetGradient& g_star,
                     const victim::VictimModel& model, const IterateObserver& observer) {
  auto init = init_stream(config.seed);
  DummyBatch dummy = init_dummy(init, config.batch_size, model.arch);
  return run(config, g_star, model, observer, dummy, [&](std::size_t, std::size_t& S) {
    S = config.batch_size;
    return std::function<ad::NodeRef()>([&] {
      auto loss = ob::dlg_loss(model, dummy, g_star);
      if (config.tv_weight > 0.0) {
        const auto tv = ob::tv_prior(dummy.images_node(ob::full_subset(config.batch_size)));
        loss = ad::add(loss, ad::scale(tv, config.tv_weight));
      }
      return loss;
    });
  });
}

}  // namespace gradsense::attack
