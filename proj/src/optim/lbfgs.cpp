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
#include <utility>
#include <numeric>

#include "gradsense/optim.hpp"

namespace gradsense::optim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// H_k g by the two-loop recursion, with H_0 = (s.y / y.y) I.
std::vector<double> two_loop(const std::deque<CurvaturePair>& hist, std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(hist.size());
  for (std::size_t k = hist.size(); k-- > 0;) {
    const auto& p = hist[k];
    alpha[k] = dot(p.s, q) / dot(p.y, p.s);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * p.y[i];
  }
  const auto& last = hist.back();
  const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
  for (double& v : q) v *= gamma;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    const auto& p = hist[k];
    const double beta = dot(p.y, q) / dot(p.y, p.s);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * p.s[i];
  }
  return q;
}

}  // namespace

bool Evaluation::finite() const {
  if (!std::isfinite(value)) return false;
  for (double g : gradient) {
    if (!std::isfinite(g)) return false;
  }
  return true;
}

StepReport lbfgs_step(LbfgsState& state, const Objective& f, std::vector<double>& x) {
  StepReport rep;
  const Evaluation e0 = f(x);
  rep.evaluations = 1;
  rep.start_value = rep.value = e0.value;
  if (!e0.finite() || e0.gradient.size() != x.size()) {
    state.history.clear();
    rep.finite_start = false;
    return rep;
  }
  const double gg = dot(e0.gradient, e0.gradient);
  if (gg == 0.0) {
    rep.accepted = true;
    return rep;
  }

  std::vector<double> d;
  if (!state.history.empty()) {
    d = two_loop(state.history, e0.gradient);
    for (double& v : d) v = -v;
  }
  double gd = d.empty() ? 0.0 : dot(e0.gradient, d);
  if (!(gd < 0.0) || !std::isfinite(gd)) {
    state.history.clear();
    d.assign(e0.gradient.begin(), e0.gradient.end());
    for (double& v : d) v = -v;
    gd = -gg;
  }
  double t = state.step_init;
  if (state.history.empty()) {
    t = state.gamma > 0.0 ? state.gamma * state.step_init : state.step_init / std::sqrt(gg);
  }

  auto acceptable = [&](const Evaluation& e, double step) {
    if (!e.finite() || e.gradient.size() != x.size()) return false;
    if (e.value <= e0.value + state.c1 * step * gd) return true;
    return e.value <= e0.value && dot(e.gradient, d) <= (2.0 * state.c1 - 1.0) * gd;
  };
  auto try_step = [&](double step) {
    std::vector<double> trial(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + step * d[i];
    ++rep.evaluations;
    return std::pair{trial, f(trial)};
  };

  for (std::size_t k = 0; k < state.max_evals; ++k, t *= 0.5) {
    auto [trial, e] = try_step(t);
    if (!acceptable(e, t)) continue;

    if (k == 0 && state.max_evals > 1) {
      // Minimiser of the quadratic through the two directional derivatives.
      const double gtd = dot(e.gradient, d);
      if (gtd > gd) {
        const double ts = std::clamp(t * gd / (gd - gtd), 0.1 * t, 10.0 * t);
        if (std::abs(ts - t) > 1e-3 * t) {
          auto [trial2, e2] = try_step(ts);
          if (acceptable(e2, ts) && e2.value <= e.value) {
            trial = std::move(trial2);
            e = std::move(e2);
          }
        }
      }
    }

    CurvaturePair p{std::vector<double>(x.size()), std::vector<double>(x.size())};
    for (std::size_t i = 0; i < x.size(); ++i) {
      p.s[i] = trial[i] - x[i];
      p.y[i] = e.gradient[i] - e0.gradient[i];
    }
    const double sy = dot(p.s, p.y);
    const double yy = dot(p.y, p.y);
    if (sy > 1e-10 * std::sqrt(dot(p.s, p.s) * yy)) {
      state.gamma = sy / yy;
      if (state.m > 0) {
        state.history.push_back(std::move(p));
        while (state.history.size() > state.m) state.history.pop_front();
      }
    }
    x = std::move(trial);
    rep.accepted = true;
    rep.value = e.value;
    return rep;
  }
  state.history.clear();
  return rep;
}

}  // namespace gradsense::optim
