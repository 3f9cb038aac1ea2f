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

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gradsense/optim.hpp"

namespace gradsense::optim {

void adam_step(AdamState& s, std::span<const double> g, std::vector<double>& x) {
  if (g.size() != x.size()) {
    throw std::invalid_argument("adam_step: gradient has " + std::to_string(g.size()) +
                                " entries, variables have " + std::to_string(x.size()));
  }
  for (double v : g) {
    if (!std::isfinite(v)) throw std::domain_error("adam_step: non-finite gradient");
  }
  if (s.m.empty()) {
    s.m.assign(x.size(), 0.0);
    s.v.assign(x.size(), 0.0);
  }
  ++s.t;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
    x[i] -= s.learning_rate * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + s.epsilon);
  }
}

std::string OptimizerSpec::to_string() const {
  if (method == Method::kLbfgs) return "lbfgs";
  std::ostringstream os;
  os << "adam:lr=" << learning_rate;
  return os.str();
}

OptimizerSpec parse_optimizer(std::string_view text) {
  const std::string err = "unknown optimizer '" + std::string(text) +
                          "' (allowed: lbfgs, adam:lr=<value>)";
  if (text == "lbfgs") return {};
  if (text == "adam") return {Method::kAdam, 0.1};
  constexpr std::string_view prefix = "adam:lr=";
  if (text.substr(0, prefix.size()) != prefix) throw std::invalid_argument(err);
  const std::string num(text.substr(prefix.size()));
  char* end = nullptr;
  const double lr = std::strtod(num.c_str(), &end);
  if (num.empty() || end != num.c_str() + num.size() || !(lr > 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("optimizer '" + std::string(text) +
                                "': learning rate must be a positive number");
  }
  return {Method::kAdam, lr};
}

}  // namespace gradsense::optim
