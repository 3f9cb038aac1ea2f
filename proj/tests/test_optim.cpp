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
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "gradsense/optim.hpp"

namespace op = gradsense::optim;

namespace {

op::Evaluation bowl(std::span<const double> x) {
  const double c[2] = {1.0, 2.0};
  op::Evaluation e;
  e.gradient.resize(2);
  for (int i = 0; i < 2; ++i) {
    e.value += (x[i] - c[i]) * (x[i] - c[i]);
    e.gradient[i] = 2.0 * (x[i] - c[i]);
  }
  return e;
}

op::Evaluation rosenbrock(std::span<const double> x) {
  const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
  return {a * a + 100.0 * b * b, {-2.0 * a - 400.0 * x[0] * b, 200.0 * b}};
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("quadratic bowl converges within 10 steps") {
  op::LbfgsState st;
  std::vector<double> x{0.0, 0.0};
  int steps = 0;
  while (steps < 10 && std::hypot(x[0] - 1.0, x[1] - 2.0) >= 1e-8) {
    REQUIRE(op::lbfgs_step(st, bowl, x).accepted);
    ++steps;
  }
  CHECK(std::hypot(x[0] - 1.0, x[1] - 2.0) < 1e-8);
  MESSAGE("steps: " << steps);
}

TEST_CASE("Rosenbrock from (-1.2, 1) within 200 steps, far ahead of steepest descent") {
  op::LbfgsState st;
  std::vector<double> x{-1.2, 1.0};
  double prev = rosenbrock(x).value;
  int steps = 0;
  for (; steps < 200 && prev >= 1e-6; ++steps) {
    const auto r = op::lbfgs_step(st, rosenbrock, x);
    CHECK(r.value <= prev);
    prev = r.value;
  }
  MESSAGE("L-BFGS steps: " << steps);
  CHECK(prev < 1e-6);

  // Reference: plain steepest descent with the same Armijo halving.
  std::vector<double> y{-1.2, 1.0};
  double v = rosenbrock(y).value;
  for (int k = 0; k < 200; ++k) {
    const auto e = rosenbrock(y);
    const double gg = e.gradient[0] * e.gradient[0] + e.gradient[1] * e.gradient[1];
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      const std::vector<double> z{y[0] - t * e.gradient[0], y[1] - t * e.gradient[1]};
      const double fz = rosenbrock(z).value;
      if (fz <= e.value - 1e-4 * t * gg) {
        y = z;
        v = fz;
        break;
      }
    }
  }
  MESSAGE("steepest descent after 200 steps: " << v);
  CHECK(v > 1e-6);
}

TEST_CASE("stationary start leaves variables untouched") {
  op::LbfgsState st;
  std::vector<double> x{1.0, 2.0};
  const auto r = op::lbfgs_step(st, bowl, x);
  CHECK(r.accepted);
  CHECK(r.value == 0.0);
  CHECK(x == std::vector<double>{1.0, 2.0});
  CHECK(r.evaluations == 1);
}

TEST_CASE("SPD quadratics reach gradient norm 1e-9 within 3n steps") {
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed * 31 + n);
      std::normal_distribution<double> nd(0.0, 1.0);
      std::vector<double> q(n * n), a(n * n, 0.0), b(n);
      for (double& v : q) v = nd(rng);
      for (double& v : b) v = nd(rng);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t k = 0; k < n; ++k) a[i * n + j] += q[k * n + i] * q[k * n + j];
          if (i == j) a[i * n + j] += 1.0;
        }
      auto f = [&](std::span<const double> x) {
        op::Evaluation e;
        e.gradient.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) e.gradient[i] += a[i * n + j] * x[j];
          e.value += 0.5 * x[i] * e.gradient[i] - b[i] * x[i];
          e.gradient[i] -= b[i];
        }
        return e;
      };
      op::LbfgsState st;
      std::vector<double> x(n, 0.0);
      for (std::size_t k = 0; k < 3 * n && norm(f(x).gradient) >= 1e-9; ++k) op::lbfgs_step(st, f, x);
      CHECK_MESSAGE(norm(f(x).gradient) < 1e-9, "n=" << n << " seed=" << seed);
    }
  }
}

TEST_CASE("iterates are invariant to scaling the objective by a power of two") {
  auto half = [](std::span<const double> x) {
    auto e = rosenbrock(x);
    e.value *= 0.25;
    for (double& g : e.gradient) g *= 0.25;
    return e;
  };
  op::LbfgsState s1, s2;
  std::vector<double> x{-1.2, 1.0}, y{-1.2, 1.0};
  for (int k = 0; k < 60; ++k) {
    op::lbfgs_step(s1, rosenbrock, x);
    op::lbfgs_step(s2, half, y);
    REQUIRE(x == y);
  }
}

TEST_CASE("non-finite values are rejected") {
  SUBCASE("at the start point") {
    op::LbfgsState st;
    st.history.push_back({{1.0}, {1.0}});
    std::vector<double> x{0.5};
    const auto r = op::lbfgs_step(st, [](std::span<const double>) {
      return op::Evaluation{std::nan(""), {0.0}};
    }, x);
    CHECK_FALSE(r.accepted);
    CHECK_FALSE(r.finite_start);
    CHECK(x[0] == 0.5);
    CHECK(st.history.empty());
  }
  SUBCASE("during the line search") {
    // The first step has length 1 and five halvings stop at 1/16, so every
    // trial lands in the non-finite region below 0.49.
    auto f = [](std::span<const double> x) {
      if (x[0] < 0.49) return op::Evaluation{std::numeric_limits<double>::infinity(), {1.0}};
      return op::Evaluation{x[0], {1.0}};
    };
    op::LbfgsState st;
    st.max_evals = 5;
    std::vector<double> x{0.5};
    const auto r = op::lbfgs_step(st, f, x);
    CHECK_FALSE(r.accepted);
    CHECK(r.finite_start);
    CHECK(r.evaluations == 6);
    CHECK(x[0] == 0.5);
    CHECK(r.value == 0.5);
  }
}

TEST_CASE("accepted values never increase on a fixed objective") {
  auto f = [](std::span<const double> x) {
    op::Evaluation e;
    e.gradient.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      e.value += std::cosh(x[i] - static_cast<double>(i)) + 0.1 * x[i] * x[i] * x[i] * x[i];
      e.gradient[i] = std::sinh(x[i] - static_cast<double>(i)) + 0.4 * x[i] * x[i] * x[i];
    }
    return e;
  };
  op::LbfgsState st;
  std::vector<double> x(6, 3.0);
  double prev = f(x).value;
  for (int k = 0; k < 50; ++k) {
    const auto r = op::lbfgs_step(st, f, x);
    CHECK(r.value <= prev);
    CHECK(st.history.size() <= st.m);
    for (const auto& p : st.history) {
      double sy = 0.0;
      for (std::size_t i = 0; i < p.s.size(); ++i) sy += p.s[i] * p.y[i];
      CHECK(sy > 0.0);
    }
    prev = r.value;
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves variables unchanged") {
    op::AdamState st;
    std::vector<double> x{1.0, -2.0};
    op::adam_step(st, std::vector<double>{0.0, 0.0}, x);
    CHECK(x == std::vector<double>{1.0, -2.0});
    CHECK(st.t == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    op::AdamState st;
    std::vector<double> x{0.0, 0.0, 0.0};
    op::adam_step(st, std::vector<double>{3.0, -0.02, 250.0}, x);
    CHECK(x[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(x[1] == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(x[2] == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("identical runs give identical trajectories") {
    auto run = [] {
      op::AdamState st;
      st.learning_rate = 0.05;
      std::vector<double> x{-1.2, 1.0};
      for (int k = 0; k < 100; ++k) op::adam_step(st, rosenbrock(x).gradient, x);
      return x;
    };
    CHECK(run() == run());
  }
  SUBCASE("errors") {
    op::AdamState st;
    std::vector<double> x{0.0};
    CHECK_THROWS_AS(op::adam_step(st, std::vector<double>{std::nan("")}, x), std::domain_error);
    CHECK_THROWS_AS(op::adam_step(st, std::vector<double>{1.0, 2.0}, x), std::invalid_argument);
  }
}

TEST_CASE("optimizer strings") {
  CHECK(op::parse_optimizer("lbfgs").method == op::Method::kLbfgs);
  const auto a = op::parse_optimizer("adam:lr=0.05");
  CHECK(a.method == op::Method::kAdam);
  CHECK(a.learning_rate == 0.05);
  CHECK(op::parse_optimizer(a.to_string()).learning_rate == 0.05);
  CHECK_THROWS(op::parse_optimizer("sgd"));
  CHECK_THROWS(op::parse_optimizer("adam:lr=abc"));
  CHECK_THROWS(op::parse_optimizer("adam:lr=-1"));
}
