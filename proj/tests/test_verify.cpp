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
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradsense/objective.hpp"
#include "gradsense/verify.hpp"

namespace vf = gradsense::verify;
namespace ob = gradsense::objective;
namespace vm = gradsense::victim;
using gradsense::GradientVector;
using gradsense::Tensor;

namespace {

vf::OracleInputs random_inputs(std::mt19937_64& rng, std::size_t b, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  vf::OracleInputs in;
  for (std::size_t j = 0; j < b; ++j) {
    GradientVector d(dim), t(dim);
    for (double& v : d) v = n(rng);
    for (double& v : t) v = n(rng);
    in.dummy_grads.push_back(d);
    in.target_grads.push_back(t);
  }
  return in;
}

}  // namespace

TEST_CASE("subsets are enumerated lexicographically and completely") {
  CHECK(vf::all_subsets(4, 2) == std::vector<std::vector<std::size_t>>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  CHECK(vf::all_subsets(3, 3) == std::vector<std::vector<std::size_t>>{{0, 1, 2}});
  for (std::size_t b = 1; b <= 12; ++b)
    for (std::size_t s = 1; s <= b; ++s) {
      const auto all = vf::all_subsets(b, s);
      CHECK(all.size() == ob::binomial(b, s).convert_to<std::size_t>());
      CHECK(std::is_sorted(all.begin(), all.end()));
    }
  CHECK(vf::all_subsets(12, 6).size() == 924);
}

TEST_CASE("enumerate_subset_losses examples") {
  vf::OracleInputs same{{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}}, {{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}}};
  for (std::size_t s = 1; s <= 3; ++s)
    for (double v : vf::enumerate_subset_losses(same, s)) CHECK(v == 0.0);

  vf::OracleInputs two{{{1.0, 0.0}, {0.0, 1.0}}, {{0.0, 0.0}, {0.0, 0.0}}};
  CHECK(vf::enumerate_subset_losses(two, 1) == std::vector<double>{1.0, 1.0});

  std::mt19937_64 rng(1);
  const auto in = random_inputs(rng, 3, 4);
  GradientVector sum(4, 0.0);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t k = 0; k < 4; ++k) sum[k] += in.dummy_grads[j][k] - in.target_grads[j][k];
  const double expect = std::inner_product(sum.begin(), sum.end(), sum.begin(), 0.0) / 9.0;
  const auto v = vf::enumerate_subset_losses(in, 3);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == doctest::Approx(expect).epsilon(1e-14));

  const auto big = random_inputs(rng, 13, 2);
  CHECK_THROWS_AS(vf::enumerate_subset_losses(big, 2), std::invalid_argument);
  CHECK_THROWS_AS(vf::enumerate_subset_losses(in, 4), std::invalid_argument);
  auto ragged = in;
  ragged.target_grads[1].pop_back();
  CHECK_THROWS_AS(vf::enumerate_subset_losses(ragged, 1), std::invalid_argument);
}

TEST_CASE("chain probe fixtures") {
  SUBCASE("dummy equals target") {
    std::mt19937_64 rng(2);
    auto in = random_inputs(rng, 4, 3);
    in.target_grads = in.dummy_grads;
    const auto r = vf::oracle_chain_probe(in, 2);
    CHECK(r.x_tilde == 0.0);
    CHECK(r.x_tilde_o == 0.0);
    CHECK(r.x_hat == 0.0);
    CHECK(r.holds_tilde_le_o);
    CHECK(r.holds_o_le_hat);
  }
  SUBCASE("cancellation counterexample") {
    vf::OracleInputs in{{{1.0, 0.0}, {-1.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.0}}};
    const auto r = vf::oracle_chain_probe(in, 1);
    CHECK(r.x_hat == 0.0);
    CHECK(r.x_tilde_o == 0.0);
    CHECK(std::abs(r.x_tilde - 2.0 / (4.0 * 2.0 * 1.0)) < 1e-12);
    CHECK_FALSE(r.holds_tilde_le_o);
    CHECK(r.holds_o_le_hat);
    CHECK(r.B == 2);
    CHECK(r.S == 1);
  }
  SUBCASE("equal differences") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      auto in = random_inputs(rng, 4, 5);
      const GradientVector d = in.dummy_grads[0];
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 5; ++k) in.dummy_grads[j][k] = in.target_grads[j][k] + d[k];
      const auto r = vf::oracle_chain_probe(in, 2);
      // Six subsets, each ||2d||^2, over 16 * 6 * 3.
      const double dd = std::inner_product(d.begin(), d.end(), d.begin(), 0.0);
      CHECK(r.x_tilde == doctest::Approx(dd / 12.0).epsilon(1e-12));
      CHECK(r.x_tilde_o == doctest::Approx(dd / 4.0).epsilon(1e-12));
      CHECK(r.holds_tilde_le_o);
    }
  }
}

TEST_CASE("rescaled discrepancy never exceeds the DLG discrepancy when B S >= 2") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + rng() % 8;
    const auto in = random_inputs(rng, b, 1 + rng() % 6);
    for (std::size_t s = 1; s <= b; ++s) {
      const auto r = vf::oracle_chain_probe(in, s);
      if (b * s >= 2) CHECK(r.holds_o_le_hat);
      CHECK(r.x_tilde >= 0.0);
    }
  }
}

TEST_CASE("triangle step holds on every subset") {
  std::mt19937_64 rng(5);
  std::size_t checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 2 + rng() % 5;
    const auto in = random_inputs(rng, b, 1 + rng() % 5);
    for (std::size_t s = 1; s <= b; ++s) {
      const auto flags = vf::triangle_step_check(in, s);
      CHECK(flags.size() == ob::binomial(b, s).convert_to<std::size_t>());
      for (bool ok : flags) {
        CHECK(ok);
        ++checked;
      }
    }
  }
  MESSAGE(checked << " subsets checked");
  vf::OracleInputs zeros{{{0.0}, {0.0}}, {{0.0}, {0.0}}};
  CHECK(vf::triangle_step_check(zeros, 1) == std::vector<bool>{true, true});
  CHECK(vf::triangle_step_check(zeros, 2) == std::vector<bool>{true});
}

TEST_CASE("coefficient identity check") {
  CHECK(vf::coefficient_identity_check(64));
  CHECK(vf::coefficient_identity_check(1));
  CHECK(ob::adaptive_coefficient(1, 1) == 2.0);
  CHECK(ob::adaptive_coefficient(40, 40) == 2.0 / (40.0 * 40.0));
  CHECK_THROWS(vf::coefficient_identity_check(65));
}

TEST_CASE("exhaustive mean agrees with 10000 sampled subsets within 2%") {
  std::mt19937_64 rng(6);
  for (std::size_t b : {4u, 6u, 9u}) {
    const auto in = random_inputs(rng, b, 5);
    for (std::size_t s : {std::size_t{1}, b / 2, b}) {
      const auto all = vf::enumerate_subset_losses(in, s);
      const double exact = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
      std::mt19937_64 pick(b * 100 + s);
      double sampled = 0.0;
      for (int k = 0; k < 10000; ++k) {
        const auto sub = ob::sample_subset(pick, b, s);
        GradientVector d(5, 0.0);
        for (std::size_t j : sub.indices)
          for (std::size_t q = 0; q < 5; ++q) d[q] += in.dummy_grads[j][q] - in.target_grads[j][q];
        sampled += std::inner_product(d.begin(), d.end(), d.begin(), 0.0) / static_cast<double>(s * s);
      }
      sampled /= 10000.0;
      CHECK(std::abs(sampled - exact) <= 0.02 * exact);
    }
  }
}

TEST_CASE("oracle inputs from a model agree with the attack objective") {
  std::mt19937_64 rng(7);
  auto arch = vm::mlp({1, 3, 3}, 5, 3);
  auto m = vm::init_model(arch, 7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  ob::DummyBatch dummy;
  std::vector<Tensor> hidden_images;
  for (int j = 0; j < 4; ++j) {
    Tensor a({1, 3, 3}), h({1, 3, 3}), l({3});
    for (double& v : a.data) v = u(rng);
    for (double& v : h.data) v = u(rng);
    for (double& v : l.data) v = n(rng);
    dummy.images.emplace_back(a);
    dummy.label_logits.emplace_back(l);
    hidden_images.push_back(h);
  }
  const auto hidden = vm::LabeledBatch::with_class_labels(hidden_images, {0, 1, 2, 0}, 3);
  vm::LabeledBatch dummy_fixed;
  for (const auto& v : dummy.images) dummy_fixed.images.push_back(v.data());
  for (const auto& p : dummy.label_probabilities()) dummy_fixed.labels.push_back(p.data);

  const auto in = vf::oracle_inputs(m, dummy_fixed, hidden);
  const auto g_star = vm::sag_capture(m, hidden);
  const double dlg = ob::dlg_loss(m, dummy, g_star)->value().item();
  const auto r = vf::oracle_chain_probe(in, 2);
  CHECK(std::abs(r.x_hat - dlg) / dlg < 1e-12);
  CHECK(vf::oracle_chain_probe(vf::oracle_inputs(m, hidden, hidden), 2).x_hat == 0.0);
}

TEST_CASE("suite passes every asserted check") {
  const auto results = vf::run_suite({});
  CHECK(results.size() == 7);
  for (const auto& c : results) {
    CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
    MESSAGE(c.name << ": " << c.detail);
  }
}
