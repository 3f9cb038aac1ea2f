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
#include <cstdint>
#include <functional>
#include <random>

#include "doctest.h"
#include "gradsense/objective.hpp"
#include "gradsense/sag.hpp"

namespace ad = gradsense::autodiff;
namespace ob = gradsense::objective;
namespace vm = gradsense::victim;
using gradsense::GradientVector;
using gradsense::Tensor;

namespace {

ob::DummyBatch random_dummy(std::mt19937_64& rng, const vm::ArchSpec& arch, std::size_t b) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  ob::DummyBatch d;
  for (std::size_t i = 0; i < b; ++i) {
    Tensor img(arch.input.shape());
    for (double& v : img.data) v = u(rng);
    Tensor logit({arch.num_classes});
    for (double& v : logit.data) v = n(rng);
    d.images.emplace_back(std::move(img));
    d.label_logits.emplace_back(std::move(logit));
  }
  return d;
}

// The dummy batch as a fixed labelled batch, for recomputation through the
// per-sample path.
vm::LabeledBatch as_labeled(const ob::DummyBatch& d) {
  vm::LabeledBatch b;
  for (const auto& v : d.images) b.images.push_back(v.data());
  for (const auto& p : d.label_probabilities()) b.labels.push_back(p.data);
  return b;
}

vm::TargetGradient random_target(std::mt19937_64& rng, const vm::VictimModel& m, std::size_t b) {
  std::normal_distribution<double> n(0.0, 0.05);
  vm::TargetGradient t;
  t.batch_size = b;
  t.g_star.resize(m.param_count);
  for (double& v : t.g_star) v = n(rng);
  return t;
}

double sq_dist(const GradientVector& a, const GradientVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

GradientVector mean_of(const std::vector<GradientVector>& gs, const std::vector<std::size_t>& idx) {
  GradientVector m(gs.front().size(), 0.0);
  for (std::size_t j : idx)
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += gs[j][k];
  for (double& v : m) v /= static_cast<double>(idx.size());
  return m;
}

void for_each_subset(std::size_t b, std::size_t s, const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<bool> pick(b, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(s), true);
  do {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < b; ++i)
      if (pick[i]) idx.push_back(i);
    f(idx);
  } while (std::prev_permutation(pick.begin(), pick.end()));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("binomials agree with Pascal's triangle") {
  std::vector<std::vector<std::uint64_t>> pascal(65);
  for (std::size_t n = 0; n <= 64; ++n) {
    pascal[n].assign(n + 1, 1);
    for (std::size_t k = 1; k < n; ++k) pascal[n][k] = pascal[n - 1][k - 1] + pascal[n - 1][k];
  }
  for (std::size_t n = 0; n <= 64; ++n)
    for (std::size_t k = 0; k <= n; ++k) CHECK(ob::binomial(n, k) == pascal[n][k]);
  CHECK(ob::binomial(40, 20) == 137846528820ULL);
  CHECK(ob::binomial(3, 5) == 0);
  CHECK(ob::binomial(100, 50) == ob::BigInt("100891344545564193334812497256"));
}

TEST_CASE("adaptive coefficient examples") {
  // 2 * 3! / (1! 2!) / ((4! / (2! 2!)) * 4)
  const double direct = 2.0 * (6.0 / (1.0 * 2.0)) / ((24.0 / (2.0 * 2.0)) * 4.0);
  CHECK(ob::adaptive_coefficient(4, 2) == direct);
  CHECK(ob::adaptive_coefficient(4, 2) == 0.25);
  CHECK(ob::adaptive_coefficient(40, 40) == 0.00125);
  CHECK(ob::adaptive_coefficient(1, 1) == 2.0);
  CHECK(ob::adaptive_coefficient(10000, 5000) == 2.0 / 5e7);
  CHECK(ob::adaptive_coefficient(10000, 1) == 2.0 / 1e4);
  CHECK_THROWS_AS(ob::adaptive_coefficient(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(ob::adaptive_coefficient(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(ob::adaptive_coefficient(10001, 1), std::invalid_argument);
}

TEST_CASE("coefficient identity 2/(B S) for all S <= B <= 64") {
  std::size_t mismatches = 0;
  for (std::size_t b = 1; b <= 64; ++b)
    for (std::size_t s = 1; s <= b; ++s)
      if (ob::adaptive_coefficient(b, s) != 2.0 / static_cast<double>(b * s)) ++mismatches;
  CHECK(mismatches == 0);
}

TEST_CASE("coefficient tightens the DLG discrepancy when B S >= 2") {
  const double xhat = 3.7;
  for (std::size_t b = 1; b <= 40; ++b) {
    for (std::size_t s = 1; s <= b; ++s) {
      if (b * s < 2) continue;
      const double c = ob::adaptive_coefficient(b, s);
      CHECK(c * xhat <= xhat);
      if (b * s > 2) CHECK(c * xhat < xhat);
    }
  }
}

TEST_CASE("schedule examples") {
  ob::ScheduleSpec spec;
  spec.strategy = ob::Strategy::kConstant;
  spec.constant_S = 2;
  spec.total_iters = 300;
  for (std::size_t e = 0; e < 300; ++e) CHECK(ob::schedule_subset_size(spec, e, 40) == 2);

  spec.strategy = ob::Strategy::kFracTotal;
  CHECK(ob::schedule_subset_size(spec, 0, 40) == 1);
  CHECK(ob::schedule_subset_size(spec, 299, 40) == 40);
  CHECK(ob::schedule_subset_size(spec, 7, 40) == 2);  // 320/300

  spec.strategy = ob::Strategy::kRevTotal;
  CHECK(ob::schedule_subset_size(spec, 299, 40) == 1);
  CHECK(ob::schedule_subset_size(spec, 0, 40) == 40);

  spec.strategy = ob::Strategy::kFracConst;
  spec.E_script = 50;
  CHECK(ob::schedule_subset_size(spec, 0, 40) == 1);
  CHECK(ob::schedule_subset_size(spec, 100, 40) == 40);

  spec.strategy = ob::Strategy::kRevConst;
  CHECK(ob::schedule_subset_size(spec, 0, 40) == 40);
  CHECK(ob::schedule_subset_size(spec, 49, 40) == 1);
  CHECK(ob::schedule_subset_size(spec, 200, 40) == 1);

  CHECK_THROWS_AS(ob::schedule_subset_size(spec, 300, 40), std::out_of_range);
}

TEST_CASE("schedules match a brute-force ceiling and stay within [1, B]") {
  // Smallest n in [1, B] with n * den >= num, or B when there is none.
  auto oracle = [](std::int64_t num, std::int64_t den, std::int64_t b) {
    for (std::int64_t n = 1; n <= b; ++n)
      if (n * den >= num) return n;
    return b;
  };
  std::size_t bad = 0;
  for (std::int64_t b : {1, 2, 3, 7, 40, 64}) {
    for (std::int64_t total : {1, 2, 5, 37, 300}) {
      for (std::int64_t horizon : {1, 3, 50, 400}) {
        ob::ScheduleSpec spec;
        spec.total_iters = static_cast<std::size_t>(total);
        spec.E_script = static_cast<std::size_t>(horizon);
        for (std::int64_t e = 0; e < total; ++e) {
          const auto ue = static_cast<std::size_t>(e);
          const auto ub = static_cast<std::size_t>(b);
          auto run = [&](ob::Strategy s) {
            spec.strategy = s;
            const auto v = ob::schedule_subset_size(spec, ue, ub);
            if (v < 1 || v > ub) ++bad;
            return static_cast<std::int64_t>(v);
          };
          if (run(ob::Strategy::kFracTotal) != oracle(b * (e + 1), total, b)) ++bad;
          if (run(ob::Strategy::kFracConst) != oracle(b * (e + 1), horizon, b)) ++bad;
          if (run(ob::Strategy::kRevTotal) != oracle(b * (total - e), total, b)) ++bad;
          if (run(ob::Strategy::kRevConst) != oracle(b * (horizon - e), horizon, b)) ++bad;
        }
      }
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("schedule validation and strategy names") {
  ob::ScheduleSpec spec;
  spec.constant_S = 0;
  CHECK_THROWS(spec.validate(4));
  spec.constant_S = 5;
  CHECK_THROWS(spec.validate(4));
  spec.constant_S = 4;
  CHECK_NOTHROW(spec.validate(4));
  spec.strategy = ob::Strategy::kRevConst;
  spec.E_script = 0;
  CHECK_THROWS(spec.validate(4));
  for (auto s : {ob::Strategy::kConstant, ob::Strategy::kFracTotal, ob::Strategy::kFracConst,
                 ob::Strategy::kRevTotal, ob::Strategy::kRevConst})
    CHECK(ob::parse_strategy(ob::strategy_name(s)) == s);
  try {
    ob::parse_strategy("linear");
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("linear") != std::string::npos);
    CHECK(msg.find("frac_total") != std::string::npos);
    CHECK(msg.find("rev_const") != std::string::npos);
  }
}

TEST_CASE("subset sampling") {
  std::mt19937_64 rng(3);
  CHECK(ob::sample_subset(rng, 6, 6).indices == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  std::mt19937_64 a(11), b(11);
  const auto sa = ob::sample_subset(a, 4, 1), sb = ob::sample_subset(b, 4, 1);
  CHECK(sa.size() == 1);
  CHECK(sa.indices == sb.indices);

  std::vector<double> hits(5, 0.0);
  std::mt19937_64 r(2024);
  for (int t = 0; t < 40000; ++t) {
    const auto s = ob::sample_subset(r, 5, 2);
    REQUIRE(s.size() == 2);
    REQUIRE(s.indices[0] < s.indices[1]);
    REQUIRE(s.indices[1] < 5);
    for (std::size_t i : s.indices) hits[i] += 1.0;
  }
  for (double h : hits) CHECK(std::abs(h / 40000.0 - 0.4) < 0.02);
  CHECK_THROWS(ob::sample_subset(r, 3, 0));
  CHECK_THROWS(ob::sample_subset(r, 3, 4));
}

TEST_CASE("gradient distance examples") {
  vm::TargetGradient t{{0.0, 0.0}, 1};
  std::vector<ad::NodeRef> g{ad::constant(Tensor({2}, std::vector<double>{3.0, 4.0}))};
  CHECK(ob::gradient_distance(g, t)->value().item() == 25.0);
  vm::TargetGradient same{{3.0, 4.0}, 1};
  CHECK(ob::gradient_distance(g, same)->value().item() == 0.0);
  vm::TargetGradient longer{{0.0, 0.0, 0.0}, 1};
  CHECK_THROWS_AS(ob::gradient_distance(g, longer), std::invalid_argument);
}

TEST_CASE("dlg loss matches recomputation from per-sample gradients") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto arch = vm::mlp({1, 4, 4}, 6, 4);
    auto m = vm::init_model(arch, seed);
    auto dummy = random_dummy(rng, arch, 3);
    auto target = random_target(rng, m, 3);
    const auto per = vm::per_sample_gradients(m, as_labeled(dummy));
    const double expect = sq_dist(mean_of(per, {0, 1, 2}), target.g_star);
    CHECK(rel(ob::dlg_loss(m, dummy, target)->value().item(), expect) < 1e-12);
  }
}

TEST_CASE("subset loss examples") {
  std::mt19937_64 rng(5);
  auto arch = vm::mlp({1, 3, 3}, 5, 3);
  auto m = vm::init_model(arch, 5);

  SUBCASE("full subset equals the DLG loss") {
    auto dummy = random_dummy(rng, arch, 4);
    auto target = random_target(rng, m, 4);
    const double a = ob::subset_loss(m, dummy, ob::full_subset(4), target)->value().item();
    const double b = ob::dlg_loss(m, dummy, target)->value().item();
    CHECK(std::abs(a - b) < 1e-12);
  }
  SUBCASE("a single dummy equal to the hidden sample has zero loss") {
    auto dummy = random_dummy(rng, arch, 1);
    const auto target = vm::sag_capture(m, as_labeled(dummy));
    CHECK(ob::subset_loss(m, dummy, ob::full_subset(1), target)->value().item() < 1e-24);
  }
  SUBCASE("B=3, S=2 matches the mean of two per-sample gradients") {
    auto dummy = random_dummy(rng, arch, 3);
    auto target = random_target(rng, m, 3);
    const auto per = vm::per_sample_gradients(m, as_labeled(dummy));
    for (std::size_t trial = 0; trial < 5; ++trial) {
      const auto sub = ob::sample_subset(rng, 3, 2);
      const double expect = sq_dist(mean_of(per, sub.indices), target.g_star);
      CHECK(rel(ob::subset_loss(m, dummy, sub, target)->value().item(), expect) < 1e-12);
    }
  }
  SUBCASE("invalid subsets are rejected") {
    auto dummy = random_dummy(rng, arch, 3);
    auto target = random_target(rng, m, 3);
    CHECK_THROWS(ob::subset_loss(m, dummy, ob::SubsetIndexSet{{1, 1}}, target));
    CHECK_THROWS(ob::subset_loss(m, dummy, ob::SubsetIndexSet{{0, 3}}, target));
    CHECK_THROWS(ob::subset_loss(m, dummy, ob::SubsetIndexSet{}, target));
  }
}

TEST_CASE("subset loss expectation equals the closed form over exhaustive subsets") {
  // E ||mean_S(g) - t||^2 = ||mean(g) - t||^2 + (B - S) / (S (B - 1)) * var,
  // var = (1/B) sum_j ||g_j - mean(g)||^2 (sampling without replacement).
  double worst = 0.0;
  for (std::size_t b = 2; b <= 6; ++b) {
    std::mt19937_64 rng(100 + b);
    auto arch = vm::mlp({1, 3, 3}, 4, 3);
    auto m = vm::init_model(arch, b);
    auto dummy = random_dummy(rng, arch, b);
    auto target = random_target(rng, m, b);
    std::vector<std::size_t> all(b);
    for (std::size_t i = 0; i < b; ++i) all[i] = i;
    const auto per = vm::per_sample_gradients(m, as_labeled(dummy));
    const auto mean = mean_of(per, all);
    double var = 0.0;
    for (const auto& g : per) var += sq_dist(g, mean) / static_cast<double>(b);
    for (std::size_t s = 1; s <= b; ++s) {
      double acc = 0.0;
      double count = 0.0;
      for_each_subset(b, s, [&](const std::vector<std::size_t>& idx) {
        acc += ob::subset_loss(m, dummy, ob::SubsetIndexSet{idx}, target)->value().item();
        count += 1.0;
      });
      CHECK(count == ob::binomial(b, s).convert_to<double>());
      const double closed = sq_dist(mean, target.g_star) +
                            static_cast<double>(b - s) / static_cast<double>(s * (b - 1)) * var;
      worst = std::max(worst, rel(acc / count, closed));
    }
  }
  MESSAGE("worst relative error: " << worst);
  CHECK(worst < 1e-10);
}

TEST_CASE("total variation") {
  SUBCASE("constant image") {
    // Only the sqrt(eps) floor remains, once per site that has a neighbour.
    auto big = ad::constant(Tensor({1, 3, 5, 5}, 0.42));
    CHECK(ob::tv_prior(big)->value().item() == doctest::Approx(72 * 1e-4).epsilon(1e-12));
    auto small = ad::constant(Tensor({1, 1, 3, 3}, 0.42));
    CHECK(std::abs(ob::tv_prior(small)->value().item()) < 1e-3);
  }
  SUBCASE("2x2 hand example") {
    auto img = ad::constant(Tensor({1, 1, 2, 2}, std::vector<double>{0, 1, 0, 1}));
    const double v = ob::tv_prior(img)->value().item();
    CHECK(v == doctest::Approx(2.0).epsilon(1e-3));
    // (0,0) and (1,0) see a horizontal step of 1; (0,1) sees nothing.
    CHECK(v == doctest::Approx(2.0 * std::sqrt(1.0 + 1e-8) + std::sqrt(1e-8)).epsilon(1e-14));
  }
  SUBCASE("matches a direct loop and is homogeneous") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 2, c = 3, h = 4, w = 5;
    Tensor t({n, c, h, w});
    for (double& v : t.data) v = u(rng);
    double direct = 0.0;
    for (std::size_t p = 0; p < n * c; ++p) {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t q = 0; q < w; ++q) {
          if (r + 1 == h && q + 1 == w) continue;
          const double x = t[p * h * w + r * w + q];
          const double dh = q + 1 < w ? t[p * h * w + r * w + q + 1] - x : 0.0;
          const double dv = r + 1 < h ? t[p * h * w + (r + 1) * w + q] - x : 0.0;
          direct += std::sqrt(dh * dh + dv * dv + 1e-8);
        }
      }
    }
    const double v = ob::tv_prior(ad::constant(t))->value().item();
    CHECK(rel(v, direct) < 1e-13);
    Tensor t2 = t;
    for (double& x : t2.data) x *= 2.0;
    CHECK(rel(ob::tv_prior(ad::constant(t2))->value().item(), 2.0 * v) < 1e-6);
  }
  SUBCASE("gradient matches finite differences") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor t({1, 2, 3, 3});
    for (double& v : t.data) v = u(rng);
    ad::Variable x(t);
    std::vector<ad::Variable> wrt{x};
    const Tensor g = ad::differentiate(ob::tv_prior(x.node()), wrt, false)[0]->value();
    for (std::size_t i = 0; i < t.size(); ++i) {
      Tensor p = t, q = t;
      p[i] += 1e-6;
      q[i] -= 1e-6;
      const double fd = (ob::tv_prior(ad::constant(p))->value().item() -
                         ob::tv_prior(ad::constant(q))->value().item()) / 2e-6;
      CHECK(std::abs(fd - g[i]) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
  SUBCASE("degenerate sizes") {
    CHECK_THROWS(ob::tv_prior(ad::constant(Tensor({1, 1, 1, 4}, 0.0))));
    CHECK_THROWS(ob::tv_prior(ad::constant(Tensor({1, 1, 4, 1}, 0.0))));
  }
}

TEST_CASE("magia total examples") {
  std::mt19937_64 rng(12);
  auto arch = vm::mlp({1, 3, 3}, 5, 3);
  auto m = vm::init_model(arch, 12);

  SUBCASE("S = B without prior is (2/B^2) times the DLG loss for any alpha") {
    for (std::size_t b : {1u, 2u, 3u, 5u}) {
      auto dummy = random_dummy(rng, arch, b);
      auto target = random_target(rng, m, b);
      const double dlg = ob::dlg_loss(m, dummy, target)->value().item();
      for (double alpha : {0.0, 0.3, 0.999, 1.0}) {
        const double v = ob::magia_total(m, dummy, ob::full_subset(b), target, {alpha, 0.0}, b, b)->value().item();
        CHECK(rel(v, 2.0 / static_cast<double>(b * b) * dlg) < 1e-12);
      }
    }
  }
  SUBCASE("alpha = 1 keeps only the DLG term") {
    auto dummy = random_dummy(rng, arch, 4);
    auto target = random_target(rng, m, 4);
    const auto sub = ob::sample_subset(rng, 4, 2);
    const auto terms = ob::magia_terms(m, dummy, sub, target, {1.0, 0.0}, 2, 4);
    CHECK(terms.subset == nullptr);
    CHECK(terms.total->value().item() == 0.25 * ob::dlg_loss(m, dummy, target)->value().item());
  }
  SUBCASE("recomposition from the three sub-losses") {
    for (int trial = 0; trial < 5; ++trial) {
      auto dummy = random_dummy(rng, arch, 4);
      auto target = random_target(rng, m, 4);
      const auto sub = ob::sample_subset(rng, 4, 2);
      const double v = ob::magia_total(m, dummy, sub, target, {0.999, 0.005}, 2, 4)->value().item();
      const double lo = ob::dlg_loss(m, dummy, target)->value().item();
      const double lr = ob::subset_loss(m, dummy, sub, target)->value().item();
      const double tv = ob::tv_prior(dummy.images_node(ob::full_subset(4)))->value().item();
      CHECK(rel(v, 0.25 * (0.999 * lo + 0.001 * lr) + 0.005 * tv) < 1e-12);
    }
  }
  SUBCASE("argument validation") {
    auto dummy = random_dummy(rng, arch, 4);
    auto target = random_target(rng, m, 4);
    const auto sub = ob::full_subset(4);
    CHECK_THROWS(ob::magia_total(m, dummy, sub, target, {1.5, 0.0}, 4, 4));
    CHECK_THROWS(ob::magia_total(m, dummy, sub, target, {0.5, -1.0}, 4, 4));
    CHECK_THROWS(ob::magia_total(m, dummy, sub, target, {0.5, 0.0}, 3, 4));
    CHECK_THROWS(ob::magia_total(m, dummy, sub, target, {0.5, 0.0}, 4, 5));
  }
}

TEST_CASE("full-batch collapse of the gradient w.r.t. every dummy variable") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto arch = seed % 2 ? vm::mlp({1, 4, 4}, 6, 4) : vm::lenet_lite({1, 13, 13}, 3, 4);
    auto m = vm::init_model(arch, seed);
    const std::size_t b = 2 + seed % 3;
    auto dummy = random_dummy(rng, arch, b);
    auto target = random_target(rng, m, b);
    const auto vars = dummy.variables();
    const double alpha = 0.25 * static_cast<double>(seed);
    const auto gm = ad::differentiate(ob::magia_total(m, dummy, ob::full_subset(b), target, {alpha, 0.0}, b, b), vars, false);
    const auto gd = ad::differentiate(ob::dlg_loss(m, dummy, target), vars, false);
    const double c = 2.0 / static_cast<double>(b * b);
    double scale = 0.0;
    for (const auto& g : gd)
      for (double v : g->value().data) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < gm.size(); ++k)
      for (std::size_t i = 0; i < gm[k]->value().size(); ++i)
        worst = std::max(worst, std::abs(gm[k]->value()[i] - c * gd[k]->value()[i]) / (c * scale));
  }
  MESSAGE("worst relative error: " << worst);
  CHECK(worst < 1e-10);
}

TEST_CASE("dummy gradient of the DLG loss matches finite differences") {
  std::mt19937_64 rng(21);
  auto arch = vm::mlp({1, 2, 2}, 4, 3);
  auto m = vm::init_model(arch, 21);
  auto dummy = random_dummy(rng, arch, 2);
  auto target = random_target(rng, m, 2);
  const auto vars = dummy.variables();
  const auto grads = ad::differentiate(ob::dlg_loss(m, dummy, target), vars, false);
  double worst = 0.0;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    auto v = vars[k];
    for (std::size_t i = 0; i < v.data().size(); ++i) {
      std::vector<double> base = v.data().data;
      auto p = base, q = base;
      p[i] += 1e-6;
      q[i] -= 1e-6;
      v.set_data(p);
      const double fp = ob::dlg_loss(m, dummy, target)->value().item();
      v.set_data(q);
      const double fq = ob::dlg_loss(m, dummy, target)->value().item();
      v.set_data(base);
      const double fd = (fp - fq) / 2e-6;
      worst = std::max(worst, std::abs(fd - grads[k]->value()[i]) / std::max(std::abs(fd), 1e-6));
    }
  }
  MESSAGE("worst relative error: " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("mix parameter validation") {
  CHECK_NOTHROW(ob::MixParams{0.999, 0.005}.validate());
  CHECK_NOTHROW(ob::MixParams{0.0, 0.0}.validate());
  CHECK_THROWS(ob::MixParams{-0.1, 0.0}.validate());
  CHECK_THROWS(ob::MixParams{std::nan(""), 0.0}.validate());
  CHECK_THROWS(ob::MixParams{0.5, std::nan("")}.validate());
}
