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
#include <cmath>
#include <numbers>
#include <random>

#include "gradsense/dataio.hpp"

namespace gradsense::dataio {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// A per-class colour: channel c of class k. Single-channel images use the
// first entry only.
double class_tint(std::size_t k, std::size_t c, std::size_t classes) {
  const double hue = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(classes, 1));
  return 0.55 + 0.4 * std::cos(hue + 2.0 * std::numbers::pi * static_cast<double>(c) / 3.0);
}

void blocks(Tensor& t, const SynthSpec& s, std::size_t label, Rng& rng) {
  const std::size_t h = s.height, w = s.width;
  const double base = uniform(rng, 0.15, 0.45);
  const double fx = uniform(rng, 0.5, 2.5), fy = uniform(rng, 0.5, 2.5), ph = uniform(rng, 0.0, 6.3);
  // Rectangle placement: class picks a cell of a 3x3 grid, the seed jitters it.
  const std::size_t cell = label % 9;
  const double ch = static_cast<double>(h) / 3.0, cw = static_cast<double>(w) / 3.0;
  const double r0 = (static_cast<double>(cell / 3) + uniform(rng, -0.25, 0.25)) * ch;
  const double c0 = (static_cast<double>(cell % 3) + uniform(rng, -0.25, 0.25)) * cw;
  const double rh = ch * uniform(rng, 1.2, 1.8), rw = cw * uniform(rng, 1.2, 1.8);
  for (std::size_t c = 0; c < s.channels; ++c) {
    const double fg = s.channels == 1 ? uniform(rng, 0.75, 0.95) : class_tint(label, c, s.num_classes);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t q = 0; q < w; ++q) {
        const double y = static_cast<double>(r), x = static_cast<double>(q);
        double v = base + 0.06 * std::sin(fx * x + ph) * std::cos(fy * y - ph) + uniform(rng, -0.03, 0.03);
        if (y >= r0 && y < r0 + rh && x >= c0 && x < c0 + rw) v = fg;
        t[(c * h + r) * w + q] = std::clamp(v, 0.0, 1.0);
      }
  }
}

void gradients_and_shapes(Tensor& t, const SynthSpec& s, std::size_t label, Rng& rng) {
  const std::size_t h = s.height, w = s.width;
  const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double lo = uniform(rng, 0.05, 0.3), hi = uniform(rng, 0.5, 0.75);
  const double cy = uniform(rng, 0.35, 0.65) * static_cast<double>(h);
  const double cx = uniform(rng, 0.35, 0.65) * static_cast<double>(w);
  const double rad = uniform(rng, 0.2, 0.32) * static_cast<double>(std::min(h, w));
  const std::size_t shape = label % 4;
  auto inside = [&](double y, double x) {
    const double dy = y - cy, dx = x - cx;
    switch (shape) {
      case 0: return dy * dy + dx * dx <= rad * rad;                          // disk
      case 1: return std::abs(dy) <= rad && std::abs(dx) <= rad - (dy + rad) / 2.0;  // triangle
      case 2: return (std::abs(dy) <= rad / 3.0 && std::abs(dx) <= rad) ||
                     (std::abs(dx) <= rad / 3.0 && std::abs(dy) <= rad);      // cross
      default: {
        const double d2 = dy * dy + dx * dx;
        return d2 <= rad * rad && d2 >= 0.36 * rad * rad;                     // ring
      }
    }
  };
  const double span = static_cast<double>(std::max(h, w));
  for (std::size_t c = 0; c < s.channels; ++c) {
    const double fg = s.channels == 1 ? uniform(rng, 0.8, 1.0) : class_tint(label, c, s.num_classes);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t q = 0; q < w; ++q) {
        const double y = static_cast<double>(r), x = static_cast<double>(q);
        const double proj = ((x - w / 2.0) * std::cos(angle) + (y - h / 2.0) * std::sin(angle)) / span + 0.5;
        double v = lo + (hi - lo) * std::clamp(proj, 0.0, 1.0);
        if (inside(y, x)) v = fg;
        t[(c * h + r) * w + q] = std::clamp(v, 0.0, 1.0);
      }
  }
}

constexpr std::array<std::pair<SynthPattern, std::string_view>, 2> kPatterns{{
    {SynthPattern::kBlocks, "blocks"},
    {SynthPattern::kGradientsAndShapes, "gradients-and-shapes"},
}};

}  // namespace

void SynthSpec::validate() const {
  if (height < 4 || width < 4) throw std::invalid_argument("synthetic images must be at least 4x4");
  if (channels != 1 && channels != 3) throw std::invalid_argument("synthetic images need 1 or 3 channels");
  if (num_classes == 0) throw std::invalid_argument("synthetic data needs at least one class");
}

SynthPattern parse_pattern(std::string_view name) {
  for (const auto& [p, n] : kPatterns)
    if (n == name) return p;
  throw std::invalid_argument("unknown synthetic pattern '" + std::string(name) +
                              "' (allowed: blocks, gradients-and-shapes)");
}

std::string_view pattern_name(SynthPattern p) {
  for (const auto& [k, n] : kPatterns)
    if (k == p) return n;
  return "unknown";
}

victim::LabeledBatch synth_batch(const SynthSpec& spec, std::size_t batch) {
  spec.validate();
  if (batch == 0) throw std::invalid_argument("synth_batch: batch must be at least 1");
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < batch; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    Rng rng(seq);
    const std::size_t label = i % spec.num_classes;
    Tensor t({spec.channels, spec.height, spec.width});
    if (spec.pattern == SynthPattern::kBlocks) {
      blocks(t, spec, label, rng);
    } else {
      gradients_and_shapes(t, spec, label, rng);
    }
    images.push_back(std::move(t));
    labels.push_back(label);
  }
  return victim::LabeledBatch::with_class_labels(std::move(images), labels, spec.num_classes);
}

}  // namespace gradsense::dataio
