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
#include <limits>
#include <stdexcept>
#include <string>

#include "gradsense/metrics.hpp"

namespace gradsense::metrics {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr std::size_t kWindow = 8;

void require_same_shape(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape || a.shape.size() != 3) {
    throw std::invalid_argument("metrics: shapes " + shape_string(a.shape) + " and " +
                                shape_string(b.shape) + " differ or are not [C, H, W]");
  }
}

Tensor clamped(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// SSIM of one window with top-left (r0, c0) in plane p.
double window_ssim(const Tensor& a, const Tensor& b, std::size_t p, std::size_t r0, std::size_t c0,
                   std::size_t wh, std::size_t ww) {
  const std::size_t h = a.shape[1], w = a.shape[2];
  const double n = static_cast<double>(wh * ww);
  double ma = 0.0, mb = 0.0;
  for (std::size_t r = r0; r < r0 + wh; ++r)
    for (std::size_t c = c0; c < c0 + ww; ++c) {
      ma += a[(p * h + r) * w + c];
      mb += b[(p * h + r) * w + c];
    }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t r = r0; r < r0 + wh; ++r)
    for (std::size_t c = c0; c < c0 + ww; ++c) {
      const double da = a[(p * h + r) * w + c] - ma;
      const double db = b[(p * h + r) * w + c] - mb;
      va += da * da;
      vb += db * db;
      cov += da * db;
    }
  va /= n;
  vb /= n;
  cov /= n;
  return ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a_in, const Tensor& b_in) {
  require_same_shape(a_in, b_in);
  const Tensor a = clamped(a_in), b = clamped(b_in);
  const std::size_t ch = a.shape[0], h = a.shape[1], w = a.shape[2];
  const bool full = h < kWindow || w < kWindow;
  const std::size_t wh = full ? h : kWindow, ww = full ? w : kWindow;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < ch; ++p)
    for (std::size_t r = 0; r + wh <= h; ++r)
      for (std::size_t c = 0; c + ww <= w; ++c) {
        total += window_ssim(a, b, p, r, c, wh, ww);
        ++count;
      }
  return count ? total / static_cast<double>(count) : 1.0;
}

MetricSet score_pair(const Tensor& recon, const Tensor& truth) {
  require_same_shape(recon, truth);
  const Tensor r = clamped(recon), t = clamped(truth);
  MetricSet m;
  for (std::size_t i = 0; i < r.size(); ++i) m.mse += (r[i] - t[i]) * (r[i] - t[i]);
  m.mse /= static_cast<double>(std::max<std::size_t>(r.size(), 1));
  m.rmse = std::sqrt(m.mse);
  m.psnr = psnr_from_mse(m.mse);
  m.ssim = ssim(r, t);
  return m;
}

std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("hungarian: cost matrix is not n x n");
  // Potentials formulation with 1-based rows/columns; column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

std::vector<std::size_t> match_batch(std::span<const Tensor> recon, std::span<const Tensor> truth) {
  if (recon.size() != truth.size()) {
    throw std::invalid_argument("match_batch: " + std::to_string(recon.size()) +
                                " reconstructions for " + std::to_string(truth.size()) + " images");
  }
  const std::size_t n = truth.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = score_pair(recon[j], truth[i]).mse;
  return hungarian(cost, n);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

BatchMetrics batch_report(std::span<const Tensor> recon, std::span<const Tensor> truth,
                          double psnr_threshold) {
  BatchMetrics out;
  out.matching = match_batch(recon, truth);
  std::vector<double> mse, rmse, psnr, ss;
  std::size_t recovered = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const MetricSet m = score_pair(recon[out.matching[i]], truth[i]);
    out.pairs.push_back(m);
    mse.push_back(m.mse);
    rmse.push_back(m.rmse);
    psnr.push_back(m.psnr);
    ss.push_back(m.ssim);
    if (m.psnr > psnr_threshold) ++recovered;
  }
  out.mse = mean_std(mse);
  out.rmse = mean_std(rmse);
  out.psnr = mean_std(psnr);
  out.ssim = mean_std(ss);
  out.recr = truth.empty() ? 0.0 : static_cast<double>(recovered) / static_cast<double>(truth.size());
  return out;
}

}  // namespace gradsense::metrics
