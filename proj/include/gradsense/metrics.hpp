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

#ifndef GRADSENSE_METRICS_HPP_
#define GRADSENSE_METRICS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "gradsense/tensor.hpp"

namespace gradsense::metrics {

inline constexpr double kPsnrCap = 100.0;
inline constexpr double kRecoveryThreshold = 19.0;

struct MetricSet {
  double mse = 0.0;
  double rmse = 0.0;
  double psnr = 0.0;  // dB, peak 1
  double ssim = 0.0;
};

// Images are [C, H, W] with entries clamped to [0, 1] before scoring.
MetricSet score_pair(const Tensor& recon, const Tensor& truth);

double psnr_from_mse(double mse);
double ssim(const Tensor& a, const Tensor& b);

// result[i] is the reconstruction assigned to truth image i; the assignment
// minimises the summed MSE.
std::vector<std::size_t> match_batch(std::span<const Tensor> recon, std::span<const Tensor> truth);

// Minimum-cost assignment on a square row-major cost matrix; result[row] = column.
std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

struct BatchMetrics {
  MeanStd mse, rmse, psnr, ssim;
  double recr = 0.0;
  std::vector<std::size_t> matching;
  std::vector<MetricSet> pairs;  // in truth order
};

BatchMetrics batch_report(std::span<const Tensor> recon, std::span<const Tensor> truth,
                          double psnr_threshold = kRecoveryThreshold);

}  // namespace gradsense::metrics

#endif  // GRADSENSE_METRICS_HPP_
