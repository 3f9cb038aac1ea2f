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

#ifndef GRADSENSE_CLI_HPP_
#define GRADSENSE_CLI_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradsense/attack.hpp"
#include "gradsense/dataio.hpp"
#include "gradsense/metrics.hpp"

namespace gradsense::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeFailure = 3, kVerificationFailure = 4 };

class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class DatasetKind { kSynthetic, kIdx, kCifar10, kCifar100 };

struct ExperimentConfig {
  std::string run_id = "run";
  DatasetKind dataset = DatasetKind::kSynthetic;
  dataio::SynthSpec synth;  // seed is replaced by the run seed
  std::filesystem::path idx_images, idx_labels, cifar_path;
  std::size_t data_offset = 0;
  std::string arch;
  attack::AttackConfig attack;  // seed is replaced by the run seed
  std::vector<std::string> methods{"magia", "dlg"};
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out = "results";
  double psnr_threshold = 19.0;
  bool write_images = true;

  std::string dataset_label() const;
  std::size_t schedule_param() const;
};

// Flat `key = value` text with `#` comments. Overrides are `key=value`
// strings applied after the file. Throws ConfigError.
ExperimentConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// The accepted keys, for help output.
std::vector<std::string> config_keys();

// Parallel run cap from GRADSENSE_THREADS (default 1). Throws ConfigError.
std::size_t thread_cap();

struct RunOutcome {
  std::string method;
  std::uint64_t seed = 0;
  attack::AttackResult result;
  metrics::BatchMetrics report;
  victim::LabeledBatch truth;
};

// Hidden batch for one seed.
victim::LabeledBatch hidden_batch(const ExperimentConfig& config, std::uint64_t seed);

// One (method, seed) run end to end; the attack sees only g*.
RunOutcome run_one(const ExperimentConfig& config, const std::string& method, std::uint64_t seed);

// Runs every (method, seed), then writes report.csv, traces/ and images/
// under config.out. Diagnostics go to `err`.
int run_experiment(const ExperimentConfig& config, std::ostream& log, std::ostream& err,
                   std::size_t threads = 1);

struct VerifyOptions {
  std::size_t identity_b_max = 64;
  std::size_t chain_b_max = 6;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  std::filesystem::path report;  // JSON; empty to skip
};

int run_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

struct BenchResult {
  double magia_seconds = 0.0;  // mean per iteration
  double dlg_seconds = 0.0;
  double ratio = 0.0;
  std::size_t iterations = 0;
};

// Times run_magia and run_dlg on the first configured seed.
BenchResult bench(const ExperimentConfig& config, std::size_t iterations);
int run_bench(const ExperimentConfig& config, std::size_t iterations, std::ostream& out, std::ostream& err);

}  // namespace gradsense::cli

#endif  // GRADSENSE_CLI_HPP_
