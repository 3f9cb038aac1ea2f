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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradsense/cli.hpp"

namespace gc = gradsense::cli;

namespace {

struct RunFlags {
  std::string config;
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "flat key = value config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--method", method, "run only this method")->check(CLI::IsMember({"magia", "dlg"}));
    cmd->add_option("--seed", seeds, "run only these seeds (repeatable)");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--set", sets, "override a config key, key=value (repeatable)");
  }

  std::vector<std::string> overrides() const {
    std::vector<std::string> o = sets;
    if (!method.empty()) o.push_back("methods=" + method);
    if (!seeds.empty()) {
      std::string list;
      for (auto s : seeds) list += (list.empty() ? "" : ",") + std::to_string(s);
      o.push_back("seeds=" + list);
    }
    if (!out.empty()) o.push_back("out=" + out);
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradsense: gradient inversion attacks and bound checks"};
  app.require_subcommand(1);

  RunFlags attack_flags;
  auto* attack = app.add_subcommand("attack", "run MAGIA and/or DLG over seeds and write reports");
  attack_flags.attach(attack);

  RunFlags bench_flags;
  std::size_t bench_iters = 100;
  auto* bench = app.add_subcommand("bench", "per-iteration wall time of magia vs dlg");
  bench_flags.attach(bench);
  bench->add_option("--iterations", bench_iters, "iterations per timed run")->check(CLI::PositiveNumber);

  gc::VerifyOptions vopt;
  std::string vout;
  auto* verify = app.add_subcommand("verify", "exhaustive checks of the subset bound chain");
  verify->add_option("--b-max", vopt.identity_b_max, "largest B for the coefficient identity")
      ->check(CLI::Range(1, 64));
  verify->add_option("--chain-b-max", vopt.chain_b_max, "largest B for enumerated chain probes")
      ->check(CLI::Range(2, 12));
  verify->add_option("--trials", vopt.trials, "random trials per probe")->check(CLI::PositiveNumber);
  verify->add_option("--seed", vopt.seed, "rng seed");
  verify->add_option("--out", vout, "directory for verify.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? gc::kOk : gc::kConfigError;
  }

  if (*verify) {
    if (!vout.empty()) vopt.report = std::filesystem::path(vout) / "verify.json";
    return gc::run_verify(vopt, std::cout, std::cerr);
  }

  RunFlags& flags = *attack ? attack_flags : bench_flags;
  gc::ExperimentConfig config;
  std::size_t threads = 1;
  try {
    config = gc::parse_config(flags.config, flags.overrides());
    threads = gc::thread_cap();
  } catch (const gc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return gc::kConfigError;
  }
  if (*attack) return gc::run_experiment(config, std::cout, std::cerr, threads);
  return gc::run_bench(config, bench_iters, std::cout, std::cerr);
}
