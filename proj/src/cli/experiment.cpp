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
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "gradsense/cli.hpp"
#include "gradsense/sag.hpp"

namespace gradsense::cli {
namespace fs = std::filesystem;

namespace {

dataio::ImageSet load_set(const ExperimentConfig& config) {
  switch (config.dataset) {
    case DatasetKind::kIdx:
      return dataio::read_idx(config.idx_images, config.idx_labels);
    case DatasetKind::kCifar10:
      return dataio::read_cifar_bin(config.cifar_path, dataio::CifarVariant::kCifar10);
    case DatasetKind::kCifar100:
      return dataio::read_cifar_bin(config.cifar_path, dataio::CifarVariant::kCifar100);
    case DatasetKind::kSynthetic:
      break;
  }
  throw std::logic_error("load_set: synthetic data is generated, not loaded");
}

victim::VictimModel build_victim(const ExperimentConfig& config, const victim::LabeledBatch& truth,
                                 std::uint64_t seed) {
  const Shape& s = truth.images.front().shape;
  const victim::ImageShape input{s.at(0), s.at(1), s.at(2)};
  return victim::init_model(victim::parse_arch(config.arch, input, truth.labels.front().size()), seed);
}

std::string trace_csv(const attack::AttackResult& r) {
  std::string out = "iteration,S,loss,seconds\n";
  char buf[96];
  for (std::size_t e = 0; e < r.loss_trace.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.6g\n", e, r.per_iteration_S[e], r.loss_trace[e],
                  r.iteration_seconds[e]);
    out += buf;
  }
  return out;
}

std::string run_tag(const std::string& method, std::uint64_t seed) {
  return method + "_seed" + std::to_string(seed);
}

void write_images(const RunOutcome& o, const fs::path& dir) {
  const auto ext = o.truth.images.front().shape.at(0) == 1 ? ".pgm" : ".ppm";
  fs::create_directories(dir);
  const auto& match = o.report.matching;
  for (std::size_t i = 0; i < o.truth.size(); ++i) {
    const auto n = std::to_string(i);
    dataio::write_image(o.truth.images[i], dir / ("truth_" + n + ext));
    dataio::write_image(o.result.final_images[match[i]], dir / ("recon_" + n + ext));
    for (const auto& snap : o.result.snapshots) {
      dataio::write_image(snap.images[match[i]],
                          dir / ("iter" + std::to_string(snap.iteration) + "_" + n + ext));
    }
  }
}

dataio::ReportRow report_row(const ExperimentConfig& config, const RunOutcome& o) {
  dataio::ReportRow row;
  row.run_id = config.run_id;
  row.method = o.method;
  row.dataset = config.dataset_label();
  row.batch_size = config.attack.batch_size;
  row.arch = config.arch;
  row.strategy = std::string(objective::strategy_name(config.attack.schedule.strategy));
  row.schedule_param = config.schedule_param();
  row.alpha = config.attack.alpha;
  row.tv_weight = config.attack.tv_weight;
  row.iterations = config.attack.iterations;
  row.optimizer = config.attack.optimizer.to_string();
  row.seed = o.seed;
  row.rmse_mean = o.report.rmse.mean;
  row.rmse_std = o.report.rmse.std;
  row.psnr_mean = o.report.psnr.mean;
  row.psnr_std = o.report.psnr.std;
  row.ssim_mean = o.report.ssim.mean;
  row.ssim_std = o.report.ssim.std;
  row.recr = o.report.recr;
  row.final_loss = o.result.loss_trace.empty() ? 0.0 : o.result.loss_trace.back();
  for (double t : o.result.iteration_seconds) row.wall_time_s += t;
  return row;
}

// Fails early, before any attack runs, if nothing can be written under `out`.
void probe_writable(const fs::path& out) {
  fs::create_directories(out);
  const fs::path probe = out / ".write-probe";
  dataio::write_file_atomic(probe, "");
  fs::remove(probe);
}

}  // namespace

victim::LabeledBatch hidden_batch(const ExperimentConfig& config, std::uint64_t seed) {
  const std::size_t B = config.attack.batch_size;
  if (config.dataset == DatasetKind::kSynthetic) {
    dataio::SynthSpec spec = config.synth;
    spec.seed = seed;
    return dataio::synth_batch(spec, B);
  }
  // Seed k reads the k-th block of B consecutive records after data_offset.
  dataio::ImageSet set = load_set(config);
  const std::size_t start = config.data_offset + static_cast<std::size_t>(seed) * B;
  if (start + B > set.images.size()) {
    throw std::out_of_range("dataset has " + std::to_string(set.images.size()) + " records; seed " +
                            std::to_string(seed) + " needs records [" + std::to_string(start) + ", " +
                            std::to_string(start + B) + ")");
  }
  dataio::ImageSet slice;
  slice.num_classes = set.num_classes;
  slice.images.assign(set.images.begin() + start, set.images.begin() + start + B);
  slice.labels.assign(set.labels.begin() + start, set.labels.begin() + start + B);
  return dataio::take_batch(slice, B);
}

RunOutcome run_one(const ExperimentConfig& config, const std::string& method, std::uint64_t seed) {
  RunOutcome o;
  o.method = method;
  o.seed = seed;
  o.truth = hidden_batch(config, seed);
  const victim::VictimModel model = build_victim(config, o.truth, seed);
  const victim::TargetGradient g_star = victim::sag_capture(model, o.truth);

  attack::AttackConfig ac = config.attack;
  ac.seed = seed;
  if (method == "magia") {
    o.result = attack::run_magia(ac, g_star, model);
  } else if (method == "dlg") {
    o.result = attack::run_dlg(ac, g_star, model);
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  o.report = metrics::batch_report(o.result.final_images, o.truth.images, config.psnr_threshold);
  return o;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log, std::ostream& err,
                   std::size_t threads) {
  try {
    probe_writable(config.out);
  } catch (const std::exception& e) {
    err << "error: output directory '" << config.out.string() << "' is not writable: " << e.what()
        << "\n";
    return kRuntimeFailure;
  }

  struct Job {
    std::string method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& m : config.methods)
    for (auto s : config.seeds) jobs.push_back({m, s});

  std::vector<std::optional<RunOutcome>> outcomes(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const std::string where = "method " + jobs[j].method + ", seed " + std::to_string(jobs[j].seed);
      try {
        outcomes[j] = run_one(config, jobs[j].method, jobs[j].seed);
        std::lock_guard lock(log_mutex);
        char buf[64];
        std::snprintf(buf, sizeof buf, "psnr %.3f dB, recr %.2f", outcomes[j]->report.psnr.mean,
                      outcomes[j]->report.recr);
        log << where << ": " << buf << "\n";
      } catch (const attack::AttackError& e) {
        failures[j] = where + ", " + e.what();
      } catch (const std::exception& e) {
        failures[j] = where + ": " + e.what();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }

  bool failed = false;
  for (const auto& f : failures) {
    if (!f.empty()) {
      err << "error: " << f << "\n";
      failed = true;
    }
  }
  if (failed) return kRuntimeFailure;

  // Single writer from here on. report.csv goes last so its presence marks a complete run.
  try {
    std::vector<dataio::ReportRow> rows;
    for (const auto& o : outcomes) {
      const std::string tag = run_tag(o->method, o->seed);
      fs::create_directories(config.out / "traces");
      dataio::write_file_atomic(config.out / "traces" / (tag + ".csv"), trace_csv(o->result));
      const std::size_t c = o->truth.images.front().shape.at(0);
      if (config.write_images && (c == 1 || c == 3)) write_images(*o, config.out / "images" / tag);
      rows.push_back(report_row(config, *o));
    }
    dataio::write_csv_report(rows, config.out / "report.csv");
  } catch (const std::exception& e) {
    err << "error: writing results under '" << config.out.string() << "': " << e.what() << "\n";
    return kRuntimeFailure;
  }
  log << "wrote " << (config.out / "report.csv").string() << " (" << jobs.size() << " rows)\n";
  return kOk;
}

BenchResult bench(const ExperimentConfig& config, std::size_t iterations) {
  const std::uint64_t seed = config.seeds.front();
  const victim::LabeledBatch truth = hidden_batch(config, seed);
  const victim::VictimModel model = build_victim(config, truth, seed);
  const victim::TargetGradient g_star = victim::sag_capture(model, truth);

  attack::AttackConfig ac = config.attack;
  ac.seed = seed;
  ac.iterations = iterations;
  ac.timing = true;
  ac.record_every = 0;

  BenchResult r;
  r.iterations = iterations;
  r.magia_seconds = attack::run_magia(ac, g_star, model).mean_iteration_seconds();
  r.dlg_seconds = attack::run_dlg(ac, g_star, model).mean_iteration_seconds();
  r.ratio = r.dlg_seconds > 0.0 ? r.magia_seconds / r.dlg_seconds : 0.0;
  return r;
}

int run_bench(const ExperimentConfig& config, std::size_t iterations, std::ostream& out, std::ostream& err) {
  try {
    const BenchResult r = bench(config, iterations);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "iterations %zu\nmagia  %.6f s/iter\ndlg    %.6f s/iter\nratio  %.3f\n", r.iterations,
                  r.magia_seconds, r.dlg_seconds, r.ratio);
    out << buf;
    return kOk;
  } catch (const std::exception& e) {
    err << "error: bench: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace gradsense::cli
