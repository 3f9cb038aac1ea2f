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
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>

#include "gradsense/cli.hpp"

namespace gradsense::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("config key '" + std::string(key) + "': expected " + std::string(want) +
                    ", got '" + std::string(value) + "'");
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || end != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

std::size_t to_size(std::string_view key, std::string_view value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

std::size_t to_positive(std::string_view key, std::string_view value) {
  const std::size_t n = to_size(key, value);
  if (n == 0) bad_value(key, value, "a positive integer");
  return n;
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || end != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value, "a finite number");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> items;
  while (true) {
    const auto comma = value.find(',');
    items.push_back(trim(value.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return items;
}

// "1,4,7" or "1..5" or a mix such as "0..2,9".
std::vector<std::uint64_t> parse_seeds(std::string_view key, std::string_view value) {
  std::vector<std::uint64_t> seeds;
  for (std::string_view item : split_list(value)) {
    const auto dots = item.find("..");
    if (dots == std::string_view::npos) {
      seeds.push_back(to_u64(key, item));
      continue;
    }
    const std::uint64_t lo = to_u64(key, trim(item.substr(0, dots)));
    const std::uint64_t hi = to_u64(key, trim(item.substr(dots + 2)));
    if (hi < lo) bad_value(key, item, "an ascending range lo..hi");
    if (hi - lo >= 100000) bad_value(key, item, "a range of fewer than 100000 seeds");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  std::set<std::uint64_t> seen;
  for (auto s : seeds) {
    if (!seen.insert(s).second) bad_value(key, value, "distinct seeds");
  }
  return seeds;
}

std::vector<std::string> parse_methods(std::string_view key, std::string_view value) {
  std::vector<std::string> methods;
  for (std::string_view item : split_list(value)) {
    if (item != "magia" && item != "dlg") bad_value(key, item, "magia or dlg");
    if (std::find(methods.begin(), methods.end(), item) != methods.end()) {
      bad_value(key, value, "each method at most once");
    }
    methods.emplace_back(item);
  }
  return methods;
}

DatasetKind parse_dataset(std::string_view key, std::string_view value) {
  if (value == "synthetic") return DatasetKind::kSynthetic;
  if (value == "idx") return DatasetKind::kIdx;
  if (value == "cifar10") return DatasetKind::kCifar10;
  if (value == "cifar100") return DatasetKind::kCifar100;
  bad_value(key, value, "one of synthetic, idx, cifar10, cifar100");
}

// Wraps parsers from other modules so their messages name the key.
template <typename F>
auto keyed(std::string_view key, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + std::string(key) + "': " + e.what());
  }
}

struct Builder {
  ExperimentConfig config;
  std::optional<std::size_t> horizon;
  std::set<std::string> seen;

  using Setter = std::function<void(Builder&, std::string_view, std::string_view)>;

  static const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"run_id", [](Builder& b, auto, auto v) { b.config.run_id = std::string(v); }},
        {"dataset", [](Builder& b, auto k, auto v) { b.config.dataset = parse_dataset(k, v); }},
        {"synth_pattern",
         [](Builder& b, auto k, auto v) {
           b.config.synth.pattern = keyed(k, [&] { return dataio::parse_pattern(v); });
         }},
        {"channels", [](Builder& b, auto k, auto v) { b.config.synth.channels = to_positive(k, v); }},
        {"height", [](Builder& b, auto k, auto v) { b.config.synth.height = to_positive(k, v); }},
        {"width", [](Builder& b, auto k, auto v) { b.config.synth.width = to_positive(k, v); }},
        {"num_classes",
         [](Builder& b, auto k, auto v) { b.config.synth.num_classes = to_positive(k, v); }},
        {"idx_images", [](Builder& b, auto, auto v) { b.config.idx_images = std::string(v); }},
        {"idx_labels", [](Builder& b, auto, auto v) { b.config.idx_labels = std::string(v); }},
        {"cifar_path", [](Builder& b, auto, auto v) { b.config.cifar_path = std::string(v); }},
        {"data_offset", [](Builder& b, auto k, auto v) { b.config.data_offset = to_size(k, v); }},
        {"arch", [](Builder& b, auto, auto v) { b.config.arch = std::string(v); }},
        {"batch_size",
         [](Builder& b, auto k, auto v) { b.config.attack.batch_size = to_positive(k, v); }},
        {"iterations",
         [](Builder& b, auto k, auto v) { b.config.attack.iterations = to_positive(k, v); }},
        {"alpha", [](Builder& b, auto k, auto v) { b.config.attack.alpha = to_double(k, v); }},
        {"tv_weight",
         [](Builder& b, auto k, auto v) { b.config.attack.tv_weight = to_double(k, v); }},
        {"strategy",
         [](Builder& b, auto k, auto v) {
           b.config.attack.schedule.strategy = keyed(k, [&] { return objective::parse_strategy(v); });
         }},
        {"constant_S",
         [](Builder& b, auto k, auto v) { b.config.attack.schedule.constant_S = to_positive(k, v); }},
        {"schedule_horizon", [](Builder& b, auto k, auto v) { b.horizon = to_positive(k, v); }},
        {"optimizer",
         [](Builder& b, auto k, auto v) {
           b.config.attack.optimizer = keyed(k, [&] { return optim::parse_optimizer(v); });
         }},
        {"clamp_images",
         [](Builder& b, auto k, auto v) { b.config.attack.clamp_images = to_bool(k, v); }},
        {"record_every",
         [](Builder& b, auto k, auto v) { b.config.attack.record_every = to_size(k, v); }},
        {"timing", [](Builder& b, auto k, auto v) { b.config.attack.timing = to_bool(k, v); }},
        {"methods", [](Builder& b, auto k, auto v) { b.config.methods = parse_methods(k, v); }},
        {"seeds", [](Builder& b, auto k, auto v) { b.config.seeds = parse_seeds(k, v); }},
        {"out", [](Builder& b, auto, auto v) { b.config.out = std::string(v); }},
        {"psnr_threshold",
         [](Builder& b, auto k, auto v) { b.config.psnr_threshold = to_double(k, v); }},
        {"write_images", [](Builder& b, auto k, auto v) { b.config.write_images = to_bool(k, v); }},
    };
    return table;
  }

  Builder() { config.attack.timing = false; }

  void apply(std::string_view key, std::string_view value, const std::string& where) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError(where + "unknown config key '" + std::string(key) + "'");
    }
    if (value.empty()) throw ConfigError(where + "config key '" + std::string(key) + "' has no value");
    it->second(*this, key, value);
    seen.insert(std::string(key));
  }

  void apply_line(std::string_view line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + "expected 'key = value', got '" + std::string(line) + "'");
    }
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }

  ExperimentConfig finish() {
    for (const char* required : {"arch", "batch_size"}) {
      if (!seen.count(required)) {
        throw ConfigError("missing required config key '" + std::string(required) + "'");
      }
    }
    auto& sched = config.attack.schedule;
    sched.E_script = horizon.value_or(config.attack.iterations);
    if (config.dataset == DatasetKind::kIdx && (config.idx_images.empty() || config.idx_labels.empty())) {
      throw ConfigError("dataset idx needs config keys 'idx_images' and 'idx_labels'");
    }
    if ((config.dataset == DatasetKind::kCifar10 || config.dataset == DatasetKind::kCifar100) &&
        config.cifar_path.empty()) {
      throw ConfigError("dataset " + config.dataset_label() + " needs config key 'cifar_path'");
    }
    if (config.methods.empty()) throw ConfigError("config key 'methods': at least one method");
    if (config.seeds.empty()) throw ConfigError("config key 'seeds': at least one seed");
    if (config.out.empty()) throw ConfigError("config key 'out': empty path");
    if (!(config.psnr_threshold >= 0.0)) {
      throw ConfigError("config key 'psnr_threshold': must be non-negative");
    }
    try {
      config.attack.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid attack settings: ") + e.what());
    }
    if (config.dataset == DatasetKind::kSynthetic) {
      try {
        config.synth.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid synthetic data settings: ") + e.what());
      }
    }
    return config;
  }
};

}  // namespace

std::string ExperimentConfig::dataset_label() const {
  switch (dataset) {
    case DatasetKind::kSynthetic:
      return "synthetic-" + std::string(dataio::pattern_name(synth.pattern)) + "-" +
             std::to_string(synth.channels) + "x" + std::to_string(synth.height) + "x" +
             std::to_string(synth.width);
    case DatasetKind::kIdx:
      return "idx";
    case DatasetKind::kCifar10:
      return "cifar10";
    case DatasetKind::kCifar100:
      return "cifar100";
  }
  return "unknown";
}

std::size_t ExperimentConfig::schedule_param() const {
  const auto& s = attack.schedule;
  switch (s.strategy) {
    case objective::Strategy::kConstant:
      return s.constant_S;
    case objective::Strategy::kFracConst:
    case objective::Strategy::kRevConst:
      return s.E_script;
    case objective::Strategy::kFracTotal:
    case objective::Strategy::kRevTotal:
      return attack.iterations;
  }
  return 0;
}

ExperimentConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides) {
  Builder b;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    b.apply_line(line, "line " + std::to_string(line_no) + ": ");
  }
  for (const auto& o : overrides) b.apply_line(trim(o), "--set " + o + ": ");
  return b.finish();
}

ExperimentConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), overrides);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : Builder::setters()) keys.push_back(k);
  return keys;
}

std::size_t thread_cap() {
  const char* env = std::getenv("GRADSENSE_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  return to_positive("GRADSENSE_THREADS", trim(env));
}

}  // namespace gradsense::cli
