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

#include <cstdio>
#include <ostream>

#include "json.hpp"

#include "gradsense/cli.hpp"
#include "gradsense/verify.hpp"

namespace gradsense::cli {

int run_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suite({options.identity_b_max, options.chain_b_max, options.trials, options.seed});
  } catch (const std::exception& e) {
    err << "error: verify: " << e.what() << "\n";
    return kConfigError;
  }

  bool ok = true;
  nlohmann::json report = {{"identity_b_max", options.identity_b_max},
                           {"chain_b_max", options.chain_b_max},
                           {"trials", options.trials},
                           {"seed", options.seed},
                           {"checks", nlohmann::json::array()}};
  for (const auto& r : results) {
    const char* status = r.passed ? "pass" : (r.asserted ? "FAIL" : "info");
    char line[96];
    std::snprintf(line, sizeof line, "%-6s %-50s ", status, r.name.c_str());
    out << line << r.detail << "\n";
    if (r.asserted && !r.passed) ok = false;
    report["checks"].push_back(
        {{"name", r.name}, {"passed", r.passed}, {"asserted", r.asserted}, {"detail", r.detail}});
  }
  report["all_asserted_passed"] = ok;
  out << (ok ? "all asserted checks passed\n" : "verification FAILED\n");

  if (!options.report.empty()) {
    try {
      if (options.report.has_parent_path()) std::filesystem::create_directories(options.report.parent_path());
      dataio::write_file_atomic(options.report, report.dump(2) + "\n");
    } catch (const std::exception& e) {
      err << "error: writing " << options.report.string() << ": " << e.what() << "\n";
      return kRuntimeFailure;
    }
  }
  return ok ? kOk : kVerificationFailure;
}

}  // namespace gradsense::cli
