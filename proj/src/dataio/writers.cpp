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
#include <cstdio>
#include <tuple>

#include "gradsense/dataio.hpp"

namespace gradsense::dataio {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string encode_image(const Tensor& image) {
  if (image.shape.size() != 3 || (image.shape[0] != 1 && image.shape[0] != 3)) {
    throw std::invalid_argument("write_image: need a [1|3, H, W] image, got " + shape_string(image.shape));
  }
  const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];
  std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + c * h * w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t q = 0; q < w; ++q)
      for (std::size_t k = 0; k < c; ++k) {
        const double v = std::clamp(image[(k * h + r) * w + q], 0.0, 1.0);
        out += static_cast<char>(static_cast<unsigned char>(std::floor(v * 255.0 + 0.5)));
      }
  return out;
}

void write_image(const Tensor& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_image(image));
}

std::string format_csv_report(std::vector<ReportRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.method, a.seed) < std::tie(b.method, b.seed);
  });
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    const std::string cells[] = {
        field(r.run_id), field(r.method), field(r.dataset), std::to_string(r.batch_size), field(r.arch),
        field(r.strategy), std::to_string(r.schedule_param), num(r.alpha), num(r.tv_weight),
        std::to_string(r.iterations), field(r.optimizer), std::to_string(r.seed), num(r.rmse_mean),
        num(r.rmse_std), num(r.psnr_mean), num(r.psnr_std), num(r.ssim_mean), num(r.ssim_std), num(r.recr),
        num(r.final_loss), num(r.wall_time_s)};
    bool first = true;
    for (const auto& c : cells) {
      if (!first) out += ',';
      out += c;
      first = false;
    }
    out += '\n';
  }
  return out;
}

void write_csv_report(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
  write_file_atomic(path, format_csv_report(rows));
}

}  // namespace gradsense::dataio
