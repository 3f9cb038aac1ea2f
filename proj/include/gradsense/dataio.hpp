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

#ifndef GRADSENSE_DATAIO_HPP_
#define GRADSENSE_DATAIO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradsense/sag.hpp"
#include "gradsense/tensor.hpp"

namespace gradsense::dataio {

// Malformed input. `position` is a byte offset or, for record formats, a
// record index; the message says which.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImageSet {
  std::vector<Tensor> images;  // [C, H, W] in [0, 1]
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

ImageSet parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);
ImageSet read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

enum class CifarVariant { kCifar10, kCifar100 };

ImageSet parse_cifar_bin(std::span<const std::uint8_t> bytes, CifarVariant variant);
ImageSet read_cifar_bin(const std::filesystem::path& path, CifarVariant variant);

// The first `count` images with their labels as one-hot distributions.
victim::LabeledBatch take_batch(const ImageSet& set, std::size_t count);

enum class SynthPattern { kBlocks, kGradientsAndShapes };

struct SynthSpec {
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t num_classes = 10;
  SynthPattern pattern = SynthPattern::kBlocks;
  std::uint64_t seed = 0;

  void validate() const;
};

SynthPattern parse_pattern(std::string_view name);
std::string_view pattern_name(SynthPattern p);

// Labels are assigned round-robin over the classes.
victim::LabeledBatch synth_batch(const SynthSpec& spec, std::size_t batch);

// Binary PGM (one channel) or PPM (three channels), values rounded half-up.
std::string encode_image(const Tensor& image);
void write_image(const Tensor& image, const std::filesystem::path& path);

struct ReportRow {
  std::string run_id, method, dataset;
  std::size_t batch_size = 0;
  std::string arch, strategy;
  std::size_t schedule_param = 0;
  double alpha = 0.0, tv_weight = 0.0;
  std::size_t iterations = 0;
  std::string optimizer;
  std::uint64_t seed = 0;
  double rmse_mean = 0, rmse_std = 0, psnr_mean = 0, psnr_std = 0, ssim_mean = 0, ssim_std = 0;
  double recr = 0, final_loss = 0, wall_time_s = 0;
};

inline constexpr std::string_view kCsvHeader =
    "run_id,method,dataset,batch_size,arch,strategy,schedule_param,alpha,tv_weight,iterations,"
    "optimizer,seed,rmse_mean,rmse_std,psnr_mean,psnr_std,ssim_mean,ssim_std,recr,final_loss,"
    "wall_time_s";

// Rows sorted by (method, seed); floats with six significant digits.
std::string format_csv_report(std::vector<ReportRow> rows);
void write_csv_report(const std::vector<ReportRow>& rows, const std::filesystem::path& path);

}  // namespace gradsense::dataio

#endif  // GRADSENSE_DATAIO_HPP_
