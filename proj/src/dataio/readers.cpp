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
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <system_error>

#include "gradsense/dataio.hpp"

namespace gradsense::dataio {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

std::string at(std::size_t offset) { return " at byte offset " + std::to_string(offset); }

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t offset, std::string_view what) {
  if (b.size() < offset + 4) {
    throw ParseError(offset, "truncated " + std::string(what) + at(offset) + ": need 4 bytes, file has " +
                                 std::to_string(b.size() - std::min(b.size(), offset)));
  }
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

void expect_magic(std::span<const std::uint8_t> b, std::uint32_t magic, std::string_view file) {
  const std::uint32_t found = be32(b, 0, std::string(file) + " magic");
  if (found != magic) {
    throw ParseError(0, "bad " + std::string(file) + " magic" + at(0) + ": expected " + hex32(magic) +
                            ", found " + hex32(found));
  }
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

ImageSet parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  expect_magic(images, 0x00000803, "IDX image");
  const std::uint64_t n = be32(images, 4, "IDX image count");
  const std::uint64_t rows = be32(images, 8, "IDX row count");
  const std::uint64_t cols = be32(images, 12, "IDX column count");
  if (n > 0 && (rows == 0 || cols == 0)) {
    throw ParseError(rows == 0 ? 8 : 12, "zero image dimension" + at(rows == 0 ? 8 : 12));
  }
  // Each factor is < 2^32, so the product of two fits; check before the third.
  const std::uint64_t plane = rows * cols;
  if (n > 0 && plane > std::numeric_limits<std::uint64_t>::max() / n) {
    throw ParseError(4, "dimension overflow" + at(4) + ": " + std::to_string(n) + " x " +
                            std::to_string(rows) + " x " + std::to_string(cols));
  }
  const std::uint64_t pixels = n * plane;
  const std::uint64_t have = images.size() - 16;
  if (have < pixels) {
    throw ParseError(images.size(), "truncated IDX image data" + at(images.size()) + ": expected " +
                                        std::to_string(pixels) + " pixel bytes, found " + std::to_string(have));
  }
  if (have > pixels) throw ParseError(16 + pixels, "trailing bytes after IDX image data" + at(16 + pixels));

  expect_magic(labels, 0x00000801, "IDX label");
  const std::uint64_t nl = be32(labels, 4, "IDX label count");
  if (nl != n) {
    throw ParseError(4, "IDX label count " + std::to_string(nl) + at(4) + " does not match image count " +
                            std::to_string(n));
  }
  if (labels.size() - 8 < n) {
    throw ParseError(labels.size(), "truncated IDX label data" + at(labels.size()) + ": expected " +
                                        std::to_string(n) + " label bytes");
  }
  if (labels.size() - 8 > n) throw ParseError(8 + n, "trailing bytes after IDX label data" + at(8 + n));

  ImageSet set;
  set.images.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Tensor t({1, rows, cols});
    for (std::uint64_t k = 0; k < plane; ++k) t[k] = images[16 + i * plane + k] / 255.0;
    set.images.push_back(std::move(t));
    set.labels.push_back(labels[8 + i]);
    set.num_classes = std::max<std::size_t>(set.num_classes, labels[8 + i] + 1u);
  }
  return set;
}

ImageSet read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return parse_idx(read_file(images_path), read_file(labels_path));
}

ImageSet parse_cifar_bin(std::span<const std::uint8_t> bytes, CifarVariant variant) {
  constexpr std::size_t kPixels = 3 * 32 * 32;
  const std::size_t header = variant == CifarVariant::kCifar10 ? 1 : 2;
  const std::size_t record = header + kPixels;
  const std::size_t classes = variant == CifarVariant::kCifar10 ? 10 : 100;
  if (bytes.size() % record != 0) {
    const std::size_t idx = bytes.size() / record;
    throw ParseError(idx, "truncated record " + std::to_string(idx) + " (record index)" + at(idx * record) +
                              ": file length " + std::to_string(bytes.size()) +
                              " is not a multiple of the record size " + std::to_string(record));
  }
  ImageSet set;
  set.num_classes = classes;
  const std::size_t n = bytes.size() / record;
  set.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* r = bytes.data() + i * record;
    if (variant == CifarVariant::kCifar100 && r[0] >= 20) {
      throw ParseError(i, "record " + std::to_string(i) + " (record index): coarse label " +
                              std::to_string(r[0]) + " out of range");
    }
    const std::size_t label = r[header - 1];
    if (label >= classes) {
      throw ParseError(i, "record " + std::to_string(i) + " (record index): label " + std::to_string(label) +
                              " out of range for " + std::to_string(classes) + " classes");
    }
    Tensor t({3, 32, 32});
    for (std::size_t k = 0; k < kPixels; ++k) t[k] = r[header + k] / 255.0;
    set.images.push_back(std::move(t));
    set.labels.push_back(label);
  }
  return set;
}

ImageSet read_cifar_bin(const std::filesystem::path& path, CifarVariant variant) {
  return parse_cifar_bin(read_file(path), variant);
}

victim::LabeledBatch take_batch(const ImageSet& set, std::size_t count) {
  if (count > set.images.size()) {
    throw std::invalid_argument("dataset has " + std::to_string(set.images.size()) + " images, " +
                                std::to_string(count) + " requested");
  }
  std::vector<Tensor> images(set.images.begin(), set.images.begin() + static_cast<std::ptrdiff_t>(count));
  std::vector<std::size_t> labels(set.labels.begin(), set.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return victim::LabeledBatch::with_class_labels(std::move(images), labels, set.num_classes);
}

}  // namespace gradsense::dataio
