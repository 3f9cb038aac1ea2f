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

#ifndef GRADSENSE_TENSOR_HPP_
#define GRADSENSE_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gradsense {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{1}, v); }

  std::size_t size() const { return data.size(); }
  double item() const;
  bool all_finite() const;

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }
};

bool operator==(const Tensor& a, const Tensor& b);

}  // namespace gradsense

#endif  // GRADSENSE_TENSOR_HPP_
