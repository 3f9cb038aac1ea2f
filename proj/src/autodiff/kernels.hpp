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

#ifndef GRADSENSE_SRC_AUTODIFF_KERNELS_HPP_
#define GRADSENSE_SRC_AUTODIFF_KERNELS_HPP_

#include <vector>

#include "gradsense/autodiff.hpp"

namespace gradsense::autodiff::detail {

// Validates input shapes for `op` and computes its forward value.
// Throws ShapeError on mismatch and NonFiniteError on a non-finite result.
Tensor compute(Op op, const std::vector<NodeRef>& inputs, const Attrs& attrs);

}  // namespace gradsense::autodiff::detail

#endif  // GRADSENSE_SRC_AUTODIFF_KERNELS_HPP_
