// Copyright 2026 The Pepita Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PEPITA_NUMERICS_HPP
#define PEPITA_NUMERICS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "pepita/rng.hpp"
#include "pepita/tensor.hpp"

namespace pepita {

// Dense kernels and seeded sampling. All functions are pure in their inputs
// plus an explicitly passed Rng, so concurrent calls on disjoint data are
// safe. Matrix products are delegated to Eigen behind this interface; the
// tests pin the results against loop oracles.

// Standard product of rank-2 tensors: [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T: [m x k] * [n x k]^T -> [m x n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a^T * b: [k x m]^T * [k x n] -> [m x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

// Valid (no padding) 2-D cross-correlation, one output map per filter.
// input [C x H x W], filters [K x C x k x k], H' = (H-k)/stride + 1.
Tensor conv2d_valid(const Tensor& input, const Tensor& filters, std::size_t stride);

// Copies every k x k patch of `input` into a [C*k*k x H'*W'] column matrix
// so that conv2d reduces to one matrix product. Exposed for the update
// rules, which need the same patch extraction as the forward pass.
Tensor im2col(const Tensor& input, std::size_t kernel, std::size_t stride);

// Adjoint of im2col: scatter-adds columns back onto an image of shape
// [C x H x W]. Used by backward passes through convolution.
Tensor col2im(const Tensor& cols, const std::vector<std::size_t>& image_shape,
              std::size_t kernel, std::size_t stride);

struct MaxPoolResult {
  Tensor output;                       // [K x H' x W']
  std::vector<std::uint32_t> argmax;   // flat input index per output element
};

// Per-window maximum over [K x H x W]. Ties go to the first index in
// row-major scan order.
MaxPoolResult maxpool2d(const Tensor& input, std::size_t size, std::size_t stride);

// i.i.d. N(mean, std^2) entries; reproducible from the Rng state.
Tensor sample_normal(Rng& rng, double mean, double stddev,
                     std::vector<std::size_t> shape);

// i.i.d. uniform on [-half_width, +half_width].
Tensor sample_uniform_sym(Rng& rng, double half_width,
                          std::vector<std::size_t> shape);

}  // namespace pepita

#endif  // PEPITA_NUMERICS_HPP
