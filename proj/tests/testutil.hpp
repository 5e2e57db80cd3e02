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

#ifndef PEPITA_TESTS_TESTUTIL_HPP
#define PEPITA_TESTS_TESTUTIL_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "pepita/rng.hpp"
#include "pepita/tensor.hpp"

namespace pepita::testutil {

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

// Reference oracles, deliberately written as plain loops with no shared
// code paths with the implementations they check.

// Quadruple-loop valid cross-correlation.
inline Tensor conv2d_oracle(const Tensor& input, const Tensor& filters,
                            std::size_t stride) {
  const std::size_t c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  const std::size_t k = filters.shape()[0], kk = filters.shape()[2];
  const std::size_t oh = (h - kk) / stride + 1, ow = (w - kk) / stride + 1;
  Tensor out({k, oh, ow});
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t ky = 0; ky < kk; ++ky)
            for (std::size_t kx = 0; kx < kk; ++kx)
              acc += input[ch * h * w + (oy * stride + ky) * w + (ox * stride + kx)] *
                     filters[((f * c + ch) * kk + ky) * kk + kx];
        out[(f * oh + oy) * ow + ox] = acc;
      }
  return out;
}

// Windowed max with first-index tie break.
inline Tensor maxpool_oracle(const Tensor& input, std::size_t size, std::size_t stride) {
  const std::size_t c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  const std::size_t oh = (h - size) / stride + 1, ow = (w - size) / stride + 1;
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = input[ch * h * w + oy * stride * w + ox * stride];
        for (std::size_t ky = 0; ky < size; ++ky)
          for (std::size_t kx = 0; kx < size; ++kx)
            best = std::max(best, input[ch * h * w + (oy * stride + ky) * w +
                                        (ox * stride + kx)]);
        out[(ch * oh + oy) * ow + ox] = best;
      }
  return out;
}

inline Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_sym(scale);
  return t;
}

}  // namespace pepita::testutil

#endif  // PEPITA_TESTS_TESTUTIL_HPP
