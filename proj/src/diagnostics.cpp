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

#include "pepita/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "pepita/errors.hpp"
#include "pepita/numerics.hpp"

namespace pepita {

double alignment_angle(const std::vector<Tensor>& w_list, const Tensor& f) {
  if (w_list.empty()) throw ParamError("alignment_angle: no weight matrices");
  // P = W_L * ... * W_1.
  Tensor product = w_list.front();
  for (std::size_t i = 1; i < w_list.size(); ++i) {
    product = matmul(w_list[i], product);
  }
  if (f.rank() != 2 || product.rank() != 2 || f.extent(0) != product.extent(1) ||
      f.extent(1) != product.extent(0)) {
    throw ShapeError("alignment_angle: product " + product.shape_str() +
                     " is not comparable with F^T of F " + f.shape_str());
  }
  // <vec(P), vec(F^T)> with P laid out [classes x input]: F^T element
  // (r, c) = F(c, r).
  const std::size_t rows = product.extent(0), cols = product.extent(1);
  double dot = 0.0, np = 0.0, nf = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double p = product[r * cols + c];
      const double ft = f[c * rows + r];
      dot += p * ft;
      np += p * p;
      nf += ft * ft;
    }
  }
  if (np == 0.0 || nf == 0.0) {
    throw ParamError("alignment_angle: undefined for a zero-norm operand");
  }
  const double cosine = std::clamp(dot / (std::sqrt(np) * std::sqrt(nf)), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / M_PI;
}

double weight_norm(const Tensor& w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * w[i];
  return std::sqrt(sum);
}

Histogram weight_histogram(const Tensor& w, std::size_t bin_count, double lo, double hi) {
  if (bin_count == 0) throw ParamError("weight_histogram: bin_count must be >= 1");
  if (!(hi > lo)) {
    throw ParamError("weight_histogram: degenerate range [" + std::to_string(lo) +
                     ", " + std::to_string(hi) + "]");
  }
  Histogram h;
  h.edges.resize(bin_count + 1);
  const double width = (hi - lo) / static_cast<double>(bin_count);
  for (std::size_t i = 0; i <= bin_count; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.counts.assign(bin_count, 0);

  double sum = 0.0, sum2 = 0.0;
  h.min = w.size() ? w[0] : 0.0;
  h.max = h.min;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = w[i];
    sum += v;
    sum2 += v * v;
    h.min = std::min(h.min, v);
    h.max = std::max(h.max, v);
    auto bin = static_cast<long long>(std::floor((v - lo) / width));
    bin = std::clamp<long long>(bin, 0, static_cast<long long>(bin_count) - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  if (w.size() > 0) {
    const double n = static_cast<double>(w.size());
    h.mean = sum / n;
    h.stddev = std::sqrt(std::max(0.0, sum2 / n - h.mean * h.mean));
  }
  return h;
}

}  // namespace pepita
