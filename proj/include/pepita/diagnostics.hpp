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

#ifndef PEPITA_DIAGNOSTICS_HPP
#define PEPITA_DIAGNOSTICS_HPP

#include <cstddef>
#include <vector>

#include "pepita/tensor.hpp"

namespace pepita {

// Angle in degrees between the flattened product of the forward weight
// matrices and flattened F^T. With column-vector forward passes the
// composable product of W_list = {W_1, ..., W_L} is W_L * ... * W_1
// ([classes x input]), compared against F^T of the same shape. 90 deg means
// unaligned; above 90 deg is antialignment.
double alignment_angle(const std::vector<Tensor>& w_list, const Tensor& f);

// Frobenius norm.
double weight_norm(const Tensor& w);

struct Histogram {
  std::vector<double> edges;        // bin_count + 1 ascending edges
  std::vector<std::size_t> counts;  // bin_count entries; sums to input size
  double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
};

// Fixed-range histogram plus summary stats. Values outside [lo, hi] land in
// the boundary bins so the counts always conserve the element count.
Histogram weight_histogram(const Tensor& w, std::size_t bin_count, double lo, double hi);

}  // namespace pepita

#endif  // PEPITA_DIAGNOSTICS_HPP
