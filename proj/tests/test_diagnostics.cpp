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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pepita/diagnostics.hpp"
#include "pepita/errors.hpp"
#include "pepita/numerics.hpp"
#include "testutil.hpp"

using namespace pepita;
using namespace pepita::testutil;

namespace {

// Transposed copy, used to make comparable operands by hand.
Tensor transpose(const Tensor& m) {
  Tensor t({m.extent(1), m.extent(0)});
  for (std::size_t i = 0; i < m.extent(0); ++i)
    for (std::size_t j = 0; j < m.extent(1); ++j) t[j * m.extent(0) + i] = m[i * m.extent(1) + j];
  return t;
}

}  // namespace

TEST_CASE("alignment_angle: parallel, antiparallel, orthogonal") {
  Rng rng(1);
  const Tensor f = random_tensor(rng, {6, 3});  // F: input x out
  // Product must be [out x input]; build it directly from F^T.
  const Tensor ft = transpose(f);
  CHECK(alignment_angle({2.5 * ft}, f) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(alignment_angle({-0.3 * ft}, f) == doctest::Approx(180.0).epsilon(1e-9));

  // Orthogonal operand: zero out all but one entry of each and separate them.
  Tensor p({3, 6});
  p[0] = 1.0;
  Tensor f2({6, 3});
  f2[1 * 3 + 1] = 1.0;  // F^T entry (1,1) vs product entry (0,0)
  CHECK(alignment_angle({p}, f2) == doctest::Approx(90.0).epsilon(1e-12));
}

TEST_CASE("alignment_angle composes the weight product in forward order") {
  Rng rng(2);
  const Tensor w1 = random_tensor(rng, {4, 6});
  const Tensor w2 = random_tensor(rng, {3, 4});
  const Tensor f = random_tensor(rng, {6, 3});
  const Tensor product = matmul(w2, w1);
  CHECK(alignment_angle({w1, w2}, f) ==
        doctest::Approx(alignment_angle({product}, f)).epsilon(1e-12));
}

TEST_CASE("alignment_angle invariances: positive scaling, negation flips") {
  Rng rng(3);
  const Tensor w = random_tensor(rng, {5, 7});
  const Tensor f = random_tensor(rng, {7, 5});
  const double theta = alignment_angle({w}, f);
  CHECK(alignment_angle({3.7 * w}, f) == doctest::Approx(theta).epsilon(1e-9));
  CHECK(alignment_angle({-1.0 * w}, f) == doctest::Approx(180.0 - theta).epsilon(1e-9));
}

TEST_CASE("alignment_angle rejects zero operands and non-composable shapes") {
  const Tensor z({3, 4});
  const Tensor f({4, 3});
  CHECK_THROWS_AS(alignment_angle({z}, Tensor::full({4, 3}, 1.0)), ParamError);
  CHECK_THROWS_AS(alignment_angle({Tensor::full({3, 4}, 1.0)}, Tensor({5, 3})), ShapeError);
}

TEST_CASE("He-initialized weights start near 90 degrees on the MNIST shape") {
  // 100 seeds; every angle should land in the 85..95 band.
  std::size_t in_band = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng wrng = Rng::derive(seed, "weights");
    const Tensor w1 = sample_normal(wrng, 0.0, std::sqrt(2.0 / 784.0), {1024, 784});
    const Tensor w2 = sample_normal(wrng, 0.0, std::sqrt(2.0 / 1024.0), {10, 1024});
    Rng frng = Rng::derive(seed, "F");
    const Tensor f = make_F_like(frng);
    const double theta = alignment_angle({w1, w2}, f);
    if (theta >= 85.0 && theta <= 95.0) ++in_band;
  }
  CHECK(in_band >= 99);
}

TEST_CASE("weight_norm basics and random oracle") {
  CHECK(weight_norm(Tensor({4, 4})) == 0.0);
  CHECK(weight_norm(Tensor::matrix({{3, 4}})) == doctest::Approx(5.0).epsilon(1e-15));
  Rng rng(9);
  const Tensor t = random_tensor(rng, {13, 7});
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) sum += t[i] * t[i];
  CHECK(weight_norm(t) == doctest::Approx(std::sqrt(sum)).epsilon(1e-12));
}

TEST_CASE("weight_histogram: single bin for constant input, counts conserve") {
  const Tensor constant = Tensor::full({50}, 0.2);
  const Histogram h = weight_histogram(constant, 10, 0.0, 1.0);
  std::size_t total = 0, occupied = 0;
  for (std::size_t c : h.counts) {
    total += c;
    occupied += c > 0;
  }
  CHECK(total == 50);
  CHECK(occupied == 1);
  CHECK(h.mean == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(h.stddev == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(4);
  const Tensor noise = random_tensor(rng, {997}, 2.0);
  const Histogram hn = weight_histogram(noise, 23, -1.0, 1.0);  // clamps outliers
  std::size_t total_n = 0;
  for (std::size_t c : hn.counts) total_n += c;
  CHECK(total_n == 997);
  CHECK(hn.edges.size() == 24);
}

TEST_CASE("weight_histogram rejects degenerate parameters") {
  const Tensor t({4});
  CHECK_THROWS_AS(weight_histogram(t, 0, 0.0, 1.0), ParamError);
  CHECK_THROWS_AS(weight_histogram(t, 5, 1.0, 1.0), ParamError);
  CHECK_THROWS_AS(weight_histogram(t, 5, 2.0, -2.0), ParamError);
}
