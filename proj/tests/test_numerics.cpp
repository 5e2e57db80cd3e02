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

#include "pepita/errors.hpp"
#include "pepita/numerics.hpp"
#include "testutil.hpp"

using namespace pepita;
using namespace pepita::testutil;

TEST_CASE("matmul identity, projector and row-sum cases") {
  const Tensor identity = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(bit_equal(matmul(identity, a), a));

  const Tensor projector = Tensor::matrix({{1, 0}, {0, 0}});
  const Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  CHECK(bit_equal(matmul(projector, b), Tensor::matrix({{5, 6}, {0, 0}})));

  const Tensor ones = Tensor::matrix({{1}, {1}});
  CHECK(bit_equal(matmul(a, ones), Tensor::matrix({{3}, {7}})));
}

TEST_CASE("matmul rejects mismatched inner dimensions, naming both shapes") {
  const Tensor a({2, 3});
  const Tensor b({4, 2});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random 4x4 triples") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor(rng, {4, 4});
    const Tensor b = random_tensor(rng, {4, 4});
    const Tensor c = random_tensor(rng, {4, 4});
    const Tensor left = matmul(matmul(a, b), c);
    const Tensor right = matmul(a, matmul(b, c));
    double scale = 0.0;
    for (std::size_t i = 0; i < left.size(); ++i) scale = std::max(scale, std::abs(left[i]));
    CHECK(max_abs_diff(left, right) <= 1e-10 * std::max(1.0, scale));
  }
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
  Rng rng(5);
  const Tensor a = random_tensor(rng, {3, 5});
  const Tensor b = random_tensor(rng, {4, 5});
  const Tensor c = random_tensor(rng, {3, 4});
  // a * b^T (kernels differ per layout, so equality is up to rounding)
  Tensor bt({5, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) bt[j * 4 + i] = b[i * 5 + j];
  CHECK(max_abs_diff(matmul_nt(a, b), matmul(a, bt)) < 1e-14);
  // a^T * c
  Tensor at({5, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) at[j * 3 + i] = a[i * 5 + j];
  CHECK(max_abs_diff(matmul_tn(a, c), matmul(at, c)) < 1e-14);
}

TEST_CASE("conv2d_valid constant field") {
  const Tensor input = Tensor::full({1, 3, 3}, 1.0);
  const Tensor filters = Tensor::full({1, 1, 2, 2}, 1.0);
  const Tensor out = conv2d_valid(input, filters, 1);
  CHECK(out.shape() == std::vector<std::size_t>{1, 2, 2});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 4.0);
}

TEST_CASE("conv2d_valid selector kernel picks the top-left of each patch") {
  Tensor input({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor filters({1, 1, 2, 2}, {1, 0, 0, 0});
  const Tensor out = conv2d_valid(input, filters, 1);
  CHECK(bit_equal(out, Tensor({1, 2, 2}, {1, 2, 4, 5})));
}

TEST_CASE("conv2d_valid equals the quadruple-loop oracle on 50 random instances") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const std::size_t c = 1 + rng.next_below(3);
    const std::size_t h = 5 + rng.next_below(6);
    const std::size_t w = 5 + rng.next_below(6);
    const std::size_t k = 1 + rng.next_below(4);
    const std::size_t kk = 1 + rng.next_below(std::min(h, w) - 1);
    const std::size_t stride = 1 + rng.next_below(2);
    const Tensor input = random_tensor(rng, {c, h, w});
    const Tensor filters = random_tensor(rng, {k, c, kk, kk});
    CHECK(max_abs_diff(conv2d_valid(input, filters, stride),
                       conv2d_oracle(input, filters, stride)) < 1e-12);
  }
}

TEST_CASE("conv2d_valid random 3x8x8 with 4 5x5 filters matches oracle") {
  Rng rng(99);
  const Tensor input = random_tensor(rng, {3, 8, 8});
  const Tensor filters = random_tensor(rng, {4, 3, 5, 5});
  CHECK(max_abs_diff(conv2d_valid(input, filters, 1),
                     conv2d_oracle(input, filters, 1)) < 1e-12);
}

TEST_CASE("conv2d_valid rejects oversized filters") {
  const Tensor input({1, 3, 3});
  const Tensor filters({1, 1, 4, 4});
  CHECK_THROWS_AS(conv2d_valid(input, filters, 1), ShapeError);
}

TEST_CASE("im2col/col2im are adjoint") {
  // <im2col(x), y> == <x, col2im(y)> for random x, y: the standard check
  // that the scatter really is the transpose of the gather.
  Rng rng(7);
  const Tensor x = random_tensor(rng, {2, 6, 6});
  const Tensor cols = im2col(x, 3, 2);
  const Tensor y = random_tensor(rng, cols.shape());
  const Tensor back = col2im(y, {2, 6, 6}, 3, 2);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < cols.size(); ++i) lhs += cols[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("maxpool2d 2x2 window") {
  Tensor input({1, 2, 2}, {1, 2, 3, 4});
  const auto result = maxpool2d(input, 2, 2);
  CHECK(bit_equal(result.output, Tensor({1, 1, 1}, {4})));
  CHECK(result.argmax == std::vector<std::uint32_t>{3});
}

TEST_CASE("maxpool2d ties break to the first index in scan order") {
  const Tensor input = Tensor::full({1, 4, 4}, 2.5);
  const auto result = maxpool2d(input, 2, 2);
  for (std::size_t i = 0; i < result.output.size(); ++i) CHECK(result.output[i] == 2.5);
  CHECK(result.argmax == std::vector<std::uint32_t>{0, 2, 8, 10});
}

TEST_CASE("maxpool2d equals windowed-max oracle on random maps") {
  Rng rng(3);
  const Tensor input = random_tensor(rng, {2, 6, 6});
  const auto result = maxpool2d(input, 2, 2);
  CHECK(max_abs_diff(result.output, maxpool_oracle(input, 2, 2)) == 0.0);
}

TEST_CASE("maxpool2d rejects oversized windows") {
  const Tensor input({1, 2, 2});
  CHECK_THROWS_AS(maxpool2d(input, 3, 1), ShapeError);
}

TEST_CASE("sample_normal with zero std returns the mean everywhere") {
  Rng rng(1);
  const Tensor t = sample_normal(rng, 0.75, 0.0, {10, 10});
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.75);
}

TEST_CASE("sample_normal matches N(0,1) moments on 1e5 draws") {
  Rng rng(42);
  const Tensor t = sample_normal(rng, 0.0, 1.0, {100000});
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sum += t[i];
    sum2 += t[i] * t[i];
  }
  const double mean = sum / 1e5;
  const double stddev = std::sqrt(sum2 / 1e5 - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(stddev - 1.0) < 0.02);
}

TEST_CASE("sample_normal rejects negative std") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_normal(rng, 0.0, -1.0, {2}), ParamError);
}

TEST_CASE("sampling is bit-reproducible under a fixed seed") {
  Rng r1(123), r2(123);
  CHECK(bit_equal(sample_normal(r1, 0.0, 2.0, {257}), sample_normal(r2, 0.0, 2.0, {257})));
  CHECK(bit_equal(sample_uniform_sym(r1, 0.3, {257}), sample_uniform_sym(r2, 0.3, {257})));
}

TEST_CASE("sample_uniform_sym support and variance") {
  Rng rng(77);
  const double h = 0.4;
  const Tensor t = sample_uniform_sym(rng, h, {100000});
  double lo = t[0], hi = t[0], sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    lo = std::min(lo, t[i]);
    hi = std::max(hi, t[i]);
    sum += t[i];
    sum2 += t[i] * t[i];
  }
  CHECK(hi <= h);
  CHECK(lo >= -h);
  const double mean = sum / 1e5;
  const double stddev = std::sqrt(sum2 / 1e5 - mean * mean);
  CHECK(stddev == doctest::Approx(h / std::sqrt(3.0)).epsilon(0.03));
}

TEST_CASE("sample_uniform_sym half_width 0 gives zeros; negative rejected") {
  Rng rng(1);
  const Tensor t = sample_uniform_sym(rng, 0.0, {16});
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);
  CHECK_THROWS_AS(sample_uniform_sym(rng, -0.1, {2}), ParamError);
}

TEST_CASE("derived rng streams are independent of sibling stream usage") {
  // Drawing from one concern must not shift another concern's stream.
  Rng b = Rng::derive(9001, "F");
  const double first_b = b.next_unit();
  Rng a2 = Rng::derive(9001, "weights");
  for (int i = 0; i < 100; ++i) a2.next_unit();
  Rng b2 = Rng::derive(9001, "F");
  CHECK(b2.next_unit() == first_b);
}

TEST_CASE("tensor invariants: shape/data agreement and finiteness checks") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
  Tensor t({2});
  t[0] = std::nan("");
  CHECK_FALSE(t.all_finite());
  t[0] = 0.0;
  CHECK(t.all_finite());
  CHECK(Tensor::scalar(3.5).rank() == 0);
  CHECK(Tensor::scalar(3.5).size() == 1);
}
