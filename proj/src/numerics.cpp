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

#include "pepita/numerics.hpp"

#include <Eigen/Dense>

#include "pepita/errors.hpp"

namespace pepita {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

void require_rank2(const Tensor& t, const char* who) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(who) + ": expected rank-2 tensor, got " + t.shape_str());
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() +
                     " x " + b.shape_str());
  }
  Tensor out({a.extent(0), b.extent(1)});
  EMap(out.data(), a.extent(0), b.extent(1)).noalias() =
      ECMap(a.data(), a.extent(0), a.extent(1)) *
      ECMap(b.data(), b.extent(0), b.extent(1));
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.extent(1) != b.extent(1)) {
    throw ShapeError("matmul_nt: inner dimensions disagree, " + a.shape_str() +
                     " x " + b.shape_str() + "^T");
  }
  Tensor out({a.extent(0), b.extent(0)});
  EMap(out.data(), a.extent(0), b.extent(0)).noalias() =
      ECMap(a.data(), a.extent(0), a.extent(1)) *
      ECMap(b.data(), b.extent(0), b.extent(1)).transpose();
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_tn");
  require_rank2(b, "matmul_tn");
  if (a.extent(0) != b.extent(0)) {
    throw ShapeError("matmul_tn: inner dimensions disagree, " + a.shape_str() +
                     "^T x " + b.shape_str());
  }
  Tensor out({a.extent(1), b.extent(1)});
  EMap(out.data(), a.extent(1), b.extent(1)).noalias() =
      ECMap(a.data(), a.extent(0), a.extent(1)).transpose() *
      ECMap(b.data(), b.extent(0), b.extent(1));
  return out;
}

Tensor im2col(const Tensor& input, std::size_t kernel, std::size_t stride) {
  if (input.rank() != 3) {
    throw ShapeError("im2col: expected [C x H x W] input, got " + input.shape_str());
  }
  if (stride == 0) throw ParamError("im2col: stride must be positive");
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  if (kernel > h || kernel > w) {
    throw ShapeError("im2col: kernel " + std::to_string(kernel) +
                     " larger than input " + input.shape_str());
  }
  const std::size_t oh = (h - kernel) / stride + 1;
  const std::size_t ow = (w - kernel) / stride + 1;
  Tensor cols({c * kernel * kernel, oh * ow});
  const double* src = input.data();
  double* dst = cols.data();
  std::size_t row = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx, ++row) {
        double* out_row = dst + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const double* in_row = src + ch * h * w + (oy * stride + ky) * w + kx;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            out_row[oy * ow + ox] = in_row[ox * stride];
          }
        }
      }
    }
  }
  return cols;
}

Tensor col2im(const Tensor& cols, const std::vector<std::size_t>& image_shape,
              std::size_t kernel, std::size_t stride) {
  if (image_shape.size() != 3) {
    throw ShapeError("col2im: expected [C x H x W] target shape");
  }
  const std::size_t c = image_shape[0], h = image_shape[1], w = image_shape[2];
  const std::size_t oh = (h - kernel) / stride + 1;
  const std::size_t ow = (w - kernel) / stride + 1;
  if (cols.rank() != 2 || cols.extent(0) != c * kernel * kernel ||
      cols.extent(1) != oh * ow) {
    throw ShapeError("col2im: column matrix " + cols.shape_str() +
                     " does not match image " + Tensor::shape_str(image_shape));
  }
  Tensor image(image_shape);
  const double* src = cols.data();
  double* dst = image.data();
  std::size_t row = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx, ++row) {
        const double* in_row = src + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          double* out_row = dst + ch * h * w + (oy * stride + ky) * w + kx;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            out_row[ox * stride] += in_row[oy * ow + ox];
          }
        }
      }
    }
  }
  return image;
}

Tensor conv2d_valid(const Tensor& input, const Tensor& filters, std::size_t stride) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d_valid: expected [C x H x W] input, got " + input.shape_str());
  }
  if (filters.rank() != 4) {
    throw ShapeError("conv2d_valid: expected [K x C x k x k] filters, got " +
                     filters.shape_str());
  }
  if (stride == 0) throw ParamError("conv2d_valid: stride must be positive");
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t k = filters.extent(0), fc = filters.extent(1);
  const std::size_t kh = filters.extent(2), kw = filters.extent(3);
  if (fc != c) {
    throw ShapeError("conv2d_valid: channel mismatch, input " + input.shape_str() +
                     " vs filters " + filters.shape_str());
  }
  if (kh != kw) {
    throw ShapeError("conv2d_valid: only square kernels supported, got " +
                     filters.shape_str());
  }
  if (kh > h || kw > w) {
    throw ShapeError("conv2d_valid: filter " + filters.shape_str() +
                     " larger than input " + input.shape_str());
  }
  const std::size_t oh = (h - kh) / stride + 1;
  const std::size_t ow = (w - kw) / stride + 1;
  // Cross-correlation (no kernel flip) as one GEMM over the patch matrix.
  const Tensor cols = im2col(input, kh, stride);
  Tensor out({k, oh, ow});
  EMap(out.data(), k, oh * ow).noalias() =
      ECMap(filters.data(), k, c * kh * kw) *
      ECMap(cols.data(), cols.extent(0), cols.extent(1));
  return out;
}

MaxPoolResult maxpool2d(const Tensor& input, std::size_t size, std::size_t stride) {
  if (input.rank() != 3) {
    throw ShapeError("maxpool2d: expected [K x H x W] input, got " + input.shape_str());
  }
  if (size == 0 || stride == 0) {
    throw ParamError("maxpool2d: size and stride must be positive");
  }
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  if (size > h || size > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(size) +
                     " larger than map " + input.shape_str());
  }
  const std::size_t oh = (h - size) / stride + 1;
  const std::size_t ow = (w - size) / stride + 1;
  MaxPoolResult result{Tensor({c, oh, ow}), {}};
  result.argmax.resize(c * oh * ow);
  const double* src = input.data();
  double* dst = result.output.data();
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = ch * h * w + (oy * stride) * w + ox * stride;
        double best_v = src[best];
        for (std::size_t ky = 0; ky < size; ++ky) {
          for (std::size_t kx = 0; kx < size; ++kx) {
            const std::size_t idx =
                ch * h * w + (oy * stride + ky) * w + (ox * stride + kx);
            if (src[idx] > best_v) {  // strict: ties keep the earliest index
              best_v = src[idx];
              best = idx;
            }
          }
        }
        dst[o] = best_v;
        result.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return result;
}

Tensor sample_normal(Rng& rng, double mean, double stddev,
                     std::vector<std::size_t> shape) {
  if (stddev < 0.0) throw ParamError("sample_normal: negative std");
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(mean, stddev);
  return t;
}

Tensor sample_uniform_sym(Rng& rng, double half_width,
                          std::vector<std::size_t> shape) {
  if (half_width < 0.0) throw ParamError("sample_uniform_sym: negative half_width");
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_sym(half_width);
  return t;
}

}  // namespace pepita
