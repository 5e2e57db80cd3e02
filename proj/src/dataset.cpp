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

#include "pepita/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pepita/errors.hpp"
#include "pepita/rng.hpp"

namespace pepita {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(len));
  in.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!in) throw IoError("short read on " + path.string());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                        const std::filesystem::path& path) {
  if (off + 4 > b.size()) {
    throw FormatError(path.string() + ": truncated at byte offset " +
                      std::to_string(b.size()) + ", need header through " +
                      std::to_string(off + 4));
  }
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

constexpr std::uint32_t kIdxImagesMagic = 2051;
constexpr std::uint32_t kIdxLabelsMagic = 2049;
constexpr std::size_t kCifarPixels = 3 * 32 * 32;

}  // namespace

std::size_t LabeledDataset::input_size() const {
  return inputs.size() / std::max<std::size_t>(1, size());
}

std::vector<std::size_t> LabeledDataset::sample_shape() const {
  const auto& s = inputs.shape();
  return {s.begin() + 1, s.end()};
}

void LabeledDataset::standardize() {
  const std::size_t n = size(), d = input_size();
  if (n == 0) return;
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  const double* p = inputs.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += p[i * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = p[i * d + j] - mean[j];
      var[j] += c * c;
    }
  double* q = inputs.data();
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t i = 0; i < n; ++i) q[i * d + j] = (q[i * d + j] - mean[j]) * inv;
  }
}

Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes) {
  Tensor t({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int lab = labels[i];
    if (lab < 0 || static_cast<std::size_t>(lab) >= num_classes) {
      throw FormatError("one_hot: label " + std::to_string(lab) +
                        " outside 0.." + std::to_string(num_classes - 1));
    }
    t[i * num_classes + static_cast<std::size_t>(lab)] = 1.0;
  }
  return t;
}

LabeledDataset load_mnist(const std::filesystem::path& images_path,
                          const std::filesystem::path& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != kIdxImagesMagic) {
    throw FormatError(images_path.string() + ": bad IDX magic " +
                      std::to_string(img_magic) + ", expected 2051");
  }
  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t want = 16 + n * rows * cols;
  if (img.size() != want) {
    throw FormatError(images_path.string() + ": truncated at byte offset " +
                      std::to_string(img.size()) + ", expected " +
                      std::to_string(want) + " bytes");
  }

  const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelsMagic) {
    throw FormatError(labels_path.string() + ": bad IDX magic " +
                      std::to_string(lab_magic) + ", expected 2049");
  }
  const std::size_t n_lab = read_be32(lab, 4, labels_path);
  if (lab.size() != 8 + n_lab) {
    throw FormatError(labels_path.string() + ": truncated at byte offset " +
                      std::to_string(lab.size()) + ", expected " +
                      std::to_string(8 + n_lab) + " bytes");
  }
  if (n != n_lab) {
    throw FormatError("MNIST image/label count mismatch: " + std::to_string(n) +
                      " vs " + std::to_string(n_lab));
  }

  LabeledDataset ds;
  ds.name = "mnist";
  ds.inputs = Tensor({n, 1, rows, cols});
  double* p = ds.inputs.data();
  for (std::size_t i = 0; i < n * rows * cols; ++i) p[i] = img[16 + i] / 255.0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = lab[8 + i];
  ds.targets_onehot = one_hot(ds.labels, 10);
  return ds;
}

LabeledDataset load_cifar10(const std::vector<std::filesystem::path>& batch_paths) {
  if (batch_paths.empty()) throw ParamError("load_cifar10: no batch files given");
  constexpr std::size_t record = 1 + kCifarPixels;
  LabeledDataset ds;
  ds.name = "cifar10";
  std::vector<std::vector<unsigned char>> files;
  std::size_t n = 0;
  for (const auto& path : batch_paths) {
    files.push_back(read_file(path));
    if (files.back().size() % record != 0) {
      throw FormatError(path.string() + ": length " +
                        std::to_string(files.back().size()) +
                        " is not a multiple of 3073-byte records");
    }
    n += files.back().size() / record;
  }
  ds.inputs = Tensor({n, 3, 32, 32});
  ds.labels.reserve(n);
  double* p = ds.inputs.data();
  std::size_t s = 0;
  for (const auto& bytes : files) {
    for (std::size_t r = 0; r + record <= bytes.size(); r += record, ++s) {
      ds.labels.push_back(bytes[r]);
      for (std::size_t i = 0; i < kCifarPixels; ++i) {
        p[s * kCifarPixels + i] = bytes[r + 1 + i] / 255.0;
      }
    }
  }
  ds.targets_onehot = one_hot(ds.labels, 10);
  return ds;
}

LabeledDataset load_cifar100(const std::filesystem::path& path,
                             Cifar100Labels granularity) {
  constexpr std::size_t record = 2 + kCifarPixels;
  const auto bytes = read_file(path);
  if (bytes.size() % record != 0) {
    throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) +
                      " is not a multiple of 3074-byte records");
  }
  const std::size_t n = bytes.size() / record;
  LabeledDataset ds;
  ds.name = granularity == Cifar100Labels::Fine ? "cifar100" : "cifar100-coarse";
  ds.inputs = Tensor({n, 3, 32, 32});
  ds.labels.reserve(n);
  double* p = ds.inputs.data();
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t r = s * record;
    ds.labels.push_back(granularity == Cifar100Labels::Fine ? bytes[r + 1] : bytes[r]);
    for (std::size_t i = 0; i < kCifarPixels; ++i) {
      p[s * kCifarPixels + i] = bytes[r + 2 + i] / 255.0;
    }
  }
  ds.targets_onehot =
      one_hot(ds.labels, granularity == Cifar100Labels::Fine ? 100 : 20);
  return ds;
}

std::vector<std::vector<std::uint32_t>> batch_indices(std::size_t n,
                                                      const BatchPlan& plan,
                                                      std::uint64_t epoch) {
  if (plan.batch_size == 0) throw ParamError("batch_indices: batch_size must be positive");
  if (plan.batch_size > n) {
    throw ParamError("batch_indices: batch_size " + std::to_string(plan.batch_size) +
                     " exceeds dataset size " + std::to_string(n));
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng = Rng::derive(plan.master_seed, "shuffle", epoch);
  // Fisher-Yates with portable bounded draws.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::uint32_t>> batches;
  for (std::size_t start = 0; start < n; start += plan.batch_size) {
    const std::size_t end = std::min(n, start + plan.batch_size);
    if (plan.drop_last && end - start < plan.batch_size) break;
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

Batch gather(const LabeledDataset& data, const std::vector<std::uint32_t>& indices) {
  const std::size_t d = data.input_size();
  const std::size_t c = data.num_classes();
  std::vector<std::size_t> in_shape{indices.size()};
  for (std::size_t e : data.sample_shape()) in_shape.push_back(e);
  Batch batch{Tensor(in_shape), Tensor({indices.size(), c})};
  const double* src_x = data.inputs.data();
  const double* src_t = data.targets_onehot.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t s = indices[i];
    std::copy_n(src_x + s * d, d, batch.inputs.data() + i * d);
    std::copy_n(src_t + s * c, c, batch.targets.data() + i * c);
  }
  return batch;
}

}  // namespace pepita
