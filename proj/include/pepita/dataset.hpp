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

#ifndef PEPITA_DATASET_HPP
#define PEPITA_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pepita/tensor.hpp"

namespace pepita {

// Image classification set in memory. Pixels are scaled to [0,1]
// (byte / 255); fully connected models consume the row-major flattening of
// [C x H x W], which fixes the row order of the input-projection matrix F.
// Immutable after construction, safe to share across threads.
struct LabeledDataset {
  Tensor inputs;           // [N x C x H x W]
  Tensor targets_onehot;   // [N x num_classes]
  std::vector<int> labels; // length N
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return targets_onehot.extent(1); }
  // C*H*W, the flattened per-sample extent.
  std::size_t input_size() const;
  std::vector<std::size_t> sample_shape() const;  // [C,H,W]

  // Optional per-feature standardization study knob: maps inputs to
  // (x - mean) / std computed over the whole set. Off by default.
  void standardize();
};

// MNIST IDX pair (big-endian magic 2051 for images, 2049 for labels).
LabeledDataset load_mnist(const std::filesystem::path& images_path,
                          const std::filesystem::path& labels_path);

// CIFAR-10 binary batches: 3073-byte records, label byte then R/G/B planes.
LabeledDataset load_cifar10(const std::vector<std::filesystem::path>& batch_paths);

enum class Cifar100Labels { Fine, Coarse };

// CIFAR-100 binary: 3074-byte records, coarse label, fine label, pixels.
LabeledDataset load_cifar100(const std::filesystem::path& path, Cifar100Labels granularity);

// One-hot [N x num_classes] from integer labels.
Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes);

struct BatchPlan {
  std::size_t batch_size = 0;
  std::uint64_t master_seed = 0;  // shuffle stream derives from this + epoch
  bool drop_last = false;
};

// Shuffled index batches for one epoch. The permutation is a bijection over
// 0..N-1, reproducible from (master seed, epoch).
std::vector<std::vector<std::uint32_t>> batch_indices(std::size_t n,
                                                      const BatchPlan& plan,
                                                      std::uint64_t epoch);

struct Batch {
  Tensor inputs;   // [B x C x H x W]
  Tensor targets;  // [B x num_classes]
};

// Materialize the rows named by `indices`.
Batch gather(const LabeledDataset& data, const std::vector<std::uint32_t>& indices);

}  // namespace pepita

#endif  // PEPITA_DATASET_HPP
