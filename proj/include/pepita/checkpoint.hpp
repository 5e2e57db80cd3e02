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

#ifndef PEPITA_CHECKPOINT_HPP
#define PEPITA_CHECKPOINT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "pepita/manifest.hpp"
#include "pepita/network.hpp"
#include "pepita/tensor.hpp"

namespace pepita {

// Little-endian binary container:
//   bytes 0..7   magic "PEPITAC\0"
//   u32          version (currently 1)
//   u32          metadata length, then that many bytes of JSON (model config,
//                rule, seed)
//   u32          tensor count
//   per tensor:  u16 name length + name bytes, u8 rank, u64 extents[rank],
//                f64 data[product(extents)]
// Tensor names: W0.. weights, B0.. feedback (may be absent), F, V0..
// optimizer velocities.
struct Checkpoint {
  Model model;
  std::vector<Tensor> velocities;
  Rule rule = Rule::Pepita;
  std::uint64_t master_seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::vector<Tensor>& velocities, Rule rule,
                     std::uint64_t master_seed);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pepita

#endif  // PEPITA_CHECKPOINT_HPP
