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

#ifndef PEPITA_RNG_HPP
#define PEPITA_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace pepita {

// Seeded pseudo-random source.
//
// Engine: std::mt19937_64, whose raw 64-bit output stream is fully specified
// by the C++ standard, so identical seeds give identical draws everywhere.
// All value mappings (unit doubles, bounded ints, normal via Marsaglia's
// polar method) are implemented here instead of <random> distributions,
// which are not portable across standard libraries. The only residual
// platform dependence is libm's std::log inside the polar method; on a
// given toolchain streams are bit-stable.
//
// Independent streams for separate concerns (weights, F, feedback,
// shuffling, dropout, ...) are derived from one master seed with
// derive(master, name): the name is FNV-1a hashed, mixed into the seed by
// SplitMix64, and used to seed a fresh engine. Components can therefore be
// reproduced in isolation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  static std::uint64_t splitmix64(std::uint64_t x);
  static std::uint64_t fnv1a(std::string_view s);

  // Independent stream keyed by (master seed, concern name).
  static Rng derive(std::uint64_t master_seed, std::string_view stream);
  // Independent stream keyed by (master seed, concern name, index),
  // e.g. the per-epoch shuffle stream.
  static Rng derive(std::uint64_t master_seed, std::string_view stream,
                    std::uint64_t index);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0,1) with 53 random mantissa bits.
  double next_unit();

  // Uniform integer in [0, bound) by rejection (unbiased).
  std::uint64_t next_below(std::uint64_t bound);

  // N(mean, std^2) via the polar method. std == 0 returns mean exactly.
  double normal(double mean, double stddev);

  // Uniform on [-half_width, +half_width].
  double uniform_sym(double half_width);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pepita

#endif  // PEPITA_RNG_HPP
