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

#ifndef PEPITA_LINDYN_HPP
#define PEPITA_LINDYN_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pepita/rng.hpp"
#include "pepita/tensor.hpp"

namespace pepita::lindyn {

// Linear one-hidden-layer network y = W A x learning a target map y* = T x.
// E = T - W A is the error map. Under isotropic inputs the update rule
// reduces to dW = eta E A^T, dA = -eta A F E; this module verifies the
// consequences numerically: tr(FE) < 0 once ||A|| has grown with W frozen,
// and tr(FWA) strictly decreasing while W trains with A frozen.
struct LinearDynState {
  Tensor a;  // [hidden x input]
  Tensor w;  // [out x hidden]
  Tensor f;  // [input x out]
  Tensor t;  // [out x input]

  Tensor error() const;  // E = T - W A
  // E must match error() within 1e-12 whenever the state is consistent.
  void check_consistent(const Tensor& cached_e) const;
};

struct Updates {
  Tensor delta_w;  // [out x hidden]
  Tensor delta_a;  // [hidden x input]
};

// Closed-form expected updates under xx^T = I.
Updates lin_updates(const LinearDynState& state, double eta);

// Monte-Carlo estimate: sample-mean of the pre-expectation updates
// dW = eta E x x^T A^T, dA = -eta A F E x x^T over a batch of standard
// normal inputs. Converges to lin_updates as the batch grows.
Updates empirical_lin_updates(const LinearDynState& state, double eta,
                              std::size_t batch, Rng& rng);

double trace_fe(const LinearDynState& state);
double trace_fwa(const LinearDynState& state);
double norm_a_squared(const LinearDynState& state);

struct Phase1Step {
  double norm_a_sq = 0.0;
  double tr_fe = 0.0;
};

// Freeze W, train A by the closed-form update. Records ||A||^2 and tr(FE)
// after every step. Throws DivergenceError with the step index if A leaves
// the finite range.
std::vector<Phase1Step> run_phase1(LinearDynState& state, double eta, std::size_t steps);

struct Phase2Step {
  double tr_fwa = 0.0;        // after the step
  double delta_tr_fwa = 0.0;  // discrete change this step
  // |tr(F dW A)/eta - tr(F E A^T A)| before the step: the trace-cyclic form
  // of the derivative identity, which holds to rounding.
  double identity_residual = 0.0;
};

// Freeze A, train W. Tracks tr(FWA) and checks the derivative identity
// tr(F Wdot A) = tr(F E A^T A) (the "||A||^2 tr(FE)" step of the
// antialignment derivation, with the Gram matrix kept inside the trace)
// at every step.
std::vector<Phase2Step> run_phase2(LinearDynState& state, double eta, std::size_t steps);

struct SweepOptions {
  std::size_t seeds = 100;
  std::size_t input_dim = 10, hidden_dim = 20, out_dim = 5;
  double eta = 1e-3;
  std::size_t phase1_steps = 2000;
  std::size_t phase2_steps = 500;
};

struct SweepRow {
  std::uint64_t seed = 0;
  bool norm_a_grew = false;        // monotone ||A||^2 growth through phase 1
  double initial_tr_fe = 0.0;
  double final_tr_fe = 0.0;        // at the end of phase 1
  bool tr_fe_negative = false;
  bool tr_fwa_monotone_decreasing = false;  // throughout phase 2
  double max_identity_residual = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::size_t grew = 0;            // rows with norm_a_grew
  std::size_t grew_and_negative = 0;
  std::size_t grew_and_monotone = 0;

  double frac_tr_fe_negative() const;   // among rows that grew
  double frac_fwa_decreasing() const;   // among rows that grew
};

// Independent random instances (A, W ~ N(0, 0.1), T ~ N(0, 1), F from the
// projection-matrix sampler), one per seed. The ||A||-growth precondition
// is measured per run, not assumed.
SweepReport sweep(const SweepOptions& options);

void write_sweep_csv(const SweepReport& report, const SweepOptions& options,
                     const std::filesystem::path& path);

// Fresh random instance for one seed, using the documented initialization.
LinearDynState make_instance(const SweepOptions& options, std::uint64_t seed);

}  // namespace pepita::lindyn

#endif  // PEPITA_LINDYN_HPP
