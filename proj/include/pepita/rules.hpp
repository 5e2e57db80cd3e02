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

#ifndef PEPITA_RULES_HPP
#define PEPITA_RULES_HPP

#include <string>
#include <vector>

#include "pepita/network.hpp"
#include "pepita/tensor.hpp"

namespace pepita {

// Per-layer weight updates produced by one learning rule on one batch.
// deltas is parallel to Model::weights and shape-matches it exactly.
// The optimizer applies these as W <- W - eta * delta, so every rule
// returns the quantity that should be *descended*.
struct UpdateSet {
  std::vector<Tensor> deltas;
  std::string rule;
};

// e = h_L - target, per sample: [B x classes] both.
Tensor error_vector(const Tensor& output, const Tensor& target);

// Which presynaptic activity enters the PEPITA products: the modulated
// pass (the algorithm's primary form) or the standard pass (the variant
// the authors report as performing identically; it is also the form the
// linear-network analysis uses).
enum class PepitaPresyn { Modulated, Standard };

// PEPITA updates for every trainable layer:
//   first/hidden layers:  dW_l = (h_l - h_l_err) (presyn_{l-1})^T
//   output layer:         dW_L = e (presyn_{L-1})^T
// Conv layers use the per-pixel patch rule (see pepita_update_conv).
// Batches average the per-sample updates. Both traces must come from the
// same weights and share dropout masks.
UpdateSet pepita_update(const Model& model, const ActivationTrace& trace_std,
                        const ActivationTrace& trace_mod, const Tensor& e,
                        PepitaPresyn presyn = PepitaPresyn::Modulated);

// Named forms from the algorithm description.
UpdateSet pepita_update_fc(const Model& model, const ActivationTrace& trace_std,
                           const ActivationTrace& trace_mod, const Tensor& e);
UpdateSet pepita_update_fc_variant(const Model& model,
                                   const ActivationTrace& trace_std,
                                   const ActivationTrace& trace_mod,
                                   const Tensor& e);

// Convolutional PEPITA update for one conv layer: for every output pixel,
// (standard - modulated) activity difference at the conv output (before
// pooling) times the modulated-pass input patch that produced the pixel;
// summed over pixels and divided by the pixel count; batch-averaged.
// Result has the filter shape [K x C x k x k].
Tensor pepita_update_conv(const Model& model, const ActivationTrace& trace_std,
                          const ActivationTrace& trace_mod, std::size_t layer,
                          PepitaPresyn presyn = PepitaPresyn::Modulated);

// Exact cross-entropy gradients through the softmax output: output delta
// h_L - target, hidden deltas through W^T, activation derivatives, dropout
// masks and pooling switches. Batch mean.
UpdateSet bp_update(const Model& model, const ActivationTrace& trace,
                    const Tensor& target);

// Feedback alignment: the backward recursion of bp_update with every
// transposed forward matrix replaced by the model's fixed random feedback.
UpdateSet fa_update(const Model& model, const ActivationTrace& trace,
                    const Tensor& target);

// Direct random target projection: hidden layer l gets
//   delta_l = (B_l target) (.) sigma_l'(a_l),   dW_l = delta_l h_{l-1}^T
// while the output layer trains on the true error h_L - target.
UpdateSet drtp_update(const Model& model, const ActivationTrace& trace,
                      const Tensor& target);

// Mean cross-entropy of softmax outputs against one-hot targets.
double cross_entropy_loss(const Tensor& probs, const Tensor& targets);
// Mean binary cross-entropy summed over classes (sigmoid outputs).
double binary_cross_entropy_loss(const Tensor& probs, const Tensor& targets);

// Fraction of elementwise sign agreements between two update sets,
// ignoring positions where either side is exactly zero. Comparison metric
// for the PEPITA-vs-BP update-direction observation; no threshold attached.
double sign_agreement(const UpdateSet& a, const UpdateSet& b);

}  // namespace pepita

#endif  // PEPITA_RULES_HPP
