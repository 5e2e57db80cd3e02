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

#include "pepita/rules.hpp"

#include <algorithm>
#include <cmath>

#include "pepita/errors.hpp"
#include "pepita/numerics.hpp"

namespace pepita {

namespace {

std::size_t batch_of(const ActivationTrace& trace) { return trace.input.extent(0); }

// h_{l-1} as a [B x n] matrix: the network input for l = 0, otherwise the
// recorded post-activation of the previous layer.
Tensor prev_flat(const ActivationTrace& trace, std::size_t layer) {
  const Tensor& t = layer == 0 ? trace.input : trace.post[layer - 1];
  const std::size_t batch = t.extent(0);
  return t.reshaped({batch, t.size() / batch});
}

void require_same_model(const Model& model, const ActivationTrace& trace,
                        const char* who) {
  if (trace.post.size() != model.num_layers()) {
    throw ShapeError(std::string(who) + ": trace has " +
                     std::to_string(trace.post.size()) + " layers, model has " +
                     std::to_string(model.num_layers()));
  }
}

int last_trainable(const Model& model) {
  for (std::size_t i = model.num_layers(); i-- > 0;) {
    if (model.is_trainable(i)) return static_cast<int>(i);
  }
  throw ConfigError("model has no trainable layers");
}

// Gradient of the conv filters given dL/da at the conv output: correlate
// deltas with input patches, batch mean. delta [B x K x H' x W'],
// inputs [B x C x H x W] -> [K x C x k x k].
Tensor conv_filter_grad(const Tensor& delta, const Tensor& inputs,
                        const LayerSpec& layer, const Tensor& filter_shape_like) {
  const std::size_t batch = delta.extent(0);
  const std::size_t k = delta.extent(1);
  const std::size_t pix = delta.extent(2) * delta.extent(3);
  const std::size_t in_n = inputs.size() / batch;
  const std::vector<std::size_t> in_sample(inputs.shape().begin() + 1,
                                           inputs.shape().end());
  Tensor grad(filter_shape_like.shape());
  Tensor grad2d = grad.reshaped({k, grad.size() / k});
  for (std::size_t s = 0; s < batch; ++s) {
    Tensor sample(in_sample, std::vector<double>(inputs.data() + s * in_n,
                                                 inputs.data() + (s + 1) * in_n));
    const Tensor cols = im2col(sample, layer.kernel, layer.stride);  // [Ckk x pix]
    Tensor dsample({k, pix}, std::vector<double>(delta.data() + s * k * pix,
                                                 delta.data() + (s + 1) * k * pix));
    grad2d += matmul_nt(dsample, cols);  // [K x Ckk]
  }
  grad2d *= 1.0 / static_cast<double>(batch);
  return grad2d.reshaped(grad.shape());
}

// dL/dx of a conv layer given dL/da at its output and the filter bank
// (or a feedback bank of the same shape). Per-sample col2im scatter.
Tensor conv_input_grad(const Tensor& delta, const Tensor& filters,
                       const LayerSpec& layer,
                       const std::vector<std::size_t>& in_sample_shape) {
  const std::size_t batch = delta.extent(0);
  const std::size_t k = delta.extent(1);
  const std::size_t pix = delta.extent(2) * delta.extent(3);
  const std::size_t in_n = shape_numel(in_sample_shape);
  const Tensor fmat = filters.reshaped({k, filters.size() / k});  // [K x Ckk]
  std::vector<std::size_t> out_shape{batch};
  for (std::size_t e : in_sample_shape) out_shape.push_back(e);
  Tensor dx(out_shape);
  for (std::size_t s = 0; s < batch; ++s) {
    Tensor dsample({k, pix}, std::vector<double>(delta.data() + s * k * pix,
                                                 delta.data() + (s + 1) * k * pix));
    const Tensor dcols = matmul_tn(fmat, dsample);  // [Ckk x pix]
    const Tensor dimg = col2im(dcols, in_sample_shape, layer.kernel, layer.stride);
    std::copy_n(dimg.data(), in_n, dx.data() + s * in_n);
  }
  return dx;
}

void check_finite(const UpdateSet& updates) {
  for (const Tensor& d : updates.deltas) {
    if (!d.all_finite()) {
      throw DivergenceError("non-finite weight update produced by rule '" +
                            updates.rule + "'");
    }
  }
}

}  // namespace

Tensor error_vector(const Tensor& output, const Tensor& target) {
  if (!output.same_shape(target)) {
    throw ShapeError("error_vector: output " + output.shape_str() +
                     " vs target " + target.shape_str());
  }
  return output - target;
}

Tensor pepita_update_conv(const Model& model, const ActivationTrace& trace_std,
                          const ActivationTrace& trace_mod, std::size_t layer,
                          PepitaPresyn presyn) {
  if (layer >= model.num_layers() ||
      model.config.layers[layer].kind != LayerKind::Conv) {
    throw ConfigError("pepita_update_conv: layer " + std::to_string(layer) +
                      " is not convolutional");
  }
  const LayerSpec& spec = model.config.layers[layer];
  const Tensor& w = model.weight(layer);
  const std::size_t batch = batch_of(trace_std);
  const Tensor& post_std = trace_std.post[layer];
  const Tensor& post_mod = trace_mod.post[layer];
  if (!post_std.same_shape(post_mod)) {
    throw ShapeError("pepita_update_conv: trace shapes disagree, " +
                     post_std.shape_str() + " vs " + post_mod.shape_str());
  }
  const std::size_t k = post_std.extent(1);
  const std::size_t pix = post_std.extent(2) * post_std.extent(3);

  // Presynaptic patches come from the modulated pass (or the standard pass
  // under the variant rule), matching the pass the difference is taken on.
  const ActivationTrace& presyn_trace =
      presyn == PepitaPresyn::Modulated ? trace_mod : trace_std;
  const Tensor& inputs = layer == 0 ? presyn_trace.input : presyn_trace.post[layer - 1];
  const std::size_t in_n = inputs.size() / batch;
  const std::vector<std::size_t> in_sample(inputs.shape().begin() + 1,
                                           inputs.shape().end());

  Tensor update(w.shape());
  Tensor up2d = update.reshaped({k, update.size() / k});
  for (std::size_t s = 0; s < batch; ++s) {
    Tensor sample(in_sample, std::vector<double>(inputs.data() + s * in_n,
                                                 inputs.data() + (s + 1) * in_n));
    const Tensor cols = im2col(sample, spec.kernel, spec.stride);  // [Ckk x pix]
    Tensor diff({k, pix});
    const double* ps = post_std.data() + s * k * pix;
    const double* pm = post_mod.data() + s * k * pix;
    for (std::size_t j = 0; j < k * pix; ++j) diff[j] = ps[j] - pm[j];
    // Sum of per-pixel (difference x patch) products = diff * cols^T;
    // divided by the number of summed products (the pixel count).
    up2d += matmul_nt(diff, cols) * (1.0 / static_cast<double>(pix));
  }
  up2d *= 1.0 / static_cast<double>(batch);
  return up2d.reshaped(w.shape());
}

UpdateSet pepita_update(const Model& model, const ActivationTrace& trace_std,
                        const ActivationTrace& trace_mod, const Tensor& e,
                        PepitaPresyn presyn) {
  require_same_model(model, trace_std, "pepita_update");
  require_same_model(model, trace_mod, "pepita_update");
  const std::size_t batch = batch_of(trace_std);
  if (e.rank() != 2 || e.extent(0) != batch || e.extent(1) != model.num_classes()) {
    throw ShapeError("pepita_update: error " + e.shape_str() + " does not match " +
                     std::to_string(batch) + " x " +
                     std::to_string(model.num_classes()));
  }
  const int last = last_trainable(model);
  if (model.config.layers[static_cast<std::size_t>(last)].kind != LayerKind::FullyConnected) {
    throw ConfigError("pepita_update: the output layer must be fully connected");
  }
  const ActivationTrace& presyn_trace =
      presyn == PepitaPresyn::Modulated ? trace_mod : trace_std;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  UpdateSet updates;
  updates.rule = presyn == PepitaPresyn::Modulated ? "pepita" : "pepita_variant";
  updates.deltas.resize(model.weights.size());
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    if (!model.is_trainable(i)) continue;
    const auto w = static_cast<std::size_t>(model.weight_index[i]);
    if (model.config.layers[i].kind == LayerKind::Conv) {
      updates.deltas[w] = pepita_update_conv(model, trace_std, trace_mod, i, presyn);
      continue;
    }
    const Tensor presyn_mat = prev_flat(presyn_trace, i);
    if (static_cast<int>(i) == last) {
      // Output layer: the error is directly available (trained as in BP).
      updates.deltas[w] = matmul_tn(e, presyn_mat) * inv_batch;
    } else {
      const Tensor& hs = trace_std.post[i];
      const Tensor& hm = trace_mod.post[i];
      if (!hs.same_shape(hm)) {
        throw ShapeError("pepita_update: trace shapes disagree at layer " +
                         std::to_string(i + 1) + ", " + hs.shape_str() + " vs " +
                         hm.shape_str());
      }
      Tensor diff = hs - hm;
      const std::size_t n = diff.size() / batch;
      updates.deltas[w] =
          matmul_tn(diff.reshaped({batch, n}), presyn_mat) * inv_batch;
    }
  }
  check_finite(updates);
  return updates;
}

UpdateSet pepita_update_fc(const Model& model, const ActivationTrace& trace_std,
                           const ActivationTrace& trace_mod, const Tensor& e) {
  return pepita_update(model, trace_std, trace_mod, e, PepitaPresyn::Modulated);
}

UpdateSet pepita_update_fc_variant(const Model& model,
                                   const ActivationTrace& trace_std,
                                   const ActivationTrace& trace_mod,
                                   const Tensor& e) {
  return pepita_update(model, trace_std, trace_mod, e, PepitaPresyn::Standard);
}

namespace {

// Output delta dL/da_L for the supported loss/output pairings. Softmax
// pairs with cross entropy and sigmoid with binary cross entropy, both of
// which reduce to h_L - target; identity pairs with squared error.
Tensor output_delta(const ActivationTrace& trace, const Tensor& target) {
  const Tensor& out = trace.post.back();
  if (!out.same_shape(target)) {
    throw ShapeError("output delta: output " + out.shape_str() + " vs target " +
                     target.shape_str());
  }
  return out - target;
}

// Shared BP/FA backward walk. When `feedback` is set, every transposed
// forward matrix in the recursion is replaced by the model's fixed random
// feedback matrix.
UpdateSet backward_update(const Model& model, const ActivationTrace& trace,
                          const Tensor& target, bool feedback, const char* name) {
  require_same_model(model, trace, name);
  const std::size_t batch = batch_of(trace);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const int last = last_trainable(model);
  if (model.config.layers[static_cast<std::size_t>(last)].kind != LayerKind::FullyConnected) {
    throw ConfigError(std::string(name) + ": the output layer must be fully connected");
  }

  UpdateSet updates;
  updates.rule = name;
  updates.deltas.resize(model.weights.size());

  // g = dL/dh_i on entry to layer i; h_i = mask (.) y_i with y_i the
  // activation/pool/flatten result, so the recorded mask enters first.
  Tensor g;  // unset until the output layer seeds it
  for (int i = static_cast<int>(model.num_layers()) - 1; i >= 0; --i) {
    const auto li = static_cast<std::size_t>(i);
    const LayerSpec& layer = model.config.layers[li];
    const bool is_last = i == last;

    if (!is_last && trace.dropout_masks[li].size() > 0) {
      const Tensor& mask = trace.dropout_masks[li];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= mask[j];
    }

    switch (layer.kind) {
      case LayerKind::FullyConnected:
      case LayerKind::Conv: {
        Tensor delta;  // dL/da_i
        if (is_last) {
          delta = output_delta(trace, target);
        } else {
          const Tensor deriv = activation_derivative(layer.activation, trace.pre[li]);
          delta = Tensor(trace.pre[li].shape());
          for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = g[j] * deriv[j];
        }
        const auto w = static_cast<std::size_t>(model.weight_index[li]);
        const Tensor* m = &model.weights[w];
        if (feedback && i > 0) {
          m = &model.feedback[w];
          if (m->size() == 0) {
            throw ConfigError(std::string(name) + ": layer " + std::to_string(i + 1) +
                              " has no feedback matrix; build the model with the "
                              "matching feedback kind");
          }
        }
        if (layer.kind == LayerKind::FullyConnected) {
          const std::size_t units = delta.size() / batch;
          const Tensor delta2d = delta.reshaped({batch, units});
          updates.deltas[w] = matmul_tn(delta2d, prev_flat(trace, li)) * inv_batch;
          if (i > 0) {
            // BP: delta * W ; FA: delta * B^T with B shaped like W^T.
            g = feedback ? matmul_nt(delta2d, *m) : matmul(delta2d, *m);
            g = g.reshaped(trace.post[li - 1].shape());
          }
        } else {
          const Tensor& inputs = li == 0 ? trace.input : trace.post[li - 1];
          updates.deltas[w] = conv_filter_grad(delta, inputs, layer, model.weights[w]);
          if (i > 0) {
            const std::vector<std::size_t> in_sample(inputs.shape().begin() + 1,
                                                     inputs.shape().end());
            g = conv_input_grad(delta, *m, layer, in_sample);
          }
        }
        break;
      }
      case LayerKind::MaxPool: {
        if (i == 0) break;  // nothing below to receive the gradient
        // Route the gradient to each window's recorded argmax.
        const Tensor& below = trace.post[li - 1];
        Tensor routed(below.shape());
        const std::size_t out_n = trace.post[li].size() / batch;
        const std::size_t in_n = below.size() / batch;
        for (std::size_t s = 0; s < batch; ++s) {
          for (std::size_t j = 0; j < out_n; ++j) {
            routed[s * in_n + trace.pool_argmax[li][s * out_n + j]] += g[s * out_n + j];
          }
        }
        g = std::move(routed);
        break;
      }
      case LayerKind::Flatten: {
        if (i == 0) break;
        g = g.reshaped(trace.post[li - 1].shape());
        break;
      }
    }
  }
  check_finite(updates);
  return updates;
}

}  // namespace

UpdateSet bp_update(const Model& model, const ActivationTrace& trace,
                    const Tensor& target) {
  return backward_update(model, trace, target, false, "bp");
}

UpdateSet fa_update(const Model& model, const ActivationTrace& trace,
                    const Tensor& target) {
  if (model.feedback_kind != FeedbackKind::Fa) {
    throw ConfigError("fa: model carries no feedback-alignment matrices");
  }
  return backward_update(model, trace, target, true, "fa");
}

UpdateSet drtp_update(const Model& model, const ActivationTrace& trace,
                      const Tensor& target) {
  if (model.feedback_kind != FeedbackKind::Drtp) {
    throw ConfigError("drtp: model carries no target-projection matrices");
  }
  require_same_model(model, trace, "drtp");
  const std::size_t batch = batch_of(trace);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const int last = last_trainable(model);

  UpdateSet updates;
  updates.rule = "drtp";
  updates.deltas.resize(model.weights.size());
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    if (!model.is_trainable(i)) continue;
    const auto w = static_cast<std::size_t>(model.weight_index[i]);
    const LayerSpec& layer = model.config.layers[i];
    Tensor delta;
    if (static_cast<int>(i) == last) {
      delta = output_delta(trace, target);
    } else {
      const Tensor& b = model.feedback[w];
      if (b.size() == 0) {
        throw ConfigError("drtp: layer " + std::to_string(i + 1) +
                          " has no target-projection matrix");
      }
      Tensor proj = matmul_nt(target, b);  // [B x out_size]
      const Tensor deriv = activation_derivative(layer.activation, trace.pre[i]);
      delta = Tensor(trace.pre[i].shape());
      for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = proj[j] * deriv[j];
    }
    if (layer.kind == LayerKind::FullyConnected) {
      const std::size_t units = delta.size() / batch;
      updates.deltas[w] =
          matmul_tn(delta.reshaped({batch, units}), prev_flat(trace, i)) * inv_batch;
    } else {
      const Tensor& inputs = i == 0 ? trace.input : trace.post[i - 1];
      updates.deltas[w] = conv_filter_grad(delta, inputs, layer, model.weights[w]);
    }
  }
  check_finite(updates);
  return updates;
}

double cross_entropy_loss(const Tensor& probs, const Tensor& targets) {
  if (!probs.same_shape(targets)) {
    throw ShapeError("cross_entropy_loss: " + probs.shape_str() + " vs " +
                     targets.shape_str());
  }
  const std::size_t b = probs.extent(0), n = probs.extent(1);
  double total = 0.0;
  for (std::size_t i = 0; i < b * n; ++i) {
    if (targets[i] != 0.0) {
      total -= targets[i] * std::log(std::max(probs[i], 1e-300));
    }
  }
  return total / static_cast<double>(b);
}

double binary_cross_entropy_loss(const Tensor& probs, const Tensor& targets) {
  if (!probs.same_shape(targets)) {
    throw ShapeError("binary_cross_entropy_loss: " + probs.shape_str() + " vs " +
                     targets.shape_str());
  }
  const std::size_t b = probs.extent(0), n = probs.extent(1);
  double total = 0.0;
  for (std::size_t i = 0; i < b * n; ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    total -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(b);
}

double sign_agreement(const UpdateSet& a, const UpdateSet& b) {
  if (a.deltas.size() != b.deltas.size()) {
    throw ShapeError("sign_agreement: update sets cover different layer counts");
  }
  std::size_t considered = 0, agree = 0;
  for (std::size_t l = 0; l < a.deltas.size(); ++l) {
    const Tensor& x = a.deltas[l];
    const Tensor& y = b.deltas[l];
    if (!x.same_shape(y)) {
      throw ShapeError("sign_agreement: layer " + std::to_string(l) + " shapes " +
                       x.shape_str() + " vs " + y.shape_str());
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0 || y[i] == 0.0) continue;
      ++considered;
      if ((x[i] > 0.0) == (y[i] > 0.0)) ++agree;
    }
  }
  return considered == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(considered);
}

}  // namespace pepita
