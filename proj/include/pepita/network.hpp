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

#ifndef PEPITA_NETWORK_HPP
#define PEPITA_NETWORK_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pepita/dataset.hpp"
#include "pepita/rng.hpp"
#include "pepita/tensor.hpp"

namespace pepita {

enum class LayerKind { FullyConnected, Conv, MaxPool, Flatten };
enum class Activation { Identity, Relu, Tanh, Sigmoid, Softmax };

const char* to_string(LayerKind kind);
const char* to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::FullyConnected;
  std::size_t units = 0;                   // fully connected fan-out
  std::size_t filters = 0, kernel = 0, stride = 1;  // conv
  std::size_t pool_size = 0, pool_stride = 0;       // maxpool
  Activation activation = Activation::Identity;
  double dropout = 0.0;  // drop probability in [0,1), applied after activation

  static LayerSpec fully_connected(std::size_t units, Activation act, double dropout = 0.0);
  static LayerSpec conv(std::size_t filters, std::size_t kernel, std::size_t stride,
                        Activation act);
  static LayerSpec maxpool(std::size_t size, std::size_t stride);
  static LayerSpec flatten();
};

// Which feedback matrices the model carries. PEPITA and BP need none; FA
// carries one per non-first trainable layer (shaped like W^T); DRTP carries
// one per hidden trainable layer (layer output size x num_classes).
enum class FeedbackKind { None, Fa, Drtp };

struct ModelConfig {
  std::vector<std::size_t> input_shape;  // [C,H,W] or [D]
  std::vector<LayerSpec> layers;

  std::size_t input_size() const { return shape_numel(input_shape); }
};

// Network with trainable weights, the fixed input-projection matrix F, and
// optional fixed feedback matrices. Weights are indexed per trainable layer
// (FC: [out x in], conv: [K x C x k x k]); the weight of layer index l is
// weights[weight_index[l]].
struct Model {
  ModelConfig config;
  std::vector<Tensor> weights;
  Tensor F;                      // [input_size x num_classes]
  std::vector<Tensor> feedback;  // parallel to weights; empty Tensor when absent
  FeedbackKind feedback_kind = FeedbackKind::None;

  // Derived structure, filled by build_model/validate.
  std::vector<std::vector<std::size_t>> layer_output_shape;  // per layer, no batch dim
  std::vector<int> weight_index;  // per layer; -1 for pool/flatten

  std::size_t input_size() const { return config.input_size(); }
  std::size_t num_classes() const;
  std::size_t num_layers() const { return config.layers.size(); }
  bool is_trainable(std::size_t layer) const { return weight_index[layer] >= 0; }
  const Tensor& weight(std::size_t layer) const;
  Tensor& weight(std::size_t layer);
};

struct FOptions {
  double scale_factor = 0.05;           // Table-style multiplier
  bool normal_family = false;           // uniform by default; normal as a study knob
};

// Validates shape composition and returns per-layer output shapes.
// Throws ConfigError naming the first non-composing pair.
std::vector<std::vector<std::size_t>> infer_shapes(const ModelConfig& config);

// The fixed input-projection matrix: [input_size x num_classes] entries
// i.i.d. on [-s, +s] with s = scale_factor * 2 * sqrt(6/input_size)
// (normal with std s when normal_family is set). Sampled once per run and
// never trained.
Tensor make_F(std::size_t input_size, std::size_t num_classes, double scale_factor,
              bool normal_family, Rng& rng);

// He-initialized weights, fixed F, and (for FA/DRTP) fixed feedback, all
// from independent streams of `master_seed` so any piece can be reproduced
// alone. Same seed, same model, bit for bit.
Model build_model(const ModelConfig& config, FeedbackKind feedback,
                  const FOptions& f_options, std::uint64_t master_seed);

// One dropout mask per layer (empty where dropout is 0), values 0 or
// 1/(1-p): inverted dropout, so evaluation needs no rescaling. Masks are
// sampled once per training step and shared by both forward passes.
struct DropoutMasks {
  std::vector<Tensor> masks;  // [B x layer_output_size] or empty
};

DropoutMasks sample_dropout_masks(const Model& model, std::size_t batch, Rng& rng);

// Everything one forward pass produced. post.back() is the network output.
struct ActivationTrace {
  Tensor input;              // h_0 as consumed (already modulated, if so) [B x ...]
  std::vector<Tensor> pre;   // a_l per layer; empty for pool/flatten
  std::vector<Tensor> post;  // h_l per layer (after activation and dropout)
  std::vector<Tensor> dropout_masks;  // as applied; empty where none
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // per layer; per-sample blocks
};

// h_l = dropout(sigma_l(W_l h_{l-1})). Throws DivergenceError naming the
// layer if any activation is non-finite. `masks` may be null when training
// is false or the model has no dropout.
ActivationTrace forward_standard(const Model& model, const Tensor& x,
                                 const DropoutMasks* masks, bool training);

// Same pass on the modulated input x + F e. e is [B x num_classes]; each
// sample gets its own modulation. With e = 0 or F = 0 the trace equals
// forward_standard bit for bit given shared masks.
ActivationTrace forward_modulated(const Model& model, const Tensor& x,
                                  const Tensor& e, const DropoutMasks* masks,
                                  bool training);

// Row-wise activations; softmax subtracts the row max before exponentiation.
Tensor softmax(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh_act(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor apply_activation(Activation act, const Tensor& a);
// Derivative as a function of pre-activation (relu'(0) defined as 0).
Tensor activation_derivative(Activation act, const Tensor& pre);

// Writes h_layer for every sample of `data` as CSV (header, one row per
// sample, final column the integer label) for external embedding tools.
// layer_index is 1-based, matching h_1..h_L. Evaluation mode (no dropout).
void export_embeddings(const Model& model, const LabeledDataset& data,
                       std::size_t layer_index, const std::filesystem::path& out_path);

}  // namespace pepita

#endif  // PEPITA_NETWORK_HPP
