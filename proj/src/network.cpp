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

#include "pepita/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pepita/errors.hpp"
#include "pepita/numerics.hpp"

namespace pepita {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::FullyConnected: return "fully_connected";
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

const char* to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softmax") return Activation::Softmax;
  throw ConfigError("unknown activation '" + name + "'");
}

LayerSpec LayerSpec::fully_connected(std::size_t units, Activation act, double dropout) {
  LayerSpec s;
  s.kind = LayerKind::FullyConnected;
  s.units = units;
  s.activation = act;
  s.dropout = dropout;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kernel, std::size_t stride,
                          Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t size, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.pool_size = size;
  s.pool_stride = stride;
  s.activation = Activation::Identity;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.activation = Activation::Identity;
  return s;
}

std::size_t Model::num_classes() const {
  return shape_numel(layer_output_shape.back());
}

const Tensor& Model::weight(std::size_t layer) const {
  if (!is_trainable(layer)) {
    throw ConfigError("layer " + std::to_string(layer) + " (" +
                      to_string(config.layers[layer].kind) + ") has no weights");
  }
  return weights[static_cast<std::size_t>(weight_index[layer])];
}

Tensor& Model::weight(std::size_t layer) {
  return const_cast<Tensor&>(const_cast<const Model*>(this)->weight(layer));
}

std::vector<std::vector<std::size_t>> infer_shapes(const ModelConfig& config) {
  if (config.layers.empty()) throw ConfigError("model has no layers");
  if (config.input_shape.empty()) throw ConfigError("model input shape is empty");
  std::vector<std::vector<std::size_t>> shapes;
  std::vector<std::size_t> cur = config.input_shape;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& layer = config.layers[i];
    if (layer.activation == Activation::Softmax && i + 1 != config.layers.size()) {
      throw ConfigError("softmax is only permitted on the final layer (layer " +
                        std::to_string(i + 1) + ")");
    }
    if (layer.dropout < 0.0 || layer.dropout >= 1.0) {
      throw ConfigError("layer " + std::to_string(i + 1) + ": dropout " +
                        std::to_string(layer.dropout) + " outside [0,1)");
    }
    switch (layer.kind) {
      case LayerKind::FullyConnected: {
        if (layer.units == 0) {
          throw ConfigError("layer " + std::to_string(i + 1) + ": fully connected with 0 units");
        }
        cur = {layer.units};
        break;
      }
      case LayerKind::Conv: {
        if (cur.size() != 3) {
          throw ConfigError("layer " + std::to_string(i + 1) + " (conv) expects a [CxHxW] input but layer " +
                            std::to_string(i) + " produces " + Tensor::shape_str(cur));
        }
        if (layer.filters == 0 || layer.kernel == 0 || layer.stride == 0) {
          throw ConfigError("layer " + std::to_string(i + 1) + ": conv needs positive filters/kernel/stride");
        }
        if (layer.kernel > cur[1] || layer.kernel > cur[2]) {
          throw ConfigError("layer " + std::to_string(i + 1) + " (conv " +
                            std::to_string(layer.kernel) + "x" + std::to_string(layer.kernel) +
                            ") does not fit the " + Tensor::shape_str(cur) +
                            " output of layer " + std::to_string(i));
        }
        cur = {layer.filters, (cur[1] - layer.kernel) / layer.stride + 1,
               (cur[2] - layer.kernel) / layer.stride + 1};
        break;
      }
      case LayerKind::MaxPool: {
        if (cur.size() != 3) {
          throw ConfigError("layer " + std::to_string(i + 1) + " (maxpool) expects a [CxHxW] input but layer " +
                            std::to_string(i) + " produces " + Tensor::shape_str(cur));
        }
        if (layer.pool_size == 0 || layer.pool_stride == 0) {
          throw ConfigError("layer " + std::to_string(i + 1) + ": maxpool needs positive size/stride");
        }
        if (layer.pool_size > cur[1] || layer.pool_size > cur[2]) {
          throw ConfigError("layer " + std::to_string(i + 1) + " (maxpool " +
                            std::to_string(layer.pool_size) + ") does not fit the " +
                            Tensor::shape_str(cur) + " output of layer " + std::to_string(i));
        }
        cur = {cur[0], (cur[1] - layer.pool_size) / layer.pool_stride + 1,
               (cur[2] - layer.pool_size) / layer.pool_stride + 1};
        break;
      }
      case LayerKind::Flatten: {
        cur = {shape_numel(cur)};
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

Model build_model(const ModelConfig& config, FeedbackKind feedback,
                  const FOptions& f_options, std::uint64_t master_seed) {
  Model model;
  model.config = config;
  model.feedback_kind = feedback;
  model.layer_output_shape = infer_shapes(config);

  // Trainable-layer bookkeeping first so sampling order is fixed.
  model.weight_index.assign(config.layers.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerKind kind = config.layers[i].kind;
    if (kind == LayerKind::FullyConnected || kind == LayerKind::Conv) {
      model.weight_index[i] = next++;
    }
  }
  model.weights.resize(static_cast<std::size_t>(next));
  model.feedback.resize(static_cast<std::size_t>(next));

  // He init: N(0, sqrt(2/fan_in)), one stream for all weights in layer order.
  Rng wrng = Rng::derive(master_seed, "weights");
  std::vector<std::size_t> in_shape = config.input_shape;
  std::vector<double> he_std(static_cast<std::size_t>(next), 0.0);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& layer = config.layers[i];
    if (model.weight_index[i] >= 0) {
      const auto w = static_cast<std::size_t>(model.weight_index[i]);
      if (layer.kind == LayerKind::FullyConnected) {
        const std::size_t fan_in = shape_numel(in_shape);
        he_std[w] = std::sqrt(2.0 / static_cast<double>(fan_in));
        model.weights[w] = sample_normal(wrng, 0.0, he_std[w], {layer.units, fan_in});
      } else {
        const std::size_t fan_in = in_shape[0] * layer.kernel * layer.kernel;
        he_std[w] = std::sqrt(2.0 / static_cast<double>(fan_in));
        model.weights[w] = sample_normal(
            wrng, 0.0, he_std[w],
            {layer.filters, in_shape[0], layer.kernel, layer.kernel});
      }
    }
    in_shape = model.layer_output_shape[i];
  }

  const std::size_t classes = model.num_classes();
  Rng frng = Rng::derive(master_seed, "F");
  model.F = make_F(config.input_size(), classes, f_options.scale_factor,
                   f_options.normal_family, frng);

  if (feedback != FeedbackKind::None) {
    Rng brng = Rng::derive(master_seed, "feedback");
    int seen = 0;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
      if (model.weight_index[i] < 0) continue;
      const auto w = static_cast<std::size_t>(model.weight_index[i]);
      ++seen;
      if (feedback == FeedbackKind::Fa) {
        // Shaped like W^T (FC) or like the filter bank (conv); only layers
        // that pass a delta downward need one, so the first is skipped.
        if (seen == 1) continue;
        const auto& ws = model.weights[w].shape();
        std::vector<std::size_t> bshape =
            ws.size() == 2 ? std::vector<std::size_t>{ws[1], ws[0]} : ws;
        model.feedback[w] = sample_normal(brng, 0.0, he_std[w], bshape);
      } else {
        // DRTP: every hidden trainable layer projects the target onto its
        // own output. The final layer trains on the true error instead.
        if (seen == next) continue;
        const std::size_t out_size = shape_numel(model.layer_output_shape[i]);
        model.feedback[w] = sample_normal(brng, 0.0, he_std[w], {out_size, classes});
      }
    }
  }
  return model;
}

Tensor make_F(std::size_t input_size, std::size_t num_classes, double scale_factor,
              bool normal_family, Rng& rng) {
  if (input_size == 0 || num_classes == 0) {
    throw ParamError("make_F: dimensions must be positive");
  }
  const double scale =
      scale_factor * 2.0 * std::sqrt(6.0 / static_cast<double>(input_size));
  if (normal_family) {
    return sample_normal(rng, 0.0, scale, {input_size, num_classes});
  }
  return sample_uniform_sym(rng, scale, {input_size, num_classes});
}

Tensor softmax(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("softmax: expected [B x n], got " + a.shape_str());
  const std::size_t b = a.extent(0), n = a.extent(1);
  Tensor out({b, n});
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = a.data() + i * n;
    double* orow = out.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] /= sum;
  }
  return out;
}

namespace {
template <typename F>
Tensor elementwise(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* src = a.data();
  double* dst = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) dst[i] = f(src[i]);
  return out;
}
}  // namespace

Tensor relu(const Tensor& a) {
  return elementwise(a, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor tanh_act(const Tensor& a) {
  return elementwise(a, [](double v) { return std::tanh(v); });
}

Tensor sigmoid(const Tensor& a) {
  return elementwise(a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor apply_activation(Activation act, const Tensor& a) {
  switch (act) {
    case Activation::Identity: return a;
    case Activation::Relu: return relu(a);
    case Activation::Tanh: return tanh_act(a);
    case Activation::Sigmoid: return sigmoid(a);
    case Activation::Softmax: {
      // Softmax normalizes over the trailing axis of a [B x n] batch.
      if (a.rank() == 2) return softmax(a);
      const std::size_t n = a.size();
      return softmax(a.reshaped({1, n})).reshaped(a.shape());
    }
  }
  throw ConfigError("apply_activation: unhandled activation");
}

Tensor activation_derivative(Activation act, const Tensor& pre) {
  switch (act) {
    case Activation::Identity:
      return Tensor::full(pre.shape(), 1.0);
    case Activation::Relu:
      return elementwise(pre, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::Tanh:
      return elementwise(pre, [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
    case Activation::Sigmoid:
      return elementwise(pre, [](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
    case Activation::Softmax:
      throw ConfigError(
          "softmax derivative is folded into the output delta; it has no "
          "elementwise form");
  }
  throw ConfigError("activation_derivative: unhandled activation");
}

DropoutMasks sample_dropout_masks(const Model& model, std::size_t batch, Rng& rng) {
  DropoutMasks out;
  out.masks.resize(model.num_layers());
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const double p = model.config.layers[i].dropout;
    if (p <= 0.0) continue;
    const std::size_t n = shape_numel(model.layer_output_shape[i]);
    Tensor mask({batch, n});
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t j = 0; j < mask.size(); ++j) {
      mask[j] = rng.next_unit() >= p ? keep_scale : 0.0;
    }
    out.masks[i] = std::move(mask);
  }
  return out;
}

namespace {

// Shared implementation of both passes; `x` is whatever h_0 should be.
ActivationTrace run_forward(const Model& model, Tensor x,
                            const DropoutMasks* masks, bool training) {
  if (x.rank() < 1) throw ShapeError("forward: scalar input");
  const std::size_t batch = x.extent(0);
  {
    const std::vector<std::size_t> got(x.shape().begin() + 1, x.shape().end());
    if (shape_numel(got) != model.input_size()) {
      throw ShapeError("forward: input sample shape " + Tensor::shape_str(got) +
                       " does not match model input " +
                       Tensor::shape_str(model.config.input_shape));
    }
  }

  ActivationTrace trace;
  trace.pre.resize(model.num_layers());
  trace.post.resize(model.num_layers());
  trace.dropout_masks.resize(model.num_layers());
  trace.pool_argmax.resize(model.num_layers());
  trace.input = std::move(x);

  const Tensor* cur = &trace.input;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const LayerSpec& layer = model.config.layers[i];
    const auto& out_shape = model.layer_output_shape[i];
    Tensor post;
    switch (layer.kind) {
      case LayerKind::FullyConnected: {
        const Tensor& w = model.weight(i);
        const Tensor flat = cur->reshaped({batch, cur->size() / batch});
        Tensor pre = matmul_nt(flat, w);  // [B x units]
        post = apply_activation(layer.activation, pre);
        trace.pre[i] = std::move(pre);
        break;
      }
      case LayerKind::Conv: {
        const Tensor& w = model.weight(i);
        std::vector<std::size_t> in_sample(cur->shape().begin() + 1, cur->shape().end());
        const std::size_t in_n = shape_numel(in_sample);
        const std::size_t out_n = shape_numel(out_shape);
        Tensor pre({batch, out_shape[0], out_shape[1], out_shape[2]});
        for (std::size_t s = 0; s < batch; ++s) {
          Tensor sample(in_sample,
                        {cur->data() + s * in_n, cur->data() + (s + 1) * in_n});
          Tensor mapped = conv2d_valid(sample, w, layer.stride);
          std::copy_n(mapped.data(), out_n, pre.data() + s * out_n);
        }
        post = apply_activation(layer.activation, pre);
        trace.pre[i] = std::move(pre);
        break;
      }
      case LayerKind::MaxPool: {
        std::vector<std::size_t> in_sample(cur->shape().begin() + 1, cur->shape().end());
        const std::size_t in_n = shape_numel(in_sample);
        const std::size_t out_n = shape_numel(out_shape);
        post = Tensor({batch, out_shape[0], out_shape[1], out_shape[2]});
        trace.pool_argmax[i].resize(batch * out_n);
        for (std::size_t s = 0; s < batch; ++s) {
          Tensor sample(in_sample,
                        {cur->data() + s * in_n, cur->data() + (s + 1) * in_n});
          MaxPoolResult pooled = maxpool2d(sample, layer.pool_size, layer.pool_stride);
          std::copy_n(pooled.output.data(), out_n, post.data() + s * out_n);
          // Indices stay sample-local, into the [CxHxW] block of sample s.
          std::copy_n(pooled.argmax.begin(), out_n,
                      trace.pool_argmax[i].begin() + s * out_n);
        }
        break;
      }
      case LayerKind::Flatten: {
        post = cur->reshaped({batch, shape_numel(out_shape)});
        break;
      }
    }
    if (training && masks != nullptr && layer.dropout > 0.0) {
      const Tensor& mask = masks->masks[i];
      if (mask.size() != post.size()) {
        throw ShapeError("dropout mask " + mask.shape_str() +
                         " does not match layer output " + post.shape_str());
      }
      for (std::size_t j = 0; j < post.size(); ++j) post[j] *= mask[j];
      trace.dropout_masks[i] = mask;
    }
    if (!post.all_finite()) {
      throw DivergenceError("non-finite activation at layer " + std::to_string(i + 1) +
                            " (" + to_string(layer.kind) + ")");
    }
    trace.post[i] = std::move(post);
    cur = &trace.post[i];
  }
  return trace;
}

}  // namespace

ActivationTrace forward_standard(const Model& model, const Tensor& x,
                                 const DropoutMasks* masks, bool training) {
  return run_forward(model, x, masks, training);
}

ActivationTrace forward_modulated(const Model& model, const Tensor& x,
                                  const Tensor& e, const DropoutMasks* masks,
                                  bool training) {
  const std::size_t batch = x.extent(0);
  if (e.rank() != 2 || e.extent(0) != batch || e.extent(1) != model.num_classes()) {
    throw ShapeError("forward_modulated: error " + e.shape_str() +
                     " does not match batch " + std::to_string(batch) + " x " +
                     std::to_string(model.num_classes()) + " classes");
  }
  // h_0^err = x + F e, one modulation per sample.
  const Tensor flat = x.reshaped({batch, model.input_size()});
  Tensor modulated = matmul_nt(e, model.F);  // [B x input_size]
  modulated += flat;
  return run_forward(model, modulated.reshaped(x.shape()), masks, training);
}

void export_embeddings(const Model& model, const LabeledDataset& data,
                       std::size_t layer_index, const std::filesystem::path& out_path) {
  if (layer_index == 0 || layer_index > model.num_layers()) {
    throw ParamError("export_embeddings: layer index " + std::to_string(layer_index) +
                     " outside 1.." + std::to_string(model.num_layers()));
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open " + out_path.string() + " for writing");
  const std::size_t dim = shape_numel(model.layer_output_shape[layer_index - 1]);
  for (std::size_t j = 0; j < dim; ++j) out << "unit_" << j << ",";
  out << "label\n";

  constexpr std::size_t kChunk = 512;
  char buf[32];
  std::vector<std::uint32_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(data.size(), start + kChunk);
    idx.resize(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(start + i);
    const Batch batch = gather(data, idx);
    const ActivationTrace trace = forward_standard(model, batch.inputs, nullptr, false);
    const Tensor& h = trace.post[layer_index - 1];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", h[i * dim + j]);
        out << buf << ",";
      }
      out << data.labels[start + i] << "\n";
    }
  }
  if (!out) throw IoError("write failure on " + out_path.string());
}

}  // namespace pepita
