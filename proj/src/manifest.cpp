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

#include "pepita/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "pepita/errors.hpp"

namespace pepita {

using nlohmann::json;

const char* to_string(Rule rule) {
  switch (rule) {
    case Rule::Pepita: return "pepita";
    case Rule::PepitaVariant: return "pepita_variant";
    case Rule::Bp: return "bp";
    case Rule::Fa: return "fa";
    case Rule::Drtp: return "drtp";
  }
  return "?";
}

Rule rule_from_string(const std::string& name) {
  if (name == "pepita") return Rule::Pepita;
  if (name == "pepita_variant") return Rule::PepitaVariant;
  if (name == "bp") return Rule::Bp;
  if (name == "fa") return Rule::Fa;
  if (name == "drtp") return Rule::Drtp;
  throw ConfigError("unknown rule '" + name +
                    "' (expected pepita, pepita_variant, bp, fa or drtp)");
}

FeedbackKind feedback_kind_for(Rule rule) {
  switch (rule) {
    case Rule::Fa: return FeedbackKind::Fa;
    case Rule::Drtp: return FeedbackKind::Drtp;
    default: return FeedbackKind::None;
  }
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) {
      throw ConfigError("manifest: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_required(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) {
    throw ConfigError("manifest: missing key '" + key + "' in " + where);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("manifest: bad value for '" + key + "' in " + where + ": " +
                      e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("manifest: bad value for '" + key + "' in " + where + ": " +
                      e.what());
  }
}

LayerSpec layer_from_json(const json& j, std::size_t index) {
  const std::string where = "model.layers[" + std::to_string(index) + "]";
  reject_unknown_keys(j,
                      {"kind", "units", "filters", "kernel", "stride", "size",
                       "activation", "dropout"},
                      where);
  const auto kind = get_required<std::string>(j, "kind", where);
  LayerSpec s;
  if (kind == "fully_connected") {
    s = LayerSpec::fully_connected(
        get_required<std::size_t>(j, "units", where),
        activation_from_string(get_or<std::string>(j, "activation", where, "identity")),
        get_or<double>(j, "dropout", where, 0.0));
  } else if (kind == "conv") {
    s = LayerSpec::conv(
        get_required<std::size_t>(j, "filters", where),
        get_required<std::size_t>(j, "kernel", where),
        get_or<std::size_t>(j, "stride", where, 1),
        activation_from_string(get_or<std::string>(j, "activation", where, "identity")));
    s.dropout = get_or<double>(j, "dropout", where, 0.0);
  } else if (kind == "maxpool") {
    s = LayerSpec::maxpool(get_required<std::size_t>(j, "size", where),
                           get_or<std::size_t>(j, "stride", where,
                                               get_required<std::size_t>(j, "size", where)));
  } else if (kind == "flatten") {
    s = LayerSpec::flatten();
  } else {
    throw ConfigError("manifest: unknown layer kind '" + kind + "' in " + where);
  }
  return s;
}

json layer_to_json(const LayerSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case LayerKind::FullyConnected:
      j["units"] = s.units;
      j["activation"] = to_string(s.activation);
      if (s.dropout > 0.0) j["dropout"] = s.dropout;
      break;
    case LayerKind::Conv:
      j["filters"] = s.filters;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["activation"] = to_string(s.activation);
      if (s.dropout > 0.0) j["dropout"] = s.dropout;
      break;
    case LayerKind::MaxPool:
      j["size"] = s.pool_size;
      j["stride"] = s.pool_stride;
      break;
    case LayerKind::Flatten:
      break;
  }
  return j;
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  reject_unknown_keys(j, {"input", "layers"}, "model");
  ModelConfig config;
  config.input_shape = get_required<std::vector<std::size_t>>(j, "input", "model");
  if (!j.contains("layers") || !j.at("layers").is_array()) {
    throw ConfigError("manifest: model.layers must be an array");
  }
  std::size_t i = 0;
  for (const auto& layer : j.at("layers")) {
    config.layers.push_back(layer_from_json(layer, i++));
  }
  return config;
}

json model_config_to_json(const ModelConfig& config) {
  json j;
  j["input"] = config.input_shape;
  j["layers"] = json::array();
  for (const auto& layer : config.layers) j["layers"].push_back(layer_to_json(layer));
  return j;
}

ExperimentManifest manifest_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"schema_version", "name", "dataset", "model", "train",
                       "diagnostics", "output_dir"},
                      "manifest");
  ExperimentManifest m;
  m.schema_version = get_required<int>(j, "schema_version", "manifest");
  if (m.schema_version != 1) {
    throw ConfigError("manifest: unsupported schema_version " +
                      std::to_string(m.schema_version));
  }
  m.name = get_required<std::string>(j, "name", "manifest");
  m.output_dir = get_or<std::string>(j, "output_dir", "manifest", "runs");

  const json& d = j.at("dataset");
  reject_unknown_keys(d, {"id", "dir", "standardize"}, "dataset");
  m.dataset.id = get_required<std::string>(d, "id", "dataset");
  m.dataset.dir = get_required<std::string>(d, "dir", "dataset");
  m.dataset.standardize = get_or<bool>(d, "standardize", "dataset", false);

  m.model = model_config_from_json(j.at("model"));

  const json& t = j.at("train");
  reject_unknown_keys(t,
                      {"rule", "learning_rate", "momentum", "decay", "batch_size",
                       "epochs", "dropout", "f_scale_factor", "f_family", "seed",
                       "drop_last"},
                      "train");
  m.train.rule = rule_from_string(get_required<std::string>(t, "rule", "train"));
  m.train.learning_rate = get_required<double>(t, "learning_rate", "train");
  m.train.momentum = get_or<double>(t, "momentum", "train", 0.9);
  m.train.batch_size = get_required<std::size_t>(t, "batch_size", "train");
  m.train.epochs = get_required<std::size_t>(t, "epochs", "train");
  m.train.dropout_rate = get_or<double>(t, "dropout", "train", 0.0);
  m.train.f_scale_factor = get_or<double>(t, "f_scale_factor", "train", 0.05);
  const auto family = get_or<std::string>(t, "f_family", "train", "uniform");
  if (family == "uniform") {
    m.train.f_normal_family = false;
  } else if (family == "normal") {
    m.train.f_normal_family = true;
  } else {
    throw ConfigError("manifest: f_family must be 'uniform' or 'normal'");
  }
  m.train.master_seed = get_or<std::uint64_t>(t, "seed", "train", 1);
  m.train.drop_last = get_or<bool>(t, "drop_last", "train", false);
  if (t.contains("decay")) {
    for (const auto& dp : t.at("decay")) {
      reject_unknown_keys(dp, {"epoch", "factor"}, "train.decay[]");
      m.train.decay.push_back(DecayPoint{
          get_required<std::size_t>(dp, "epoch", "train.decay[]"),
          get_required<double>(dp, "factor", "train.decay[]")});
    }
  }

  if (j.contains("diagnostics")) {
    const json& g = j.at("diagnostics");
    reject_unknown_keys(
        g, {"alignment_angle", "weight_histogram", "export_embeddings", "embeddings_layer"},
        "diagnostics");
    m.diagnostics.alignment_angle = get_or<bool>(g, "alignment_angle", "diagnostics", true);
    m.diagnostics.weight_histogram =
        get_or<bool>(g, "weight_histogram", "diagnostics", false);
    m.diagnostics.export_embeddings =
        get_or<bool>(g, "export_embeddings", "diagnostics", false);
    m.diagnostics.embeddings_layer =
        get_or<std::size_t>(g, "embeddings_layer", "diagnostics", 1);
  }

  // Table-style dropout applies to every hidden FC layer that does not set
  // its own rate.
  if (m.train.dropout_rate > 0.0) {
    for (std::size_t i = 0; i + 1 < m.model.layers.size(); ++i) {
      LayerSpec& layer = m.model.layers[i];
      if (layer.kind == LayerKind::FullyConnected && layer.dropout == 0.0) {
        layer.dropout = m.train.dropout_rate;
      }
    }
  }

  validate_manifest(m);
  return m;
}

ExperimentManifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

json manifest_to_json(const ExperimentManifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["name"] = m.name;
  j["dataset"] = {{"id", m.dataset.id},
                  {"dir", m.dataset.dir.string()},
                  {"standardize", m.dataset.standardize}};
  j["model"] = model_config_to_json(m.model);
  json decay = json::array();
  for (const auto& dp : m.train.decay) {
    decay.push_back({{"epoch", dp.epoch}, {"factor", dp.factor}});
  }
  j["train"] = {{"rule", to_string(m.train.rule)},
                {"learning_rate", m.train.learning_rate},
                {"momentum", m.train.momentum},
                {"decay", decay},
                {"batch_size", m.train.batch_size},
                {"epochs", m.train.epochs},
                {"dropout", m.train.dropout_rate},
                {"f_scale_factor", m.train.f_scale_factor},
                {"f_family", m.train.f_normal_family ? "normal" : "uniform"},
                {"seed", m.train.master_seed},
                {"drop_last", m.train.drop_last}};
  j["diagnostics"] = {{"alignment_angle", m.diagnostics.alignment_angle},
                      {"weight_histogram", m.diagnostics.weight_histogram},
                      {"export_embeddings", m.diagnostics.export_embeddings},
                      {"embeddings_layer", m.diagnostics.embeddings_layer}};
  j["output_dir"] = m.output_dir.string();
  return j;
}

void validate_manifest(const ExperimentManifest& m) {
  if (m.name.empty()) throw ConfigError("manifest: name must not be empty");
  static const std::set<std::string> known_ids{"mnist", "cifar10", "cifar100",
                                               "cifar100_coarse"};
  if (!known_ids.count(m.dataset.id)) {
    throw ConfigError("manifest: unknown dataset id '" + m.dataset.id + "'");
  }
  if (!(m.train.learning_rate > 0.0) || !std::isfinite(m.train.learning_rate)) {
    throw ConfigError("manifest: learning_rate must be positive and finite");
  }
  if (m.train.momentum < 0.0 || m.train.momentum >= 1.0) {
    throw ConfigError("manifest: momentum must lie in [0,1)");
  }
  if (m.train.batch_size == 0) throw ConfigError("manifest: batch_size must be positive");
  if (m.train.dropout_rate < 0.0 || m.train.dropout_rate >= 1.0) {
    throw ConfigError("manifest: dropout must lie in [0,1)");
  }
  if (!(m.train.f_scale_factor >= 0.0) || !std::isfinite(m.train.f_scale_factor)) {
    throw ConfigError("manifest: f_scale_factor must be nonnegative and finite");
  }
  for (std::size_t i = 0; i < m.train.decay.size(); ++i) {
    if (!std::isfinite(m.train.decay[i].factor)) {
      throw ConfigError("manifest: decay factor must be finite");
    }
    if (i > 0 && m.train.decay[i].epoch <= m.train.decay[i - 1].epoch) {
      throw ConfigError("manifest: decay epochs must be strictly increasing");
    }
  }
  infer_shapes(m.model);  // throws ConfigError on non-composing layers
}

}  // namespace pepita
