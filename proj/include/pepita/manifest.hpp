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

#ifndef PEPITA_MANIFEST_HPP
#define PEPITA_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pepita/network.hpp"

namespace pepita {

enum class Rule { Pepita, PepitaVariant, Bp, Fa, Drtp };

const char* to_string(Rule rule);
Rule rule_from_string(const std::string& name);
FeedbackKind feedback_kind_for(Rule rule);

struct DecayPoint {
  std::size_t epoch = 0;
  double factor = 1.0;
};

struct TrainConfig {
  Rule rule = Rule::Pepita;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::vector<DecayPoint> decay;  // strictly increasing epochs
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double dropout_rate = 0.0;  // applied to hidden FC layers unless a layer overrides
  double f_scale_factor = 0.05;
  bool f_normal_family = false;
  std::uint64_t master_seed = 1;
  bool drop_last = false;
  std::size_t threads = 1;
  // Zeroes the wall-time column so repeated runs produce bit-identical
  // metrics files. Implied whenever threads == 1.
  bool exact_repro = true;

  FOptions f_options() const { return FOptions{f_scale_factor, f_normal_family}; }
};

struct DiagnosticsToggles {
  bool alignment_angle = true;
  bool weight_histogram = false;
  bool export_embeddings = false;
  std::size_t embeddings_layer = 1;
};

struct DatasetRef {
  std::string id;  // mnist | cifar10 | cifar100 | cifar100_coarse
  std::filesystem::path dir;
  bool standardize = false;
};

// One experiment: everything needed to reproduce a run from scratch.
struct ExperimentManifest {
  int schema_version = 1;
  std::string name;
  DatasetRef dataset;
  ModelConfig model;
  TrainConfig train;
  DiagnosticsToggles diagnostics;
  std::filesystem::path output_dir = "runs";
};

// Strict parsing: unknown keys anywhere are errors, so a typoed
// hyperparameter cannot silently fall back to a default.
ExperimentManifest parse_manifest(const std::filesystem::path& path);
ExperimentManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const ExperimentManifest& m);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

void validate_manifest(const ExperimentManifest& m);

}  // namespace pepita

#endif  // PEPITA_MANIFEST_HPP
