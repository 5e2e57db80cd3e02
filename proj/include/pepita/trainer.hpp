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

#ifndef PEPITA_TRAINER_HPP
#define PEPITA_TRAINER_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pepita/dataset.hpp"
#include "pepita/manifest.hpp"
#include "pepita/network.hpp"
#include "pepita/rules.hpp"

namespace pepita {

// Velocity tensors for classical momentum, one per weight tensor:
//   v <- momentum * v + dW ;  W <- W - eta * v
// Momentum 0 reduces to the plain SGD step W <- W - eta * dW.
struct OptimizerState {
  std::vector<Tensor> velocity;

  static OptimizerState zeros_like(const Model& model);
};

void sgd_momentum_step(std::vector<Tensor>& weights, const UpdateSet& updates,
                       OptimizerState& state, double eta, double momentum);

// Base learning rate times every decay factor whose epoch has been reached
// (decay epochs are 0-based training-pass indices).
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

struct MetricsRecord {
  std::size_t epoch = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double train_loss = 0.0;
  std::optional<double> alignment_angle_deg;
  std::vector<double> weight_norms;  // Frobenius norm per trainable layer
  double wall_time_s = 0.0;
};

struct StepMetrics {
  double loss_sum = 0.0;   // batch mean loss times batch size
  std::size_t correct = 0;
  std::size_t count = 0;
};

// One optimizer step on one batch. PEPITA runs standard pass -> error ->
// modulated pass -> updates; the weight change happens once, after the
// modulated pass. BP/FA/DRTP run a single forward pass and their rule.
// The dropout stream must be passed in so the whole run replays from the
// master seed.
StepMetrics train_step(Model& model, const Batch& batch, const TrainConfig& config,
                       double learning_rate, OptimizerState& state, Rng& dropout_rng);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Accuracy = fraction of argmax(h_L) == label, ties to the lowest class
// index; dropout disabled. Loss matches the output activation (cross
// entropy for softmax, binary cross entropy for sigmoid, squared error
// otherwise). `threads` shards the dataset into fixed chunks whose partial
// sums are merged in shard order, so results do not depend on thread count.
EvalResult evaluate(const Model& model, const LabeledDataset& data,
                    std::size_t threads = 1);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::filesystem::path> data_dir;  // overrides manifest dataset dir
  std::optional<std::filesystem::path> run_dir;   // exact run directory
  std::size_t threads = 1;
  bool exact_repro = true;
};

struct RunResult {
  std::filesystem::path run_dir;
  std::filesystem::path metrics_path;
  std::filesystem::path summary_path;
  std::filesystem::path checkpoint_path;
  double final_test_accuracy = 0.0;
  double best_test_accuracy = 0.0;
  std::vector<MetricsRecord> metrics;
};

// Full experiment: load data, build the model, train for the configured
// epochs with evaluation after every epoch, and persist metrics CSV,
// summary JSON and a checkpoint under a per-run directory.
RunResult run_experiment(const ExperimentManifest& manifest,
                         const RunOverrides& overrides = {});

// Loads the dataset pair named by the manifest reference. Returns
// {train, test}.
std::pair<LabeledDataset, LabeledDataset> load_dataset_pair(const DatasetRef& ref);

}  // namespace pepita

#endif  // PEPITA_TRAINER_HPP
