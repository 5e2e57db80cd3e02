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

#include "pepita/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>

#include <nlohmann/json.hpp>

#include "pepita/checkpoint.hpp"
#include "pepita/csvio.hpp"
#include "pepita/diagnostics.hpp"
#include "pepita/errors.hpp"

namespace pepita {

OptimizerState OptimizerState::zeros_like(const Model& model) {
  OptimizerState state;
  state.velocity.reserve(model.weights.size());
  for (const Tensor& w : model.weights) state.velocity.emplace_back(w.shape());
  return state;
}

void sgd_momentum_step(std::vector<Tensor>& weights, const UpdateSet& updates,
                       OptimizerState& state, double eta, double momentum) {
  if (weights.size() != updates.deltas.size() ||
      weights.size() != state.velocity.size()) {
    throw ShapeError("sgd_momentum_step: weights/updates/velocity layer counts differ");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Tensor& w = weights[l];
    const Tensor& d = updates.deltas[l];
    Tensor& v = state.velocity[l];
    if (!w.same_shape(d) || !w.same_shape(v)) {
      throw ShapeError("sgd_momentum_step: layer " + std::to_string(l) + " shapes " +
                       w.shape_str() + " / " + d.shape_str() + " / " + v.shape_str());
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] + d[i];
      w[i] -= eta * v[i];
    }
    if (!v.all_finite() || !w.all_finite()) {
      throw DivergenceError("non-finite weights after optimizer step on layer " +
                            std::to_string(l) + " (rule '" + updates.rule + "')");
    }
  }
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  double lr = config.learning_rate;
  for (const DecayPoint& dp : config.decay) {
    if (epoch >= dp.epoch) lr *= dp.factor;
  }
  return lr;
}

namespace {

// Accuracy bookkeeping shared by training and evaluation: argmax with the
// lowest index winning ties.
std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::size_t count_correct(const Tensor& probs, const Tensor& targets) {
  const std::size_t b = probs.extent(0), n = probs.extent(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t predicted = argmax_row(probs.data() + i * n, n);
    const std::size_t truth = argmax_row(targets.data() + i * n, n);
    correct += predicted == truth;
  }
  return correct;
}

double output_loss(const Model& model, const Tensor& probs, const Tensor& targets) {
  switch (model.config.layers.back().activation) {
    case Activation::Softmax:
      return cross_entropy_loss(probs, targets);
    case Activation::Sigmoid:
      return binary_cross_entropy_loss(probs, targets);
    default: {
      // Squared error for linear/other heads.
      double total = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        const double d = probs[i] - targets[i];
        total += 0.5 * d * d;
      }
      return total / static_cast<double>(probs.extent(0));
    }
  }
}

}  // namespace

StepMetrics train_step(Model& model, const Batch& batch, const TrainConfig& config,
                       double learning_rate, OptimizerState& state, Rng& dropout_rng) {
  const std::size_t b = batch.inputs.extent(0);
  const DropoutMasks masks = sample_dropout_masks(model, b, dropout_rng);

  UpdateSet updates;
  const Tensor* output = nullptr;
  ActivationTrace trace_std;
  switch (config.rule) {
    case Rule::Pepita:
    case Rule::PepitaVariant: {
      trace_std = forward_standard(model, batch.inputs, &masks, true);
      const Tensor e = error_vector(trace_std.post.back(), batch.targets);
      const ActivationTrace trace_mod =
          forward_modulated(model, batch.inputs, e, &masks, true);
      updates = pepita_update(model, trace_std, trace_mod, e,
                              config.rule == Rule::Pepita ? PepitaPresyn::Modulated
                                                          : PepitaPresyn::Standard);
      output = &trace_std.post.back();
      break;
    }
    case Rule::Bp:
    case Rule::Fa:
    case Rule::Drtp: {
      trace_std = forward_standard(model, batch.inputs, &masks, true);
      if (config.rule == Rule::Bp) {
        updates = bp_update(model, trace_std, batch.targets);
      } else if (config.rule == Rule::Fa) {
        updates = fa_update(model, trace_std, batch.targets);
      } else {
        updates = drtp_update(model, trace_std, batch.targets);
      }
      output = &trace_std.post.back();
      break;
    }
  }

  sgd_momentum_step(model.weights, updates, state, learning_rate, config.momentum);

  StepMetrics metrics;
  metrics.count = b;
  metrics.correct = count_correct(*output, batch.targets);
  metrics.loss_sum = output_loss(model, *output, batch.targets) * static_cast<double>(b);
  return metrics;
}

EvalResult evaluate(const Model& model, const LabeledDataset& data, std::size_t threads) {
  constexpr std::size_t kChunk = 512;
  const std::size_t n = data.size();
  if (n == 0) return {};
  const std::size_t shards = (n + kChunk - 1) / kChunk;

  auto eval_shard = [&](std::size_t shard) {
    const std::size_t start = shard * kChunk;
    const std::size_t end = std::min(n, start + kChunk);
    std::vector<std::uint32_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      idx[i] = static_cast<std::uint32_t>(start + i);
    }
    const Batch batch = gather(data, idx);
    const ActivationTrace trace = forward_standard(model, batch.inputs, nullptr, false);
    const Tensor& out = trace.post.back();
    return std::pair<std::size_t, double>{
        count_correct(out, batch.targets),
        output_loss(model, out, batch.targets) * static_cast<double>(idx.size())};
  };

  std::size_t correct = 0;
  double loss_sum = 0.0;
  if (threads <= 1) {
    for (std::size_t s = 0; s < shards; ++s) {
      const auto [c, l] = eval_shard(s);
      correct += c;
      loss_sum += l;
    }
  } else {
    // Launch in waves; partial results merge in shard order, so totals do
    // not depend on the thread count.
    std::vector<std::future<std::pair<std::size_t, double>>> futures(shards);
    std::size_t next = 0;
    while (next < shards) {
      const std::size_t wave = std::min(threads, shards - next);
      for (std::size_t i = 0; i < wave; ++i) {
        futures[next + i] = std::async(std::launch::async, eval_shard, next + i);
      }
      for (std::size_t i = 0; i < wave; ++i) {
        const auto [c, l] = futures[next + i].get();
        correct += c;
        loss_sum += l;
      }
      next += wave;
    }
  }
  return EvalResult{static_cast<double>(correct) / static_cast<double>(n),
                    loss_sum / static_cast<double>(n)};
}

std::pair<LabeledDataset, LabeledDataset> load_dataset_pair(const DatasetRef& ref) {
  const auto& dir = ref.dir;
  std::pair<LabeledDataset, LabeledDataset> pair;
  if (ref.id == "mnist") {
    pair.first = load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    pair.second = load_mnist(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  } else if (ref.id == "cifar10") {
    std::vector<std::filesystem::path> train;
    for (int i = 1; i <= 5; ++i) {
      train.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    }
    pair.first = load_cifar10(train);
    pair.second = load_cifar10({dir / "test_batch.bin"});
  } else if (ref.id == "cifar100" || ref.id == "cifar100_coarse") {
    const auto granularity = ref.id == "cifar100" ? Cifar100Labels::Fine
                                                  : Cifar100Labels::Coarse;
    pair.first = load_cifar100(dir / "train.bin", granularity);
    pair.second = load_cifar100(dir / "test.bin", granularity);
  } else {
    throw ConfigError("unknown dataset id '" + ref.id + "'");
  }
  if (ref.standardize) {
    pair.first.standardize();
    pair.second.standardize();
  }
  return pair;
}

namespace {

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Angle is defined when the composed product of all trainable matrices has
// the transposed shape of F, i.e. for all-FC stacks.
std::optional<double> try_alignment_angle(const Model& model) {
  std::vector<Tensor> w_list;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const LayerKind kind = model.config.layers[i].kind;
    if (kind == LayerKind::Flatten) continue;
    if (kind != LayerKind::FullyConnected) return std::nullopt;
    w_list.push_back(model.weight(i));
  }
  if (w_list.empty()) return std::nullopt;
  try {
    return alignment_angle(w_list, model.F);
  } catch (const ShapeError&) {
    return std::nullopt;
  } catch (const ParamError&) {
    return std::nullopt;
  }
}

std::vector<double> all_weight_norms(const Model& model) {
  std::vector<double> norms;
  norms.reserve(model.weights.size());
  for (const Tensor& w : model.weights) norms.push_back(weight_norm(w));
  return norms;
}

void write_histograms(const Model& model, const std::filesystem::path& path) {
  std::vector<std::string> header{"layer", "bin_lo", "bin_hi", "count"};
  CsvWriter csv(path, header);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const Tensor& w = model.weights[l];
    double lo = w[0], hi = w[0];
    for (std::size_t i = 0; i < w.size(); ++i) {
      lo = std::min(lo, w[i]);
      hi = std::max(hi, w[i]);
    }
    if (!(hi > lo)) hi = lo + 1e-12;
    const Histogram h = weight_histogram(w, 200, lo, hi);
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      csv.begin_row();
      csv.add(l);
      csv.add(h.edges[b]);
      csv.add(h.edges[b + 1]);
      csv.add(h.counts[b]);
      csv.end_row();
    }
  }
}

}  // namespace

RunResult run_experiment(const ExperimentManifest& manifest_in,
                         const RunOverrides& overrides) {
  ExperimentManifest manifest = manifest_in;
  if (overrides.seed) manifest.train.master_seed = *overrides.seed;
  if (overrides.epochs) manifest.train.epochs = *overrides.epochs;
  if (overrides.output_dir) manifest.output_dir = *overrides.output_dir;
  if (overrides.data_dir) manifest.dataset.dir = *overrides.data_dir;
  manifest.train.threads = overrides.threads;
  manifest.train.exact_repro = overrides.exact_repro || overrides.threads <= 1;
  validate_manifest(manifest);

  const auto t_run0 = std::chrono::steady_clock::now();
  auto [train_set, test_set] = load_dataset_pair(manifest.dataset);
  if (shape_numel(manifest.model.input_shape) != train_set.input_size()) {
    throw ConfigError("model input " + Tensor::shape_str(manifest.model.input_shape) +
                      " does not match dataset sample " +
                      Tensor::shape_str(train_set.sample_shape()));
  }

  const TrainConfig& config = manifest.train;
  Model model = build_model(manifest.model, feedback_kind_for(config.rule),
                            config.f_options(), config.master_seed);
  if (model.num_classes() != train_set.num_classes()) {
    throw ConfigError("model emits " + std::to_string(model.num_classes()) +
                      " classes, dataset has " + std::to_string(train_set.num_classes()));
  }
  OptimizerState state = OptimizerState::zeros_like(model);
  Rng dropout_rng = Rng::derive(config.master_seed, "dropout");

  RunResult result;
  result.run_dir = overrides.run_dir
                       ? *overrides.run_dir
                       : manifest.output_dir / (manifest.name + "-" + timestamp_utc());
  std::filesystem::create_directories(result.run_dir);
  result.metrics_path = result.run_dir / "metrics.csv";
  result.summary_path = result.run_dir / "summary.json";
  result.checkpoint_path = result.run_dir / "checkpoint.bin";

  std::vector<std::string> header{"epoch", "train_accuracy", "test_accuracy",
                                  "train_loss", "alignment_angle_deg"};
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    header.push_back("norm_W" + std::to_string(l + 1));
  }
  header.push_back("wall_time_s");
  CsvWriter csv(result.metrics_path, header);

  const auto emit = [&](const MetricsRecord& rec) {
    csv.begin_row();
    csv.add(rec.epoch);
    csv.add(rec.train_accuracy);
    csv.add(rec.test_accuracy);
    csv.add(rec.train_loss);
    csv.add(rec.alignment_angle_deg ? format_double(*rec.alignment_angle_deg)
                                    : std::string());
    for (double norm : rec.weight_norms) csv.add(norm);
    csv.add(rec.wall_time_s);
    csv.end_row();
    result.metrics.push_back(rec);
  };

  const auto record_epoch = [&](std::size_t epoch, double train_acc, double train_loss,
                                double elapsed) {
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_accuracy = train_acc;
    rec.train_loss = train_loss;
    const EvalResult test = evaluate(model, test_set, config.threads);
    rec.test_accuracy = test.accuracy;
    if (manifest.diagnostics.alignment_angle) rec.alignment_angle_deg = try_alignment_angle(model);
    rec.weight_norms = all_weight_norms(model);
    rec.wall_time_s = config.exact_repro ? 0.0 : elapsed;
    emit(rec);
    result.best_test_accuracy = std::max(result.best_test_accuracy, test.accuracy);
    result.final_test_accuracy = test.accuracy;
  };

  // Epoch 0: the untouched model, so learning curves start at chance.
  {
    const EvalResult train_eval = evaluate(model, train_set, config.threads);
    record_epoch(0, train_eval.accuracy, train_eval.mean_loss, 0.0);
  }

  const BatchPlan plan{config.batch_size, config.master_seed, config.drop_last};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(config, epoch);
    const auto batches = batch_indices(train_set.size(), plan, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0, step = 0;
    for (const auto& idx : batches) {
      const Batch batch = gather(train_set, idx);
      try {
        const StepMetrics sm = train_step(model, batch, config, lr, state, dropout_rng);
        loss_sum += sm.loss_sum;
        correct += sm.correct;
        seen += sm.count;
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " [epoch " +
                              std::to_string(epoch + 1) + ", step " +
                              std::to_string(step + 1) + "]");
      }
      ++step;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record_epoch(epoch + 1, static_cast<double>(correct) / static_cast<double>(seen),
                 loss_sum / static_cast<double>(seen), elapsed);
  }

  save_checkpoint(result.checkpoint_path, model, state.velocity, config.rule,
                  config.master_seed);
  if (manifest.diagnostics.weight_histogram) {
    write_histograms(model, result.run_dir / "weight_histograms.csv");
  }
  if (manifest.diagnostics.export_embeddings) {
    export_embeddings(model, test_set, manifest.diagnostics.embeddings_layer,
                      result.run_dir / "embeddings.csv");
  }

  nlohmann::json summary;
  summary["manifest"] = manifest_to_json(manifest);
  summary["effective_seed"] = config.master_seed;
  summary["epochs_run"] = config.epochs;
  summary["final_test_accuracy"] = result.final_test_accuracy;
  summary["best_test_accuracy"] = result.best_test_accuracy;
  summary["exact_repro"] = config.exact_repro;
  summary["threads"] = config.threads;
  summary["total_wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_run0).count();
  std::ofstream sout(result.summary_path);
  if (!sout) throw IoError("cannot write " + result.summary_path.string());
  sout << summary.dump(2) << "\n";
  return result;
}

}  // namespace pepita
