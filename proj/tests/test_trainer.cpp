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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pepita/checkpoint.hpp"
#include "pepita/errors.hpp"
#include "pepita/trainer.hpp"
#include "testutil.hpp"

using namespace pepita;
using namespace pepita::testutil;

namespace {

namespace fs = std::filesystem;

fs::path temp_root() {
  const fs::path dir = fs::temp_directory_path() / "pepita_trainer_tests";
  fs::create_directories(dir);
  return dir;
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(x >> 24);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back(x & 0xff);
}

// A small on-disk synthetic dataset in MNIST layout (4x4 images, labels
// cycling over 10 classes) so run_experiment has something to load.
fs::path synthetic_mnist_dir(std::size_t n_train, std::size_t n_test) {
  const fs::path dir = temp_root() / ("synth_" + std::to_string(n_train));
  fs::create_directories(dir);
  Rng rng(1234);
  const auto write_pair = [&](const std::string& prefix, std::size_t n) {
    std::vector<unsigned char> img;
    push_be32(img, 2051);
    push_be32(img, static_cast<std::uint32_t>(n));
    push_be32(img, 4);
    push_be32(img, 4);
    std::vector<unsigned char> lab;
    push_be32(lab, 2049);
    push_be32(lab, static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<unsigned char>(i % 10);
      lab.push_back(label);
      for (std::size_t p = 0; p < 16; ++p) {
        // Label-dependent pixels so the task is learnable.
        const double v = 0.5 + 0.4 * std::sin(0.7 * label + 1.3 * p) +
                         0.05 * rng.uniform_sym(1.0);
        img.push_back(static_cast<unsigned char>(std::clamp(v, 0.0, 1.0) * 255));
      }
    }
    std::ofstream(dir / (prefix + "-images-idx3-ubyte"), std::ios::binary)
        .write(reinterpret_cast<const char*>(img.data()), img.size());
    std::ofstream(dir / (prefix + "-labels-idx1-ubyte"), std::ios::binary)
        .write(reinterpret_cast<const char*>(lab.data()), lab.size());
  };
  write_pair("train", n_train);
  write_pair("t10k", n_test);
  return dir;
}

ExperimentManifest tiny_manifest(const fs::path& data_dir, Rule rule) {
  ExperimentManifest m;
  m.name = "tiny";
  m.dataset.id = "mnist";
  m.dataset.dir = data_dir;
  m.model.input_shape = {1, 4, 4};
  const Activation hidden = rule == Rule::Drtp ? Activation::Tanh : Activation::Relu;
  const Activation out = rule == Rule::Drtp ? Activation::Sigmoid : Activation::Softmax;
  m.model.layers = {LayerSpec::fully_connected(16, hidden, 0.0),
                    LayerSpec::fully_connected(10, out)};
  m.train.rule = rule;
  m.train.learning_rate = 0.1;
  m.train.momentum = 0.9;
  m.train.batch_size = 10;
  m.train.epochs = 2;
  m.train.master_seed = 5;
  m.output_dir = temp_root() / "runs";
  return m;
}

}  // namespace

TEST_CASE("sgd step without momentum follows W <- W - eta dW") {
  std::vector<Tensor> weights{Tensor({1}, {1.0})};
  OptimizerState state{{Tensor({1})}};
  UpdateSet updates{{Tensor({1}, {0.5})}, "test"};
  sgd_momentum_step(weights, updates, state, 0.1, 0.0);
  CHECK(weights[0][0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("sgd with zero updates leaves weights constant") {
  std::vector<Tensor> weights{Tensor({3}, {1.0, -2.0, 0.25})};
  const std::vector<double> before = weights[0].values();
  OptimizerState state{{Tensor({3})}};
  UpdateSet updates{{Tensor({3})}, "test"};
  for (int step = 0; step < 5; ++step) {
    sgd_momentum_step(weights, updates, state, 0.7, 0.9);
  }
  CHECK(weights[0].values() == before);
}

TEST_CASE("momentum 0.9 velocity accumulation over two unit updates") {
  std::vector<Tensor> weights{Tensor({1})};
  OptimizerState state{{Tensor({1})}};
  UpdateSet updates{{Tensor({1}, {1.0})}, "test"};
  sgd_momentum_step(weights, updates, state, 1.0, 0.9);
  CHECK(weights[0][0] == doctest::Approx(-1.0).epsilon(1e-15));
  sgd_momentum_step(weights, updates, state, 1.0, 0.9);
  CHECK(weights[0][0] == doctest::Approx(-2.9).epsilon(1e-15));
}

TEST_CASE("sgd rejects non-finite updates as divergence") {
  std::vector<Tensor> weights{Tensor({1}, {0.0})};
  OptimizerState state{{Tensor({1})}};
  UpdateSet updates{{Tensor({1}, {std::numeric_limits<double>::quiet_NaN()})}, "test"};
  CHECK_THROWS_AS(sgd_momentum_step(weights, updates, state, 0.1, 0.0), DivergenceError);
}

TEST_CASE("lr_at_epoch applies every decay whose epoch has been reached") {
  TrainConfig config;
  config.learning_rate = 0.1;
  config.decay = {{60, 0.1}};
  CHECK(lr_at_epoch(config, 0) == 0.1);
  CHECK(lr_at_epoch(config, 59) == 0.1);
  CHECK(lr_at_epoch(config, 60) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_at_epoch(config, 99) == doctest::Approx(0.01).epsilon(1e-15));

  TrainConfig cifar;
  cifar.learning_rate = 1.0;
  cifar.decay = {{60, 0.1}, {90, 0.1}};
  CHECK(lr_at_epoch(cifar, 95) == doctest::Approx(0.01).epsilon(1e-15));

  TrainConfig flat;
  flat.learning_rate = 0.3;
  for (std::size_t e = 0; e < 200; e += 17) CHECK(lr_at_epoch(flat, e) == 0.3);
}

TEST_CASE("lr_at_epoch is non-increasing when all factors are <= 1") {
  TrainConfig config;
  config.learning_rate = 0.5;
  config.decay = {{3, 0.5}, {10, 0.9}, {30, 0.1}};
  double prev = lr_at_epoch(config, 0);
  for (std::size_t e = 1; e <= 40; ++e) {
    const double lr = lr_at_epoch(config, e);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("a pepita train step with e = 0 leaves the weights unchanged") {
  ModelConfig config;
  config.input_shape = {2};
  config.layers = {LayerSpec::fully_connected(2, Activation::Identity),
                   LayerSpec::fully_connected(2, Activation::Identity)};
  Model model = build_model(config, FeedbackKind::None, FOptions{}, 1);
  Tensor x({1, 2}, {0.6, -0.4});
  // Target = current output, so the error vanishes.
  const Tensor target = forward_standard(model, x, nullptr, false).post.back();
  const std::vector<double> w0 = model.weights[0].values();
  const std::vector<double> w1 = model.weights[1].values();

  TrainConfig train;
  train.rule = Rule::Pepita;
  train.momentum = 0.0;
  OptimizerState state = OptimizerState::zeros_like(model);
  Rng drng(1);
  train_step(model, Batch{x, target}, train, 0.1, state, drng);
  CHECK(model.weights[0].values() == w0);
  CHECK(model.weights[1].values() == w1);
}

TEST_CASE("one pepita step reproduces the hand-computed weight change") {
  ModelConfig config;
  config.input_shape = {2};
  config.layers = {LayerSpec::fully_connected(2, Activation::Identity),
                   LayerSpec::fully_connected(2, Activation::Identity)};
  Model model = build_model(config, FeedbackKind::None, FOptions{}, 1);
  model.weights[0] = Tensor::matrix({{1, 0}, {0, 1}});
  model.weights[1] = Tensor::matrix({{0.5, 0}, {0, 0.5}});
  model.F = Tensor::matrix({{0.1, 0}, {0, 0.1}});

  TrainConfig train;
  train.rule = Rule::Pepita;
  train.momentum = 0.0;
  OptimizerState state = OptimizerState::zeros_like(model);
  Rng drng(1);
  Tensor x({1, 2}, {1.0, 0.0});
  Tensor target({1, 2}, {1.0, 0.0});
  train_step(model, Batch{x, target}, train, 0.1, state, drng);

  // W(t+1) = W(t) - 0.1 * dW with dW1 = [[0.0475,0],[0,0]],
  // dW2 = [[-0.475,0],[0,0]].
  CHECK(model.weights[0][0] == doctest::Approx(0.99525).epsilon(1e-14));
  CHECK(model.weights[0][3] == 1.0);
  CHECK(model.weights[1][0] == doctest::Approx(0.5475).epsilon(1e-14));
  CHECK(model.weights[1][3] == 0.5);
}

TEST_CASE("two rules from one seed share the step-0 standard pass") {
  ModelConfig config;
  config.input_shape = {6};
  config.layers = {LayerSpec::fully_connected(8, Activation::Relu),
                   LayerSpec::fully_connected(4, Activation::Softmax)};
  const Model pepita = build_model(config, FeedbackKind::None, FOptions{}, 77);
  const Model fa = build_model(config, FeedbackKind::Fa, FOptions{}, 77);
  Rng rng(5);
  const Tensor x = random_tensor(rng, {3, 6});
  const ActivationTrace a = forward_standard(pepita, x, nullptr, false);
  const ActivationTrace b = forward_standard(fa, x, nullptr, false);
  CHECK(bit_equal(a.post.back(), b.post.back()));
}

TEST_CASE("evaluate: identity copier scores 1.0 and ties go to the lowest class") {
  // Model copies its 10-dim input; dataset inputs are one-hot rows.
  ModelConfig config;
  config.input_shape = {10};
  config.layers = {LayerSpec::fully_connected(10, Activation::Identity)};
  Model model = build_model(config, FeedbackKind::None, FOptions{}, 1);
  model.weights[0] = Tensor({10, 10});
  for (int i = 0; i < 10; ++i) model.weights[0][i * 10 + i] = 1.0;

  LabeledDataset data;
  data.name = "onehot";
  data.inputs = Tensor({10, 10});
  data.labels.resize(10);
  for (int i = 0; i < 10; ++i) {
    data.inputs[i * 10 + i] = 1.0;
    data.labels[i] = i;
  }
  data.targets_onehot = one_hot(data.labels, 10);
  CHECK(evaluate(model, data).accuracy == 1.0);

  // All-zero weights output a constant row; argmax must pick class 0.
  model.weights[0] = Tensor({10, 10});
  const EvalResult tied = evaluate(model, data);
  CHECK(tied.accuracy == doctest::Approx(0.1).epsilon(1e-15));  // only label 0 matches
}

TEST_CASE("evaluate an untrained model on random labels is at chance level") {
  ModelConfig config;
  config.input_shape = {12};
  config.layers = {LayerSpec::fully_connected(16, Activation::Relu),
                   LayerSpec::fully_connected(10, Activation::Softmax)};
  const Model model = build_model(config, FeedbackKind::None, FOptions{}, 3);
  Rng rng(11);
  LabeledDataset data;
  data.name = "noise";
  data.inputs = random_tensor(rng, {10000, 12});
  data.labels.resize(10000);
  for (auto& label : data.labels) label = static_cast<int>(rng.next_below(10));
  data.targets_onehot = one_hot(data.labels, 10);
  const EvalResult result = evaluate(model, data);
  CHECK(result.accuracy > 0.08);
  CHECK(result.accuracy < 0.12);
}

TEST_CASE("evaluate is invariant in the thread count") {
  ModelConfig config;
  config.input_shape = {8};
  config.layers = {LayerSpec::fully_connected(6, Activation::Tanh),
                   LayerSpec::fully_connected(5, Activation::Softmax)};
  const Model model = build_model(config, FeedbackKind::None, FOptions{}, 2);
  Rng rng(8);
  LabeledDataset data;
  data.name = "noise";
  data.inputs = random_tensor(rng, {2000, 8});
  data.labels.resize(2000);
  for (auto& label : data.labels) label = static_cast<int>(rng.next_below(5));
  data.targets_onehot = one_hot(data.labels, 5);
  const EvalResult serial = evaluate(model, data, 1);
  const EvalResult threaded = evaluate(model, data, 4);
  CHECK(serial.accuracy == threaded.accuracy);
  CHECK(serial.mean_loss == threaded.mean_loss);
}

TEST_CASE("run_experiment with epochs 0 emits only the epoch-0 row and an init checkpoint") {
  const fs::path data = synthetic_mnist_dir(40, 20);
  ExperimentManifest manifest = tiny_manifest(data, Rule::Pepita);
  manifest.train.epochs = 0;
  const RunResult result = run_experiment(manifest, RunOverrides{});
  CHECK(result.metrics.size() == 1);
  CHECK(result.metrics[0].epoch == 0);

  const Checkpoint ckpt = load_checkpoint(result.checkpoint_path);
  const Model init = build_model(manifest.model, FeedbackKind::None,
                                 manifest.train.f_options(), manifest.train.master_seed);
  CHECK(bit_equal(ckpt.model.weights[0], init.weights[0]));
  CHECK(bit_equal(ckpt.model.weights[1], init.weights[1]));
  CHECK(bit_equal(ckpt.model.F, init.F));
}

TEST_CASE("run_experiment trains, persists metrics, and repeats bit-identically") {
  const fs::path data = synthetic_mnist_dir(60, 30);
  const ExperimentManifest manifest = tiny_manifest(data, Rule::Pepita);

  RunOverrides o1;
  o1.run_dir = temp_root() / "repeat_a";
  fs::remove_all(*o1.run_dir);
  RunOverrides o2;
  o2.run_dir = temp_root() / "repeat_b";
  fs::remove_all(*o2.run_dir);

  const RunResult r1 = run_experiment(manifest, o1);
  const RunResult r2 = run_experiment(manifest, o2);
  CHECK(r1.metrics.size() == manifest.train.epochs + 1);

  std::ifstream f1(r1.metrics_path), f2(r2.metrics_path);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  CHECK(!s1.str().empty());

  // Learning should beat chance on this easy synthetic task.
  CHECK(r1.final_test_accuracy > 0.2);
}

TEST_CASE("run_experiment works for every rule on the synthetic task") {
  const fs::path data = synthetic_mnist_dir(60, 30);
  for (const Rule rule : {Rule::PepitaVariant, Rule::Bp, Rule::Fa, Rule::Drtp}) {
    ExperimentManifest manifest = tiny_manifest(data, rule);
    manifest.name = std::string("tiny_") + to_string(rule);
    const RunResult result = run_experiment(manifest, RunOverrides{});
    CHECK(result.metrics.size() == 3);
    CHECK(result.final_test_accuracy >= 0.0);
  }
}

TEST_CASE("checkpoint round-trip preserves evaluation exactly") {
  const fs::path data = synthetic_mnist_dir(50, 25);
  ExperimentManifest manifest = tiny_manifest(data, Rule::Bp);
  manifest.name = "ckpt_roundtrip";
  const RunResult run = run_experiment(manifest, RunOverrides{});

  auto [train_set, test_set] = load_dataset_pair(manifest.dataset);
  const Checkpoint ckpt = load_checkpoint(run.checkpoint_path);
  const EvalResult eval = evaluate(ckpt.model, test_set);
  CHECK(eval.accuracy == run.final_test_accuracy);

  // Save/load again: bit-identical tensors.
  const fs::path copy = temp_root() / "copy.ckpt";
  save_checkpoint(copy, ckpt.model, ckpt.velocities, ckpt.rule, ckpt.master_seed);
  const Checkpoint again = load_checkpoint(copy);
  for (std::size_t l = 0; l < ckpt.model.weights.size(); ++l) {
    CHECK(bit_equal(ckpt.model.weights[l], again.model.weights[l]));
    CHECK(bit_equal(ckpt.velocities[l], again.velocities[l]));
  }
  CHECK(bit_equal(ckpt.model.F, again.model.F));
}

TEST_CASE("checkpoint loader rejects bad magic and foreign versions") {
  const fs::path path = temp_root() / "bad.ckpt";
  std::ofstream(path, std::ios::binary) << "NOTACKPTxxxxxxxxxxxxxxxx";
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}

TEST_CASE("train metrics track the batch statistics") {
  const fs::path data = synthetic_mnist_dir(40, 20);
  ExperimentManifest manifest = tiny_manifest(data, Rule::Bp);
  manifest.name = "metrics_check";
  manifest.train.epochs = 1;
  const RunResult result = run_experiment(manifest, RunOverrides{});
  REQUIRE(result.metrics.size() == 2);
  const MetricsRecord& rec = result.metrics[1];
  CHECK(rec.train_accuracy >= 0.0);
  CHECK(rec.train_accuracy <= 1.0);
  CHECK(rec.test_accuracy >= 0.0);
  CHECK(rec.test_accuracy <= 1.0);
  CHECK(rec.train_loss >= 0.0);
  REQUIRE(rec.weight_norms.size() == 2);
  CHECK(rec.weight_norms[0] > 0.0);
  REQUIRE(rec.alignment_angle_deg.has_value());
  CHECK(*rec.alignment_angle_deg >= 0.0);
  CHECK(*rec.alignment_angle_deg <= 180.0);
  CHECK(rec.wall_time_s == 0.0);  // exact-repro default
}
