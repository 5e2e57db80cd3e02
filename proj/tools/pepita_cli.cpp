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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pepita/checkpoint.hpp"
#include "pepita/csvio.hpp"
#include "pepita/errors.hpp"
#include "pepita/fetch.hpp"
#include "pepita/lindyn.hpp"
#include "pepita/manifest.hpp"
#include "pepita/trainer.hpp"

namespace {

using namespace pepita;

std::optional<std::filesystem::path> env_data_dir() {
  if (const char* dir = std::getenv("PEPITA_DATA_DIR")) {
    return std::filesystem::path(dir);
  }
  return std::nullopt;
}

int cmd_train(const std::string& manifest_path, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> epochs, std::optional<std::string> out,
              std::optional<std::string> run_dir, std::optional<std::string> data_dir,
              std::size_t threads, bool exact_repro) {
  const ExperimentManifest manifest = parse_manifest(manifest_path);
  RunOverrides overrides;
  overrides.seed = seed;
  overrides.epochs = epochs;
  if (out) overrides.output_dir = *out;
  if (run_dir) overrides.run_dir = *run_dir;
  if (data_dir) {
    overrides.data_dir = *data_dir;
  } else if (auto env = env_data_dir()) {
    overrides.data_dir = *env / manifest.dataset.id;
  }
  overrides.threads = threads;
  overrides.exact_repro = exact_repro;
  const RunResult result = run_experiment(manifest, overrides);
  std::cout << "run_dir: " << result.run_dir.string() << "\n"
            << "final_test_accuracy: " << result.final_test_accuracy << "\n"
            << "best_test_accuracy: " << result.best_test_accuracy << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_id,
             const std::string& dataset_dir, std::optional<std::string> data_dir,
             bool train_split, std::size_t threads) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  DatasetRef ref;
  ref.id = dataset_id;
  if (!dataset_dir.empty()) {
    ref.dir = dataset_dir;
  } else if (data_dir) {
    ref.dir = std::filesystem::path(*data_dir) / dataset_id;
  } else if (auto env = env_data_dir()) {
    ref.dir = *env / dataset_id;
  } else {
    ref.dir = std::filesystem::path("data") / dataset_id;
  }
  auto [train_set, test_set] = load_dataset_pair(ref);
  const LabeledDataset& data = train_split ? train_set : test_set;
  if (ckpt.model.num_classes() != data.num_classes()) {
    throw ShapeError("checkpoint model emits " + std::to_string(ckpt.model.num_classes()) +
                     " classes but dataset '" + dataset_id + "' has " +
                     std::to_string(data.num_classes()));
  }
  const EvalResult result = evaluate(ckpt.model, data, threads);
  std::cout << "accuracy: " << format_double(result.accuracy) << "\n"
            << "mean_loss: " << format_double(result.mean_loss) << "\n";
  return 0;
}

int cmd_verify_linear(std::size_t seeds, const std::vector<std::size_t>& dims,
                      double eta, std::size_t phase1_steps, std::size_t phase2_steps,
                      const std::string& out, double min_phase1, double min_phase2) {
  lindyn::SweepOptions options;
  options.seeds = seeds;
  if (dims.size() != 3) {
    std::cerr << "error: --dims expects input,hidden,out\n";
    return 2;
  }
  options.input_dim = dims[0];
  options.hidden_dim = dims[1];
  options.out_dim = dims[2];
  options.eta = eta;
  options.phase1_steps = phase1_steps;
  options.phase2_steps = phase2_steps;

  const lindyn::SweepReport report = lindyn::sweep(options);
  lindyn::write_sweep_csv(report, options, out);
  std::cout << "report: " << out << "\n"
            << "runs: " << report.rows.size() << "\n"
            << "norm_A_grew: " << report.grew << "\n";
  if (phase1_steps == 0 || phase2_steps == 0) {
    std::cout << "conclusions: not evaluated (zero steps requested)\n";
    return 3;
  }
  if (report.grew == 0) {
    std::cout << "conclusions: not evaluated (no run satisfied the growth "
                 "precondition)\n";
    return 3;
  }
  const double f1 = report.frac_tr_fe_negative();
  const double f2 = report.frac_fwa_decreasing();
  std::cout << "frac_tr_fe_negative: " << format_double(f1) << "\n"
            << "frac_tr_fwa_decreasing: " << format_double(f2) << "\n";
  const bool ok = f1 >= min_phase1 && f2 >= min_phase2;
  std::cout << (ok ? "verdict: pass" : "verdict: fail") << "\n";
  return ok ? 0 : 1;
}

int cmd_fetch_data(const std::string& dataset_id, const std::string& dir,
                   const std::string& base_url) {
  const auto plan = dataset_fetch_plan(dataset_id);
  const std::size_t downloaded = fetch_all(plan, dir, base_url);
  std::cout << "downloaded " << downloaded << " file(s) into " << dir << "\n";
  return 0;
}

int cmd_export_embeddings(const std::string& checkpoint_path, const std::string& dataset_id,
                          const std::string& dataset_dir, std::size_t layer,
                          const std::string& out, bool train_split) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  DatasetRef ref;
  ref.id = dataset_id;
  ref.dir = !dataset_dir.empty()
                ? std::filesystem::path(dataset_dir)
                : (env_data_dir() ? *env_data_dir() / dataset_id
                                  : std::filesystem::path("data") / dataset_id);
  auto [train_set, test_set] = load_dataset_pair(ref);
  export_embeddings(ckpt.model, train_split ? train_set : test_set, layer, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PEPITA training toolkit: forward-only learning with BP/FA/DRTP baselines"};
  app.require_subcommand(1);

  // train
  std::string manifest_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::string> out_dir, run_dir, data_dir;
  std::size_t threads = 1;
  bool no_exact_repro = false;
  auto* train = app.add_subcommand("train", "run an experiment from a manifest");
  train->add_option("--manifest", manifest_path, "experiment manifest (JSON)")->required();
  train->add_option("--seed", seed, "override the manifest master seed");
  train->add_option("--epochs", epochs, "override the number of epochs");
  train->add_option("--out", out_dir, "output root (default: manifest output_dir)");
  train->add_option("--run-dir", run_dir, "exact run directory (default: <out>/<name>-<timestamp>)");
  train->add_option("--data-dir", data_dir, "dataset directory override");
  train->add_option("--threads", threads, "evaluation threads (default 1)");
  train->add_flag("--no-exact-repro", no_exact_repro,
                  "record real wall time per epoch instead of zeros");

  // eval
  std::string ckpt_path, ds_id = "mnist", ds_dir;
  bool use_train_split = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--dataset", ds_id, "dataset id (mnist|cifar10|cifar100|cifar100_coarse)");
  eval->add_option("--dataset-dir", ds_dir, "dataset directory");
  eval->add_option("--data-dir", data_dir, "data root containing <dataset-id>/");
  eval->add_flag("--train-split", use_train_split, "evaluate the training split");
  eval->add_option("--threads", threads, "evaluation threads");

  // verify-linear
  std::size_t seeds = 100, phase1_steps = 2000, phase2_steps = 500;
  std::vector<std::size_t> dims{10, 20, 5};
  double eta = 1e-3, min_phase1 = 0.95, min_phase2 = 1.0;
  std::string report_out = "lindyn_report.csv";
  auto* verify = app.add_subcommand("verify-linear",
                                    "numerically check the linear-network antialignment result");
  verify->add_option("--seeds", seeds, "number of random instances (default 100)");
  verify->add_option("--dims", dims, "input,hidden,out dimensions")->expected(3);
  verify->add_option("--eta", eta, "learning rate (default 1e-3)");
  verify->add_option("--phase1-steps", phase1_steps, "steps with W frozen");
  verify->add_option("--phase2-steps", phase2_steps, "steps with A frozen");
  verify->add_option("--out", report_out, "report CSV path");
  verify->add_option("--min-phase1", min_phase1,
                     "required fraction of grown runs ending with tr(FE) < 0");
  verify->add_option("--min-phase2", min_phase2,
                     "required fraction of grown runs with tr(FWA) strictly decreasing");

  // fetch-data
  std::string fetch_id, fetch_dir, base_url;
  auto* fetch = app.add_subcommand("fetch-data", "download and verify a dataset");
  fetch->add_option("--dataset", fetch_id, "dataset id")->required();
  fetch->add_option("--dir", fetch_dir, "target directory")->required();
  fetch->add_option("--base-url", base_url, "mirror origin, e.g. https://host[:port]");

  // export-embeddings
  std::size_t layer = 1;
  std::string emb_out = "embeddings.csv";
  auto* embed = app.add_subcommand("export-embeddings",
                                   "write hidden-layer activations plus labels as CSV");
  embed->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  embed->add_option("--dataset", ds_id, "dataset id");
  embed->add_option("--dataset-dir", ds_dir, "dataset directory");
  embed->add_option("--layer", layer, "1-based layer index (default 1 = first hidden)");
  embed->add_option("--out", emb_out, "output CSV path");
  embed->add_flag("--train-split", use_train_split, "use the training split");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return cmd_train(manifest_path, seed, epochs, out_dir, run_dir, data_dir, threads,
                       !no_exact_repro);
    }
    if (eval->parsed()) {
      return cmd_eval(ckpt_path, ds_id, ds_dir, data_dir, use_train_split, threads);
    }
    if (verify->parsed()) {
      return cmd_verify_linear(seeds, dims, eta, phase1_steps, phase2_steps, report_out,
                               min_phase1, min_phase2);
    }
    if (fetch->parsed()) {
      return cmd_fetch_data(fetch_id, fetch_dir, base_url);
    }
    if (embed->parsed()) {
      return cmd_export_embeddings(ckpt_path, ds_id, ds_dir, layer, emb_out, use_train_split);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
