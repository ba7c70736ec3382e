// Copyright 2026 The eslsnn Authors
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

// Command-line surface of the sparse SNN training engine:
//   train     train a model from a config file, write checkpoint + metrics
//   eval      top-1 / per-class accuracy of a checkpoint on a dataset split
//   sweep     train over a list of epsilon values and seeds, emit a CSV
//   energy    synaptic-operation counts and energy estimates of a checkpoint
//   gen-data  generate the synthetic event-stream dataset
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eslsnn/checkpoint.hpp"
#include "eslsnn/config.hpp"
#include "eslsnn/datasets.hpp"
#include "eslsnn/energy.hpp"
#include "eslsnn/trainer.hpp"

namespace {

using namespace eslsnn;

std::string data_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ESLSNN_DATA_DIR")) return env;
  throw std::runtime_error(
      "no dataset root: pass --data-dir or set ESLSNN_DATA_DIR");
}

ImageDataset load_mnist_split(const std::string& root, const std::string& split) {
  const std::string prefix = split == "train" ? "train" : "t10k";
  return load_mnist_idx(root + "/" + prefix + "-images-idx3-ubyte",
                        root + "/" + prefix + "-labels-idx1-ubyte");
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::runtime_error("empty list: " + csv);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& data_dir, const std::string& events_path,
              long long seed_override) {
  TrainingConfig cfg = load_config(config_path);
  if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);

  ImageDataset images;
  EventDataset events;
  DataView data;
  if (!events_path.empty()) {
    events = load_event_dataset(events_path);
    cfg.in_c = events.c;
    cfg.in_h = events.h;
    cfg.in_w = events.w;
    data.events = &events;
  } else {
    images = load_mnist_split(data_root(data_dir), "train");
    cfg.in_c = 1;
    cfg.in_h = images.height;
    cfg.in_w = images.width;
    data.images = &images;
  }

  std::filesystem::create_directories(out_dir);
  TrainHooks hooks;
  hooks.on_metrics = [](const MetricsRecord& rec, SnnModel&) {
    std::printf("iter %llu epoch %u loss %.4f val %.4f (%.1fs)\n",
                static_cast<unsigned long long>(rec.iteration), rec.epoch,
                rec.train_loss, rec.val_accuracy, rec.seconds);
    std::fflush(stdout);
  };
  TrainResult result = train(cfg, data, hooks);
  save_checkpoint(result.checkpoint, out_dir + "/checkpoint.eslsnn");
  write_text(out_dir + "/metrics.csv", metrics_to_csv(result.metrics));
  std::printf("best val accuracy %.4f (epoch %u)\n",
              result.checkpoint.best_val_accuracy, result.checkpoint.epoch);
  std::printf("wrote %s/checkpoint.eslsnn and %s/metrics.csv\n", out_dir.c_str(),
              out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& split,
             const std::string& data_dir, const std::string& events_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  ImageDataset images;
  EventDataset events;
  DataView data;
  if (!events_path.empty()) {
    events = load_event_dataset(events_path);
    data.events = &events;
  } else {
    images = load_mnist_split(data_root(data_dir), split);
    data.images = &images;
  }
  const EvalResult res = evaluate(ckpt, data);
  std::printf("accuracy: %.4f\n", res.accuracy);
  for (std::size_t c = 0; c < res.per_class_accuracy.size(); ++c)
    std::printf("class %zu accuracy: %.4f\n", c, res.per_class_accuracy[c]);
  std::printf("total connections: %zu\n", res.ops.total_connections);
  std::printf("total ops/timestep: %zu\n", res.ops.total_ops_per_timestep);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& eps_csv,
              std::uint32_t seeds, const std::string& out_dir,
              const std::string& data_dir, long long seed_override) {
  TrainingConfig cfg = load_config(config_path);
  if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
  const std::vector<double> epsilons = parse_double_list(eps_csv);

  const std::string root = data_root(data_dir);
  ImageDataset train_images = load_mnist_split(root, "train");
  ImageDataset test_images = load_mnist_split(root, "test");
  cfg.in_c = 1;
  cfg.in_h = train_images.height;
  cfg.in_w = train_images.width;
  DataView train_data{&train_images, nullptr};
  DataView test_data{&test_images, nullptr};

  const auto rows = sweep_epsilon(cfg, epsilons, seeds, train_data, test_data);
  std::filesystem::create_directories(out_dir);
  write_text(out_dir + "/sweep.csv", sweep_to_csv(rows));
  for (const auto& r : rows)
    std::printf("epsilon %.4g seed %llu density %.4f test_acc %.4f\n", r.epsilon,
                static_cast<unsigned long long>(r.seed), r.density, r.test_acc);
  std::printf("wrote %s/sweep.csv\n", out_dir.c_str());
  return 0;
}

int cmd_energy(const std::string& ckpt_path, double j_gpu, double j_neuro) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const OpCounts ops = count_ops(ckpt);
  EnergyModel model;
  if (j_gpu > 0.0) model.joules_per_op_gpu = j_gpu;
  if (j_neuro > 0.0) model.joules_per_op_neuromorphic = j_neuro;
  for (const auto& l : ops.per_layer)
    std::printf("layer %s: connections %zu, ops/timestep %zu\n", l.id.c_str(),
                l.connections, l.ops_per_timestep);
  std::printf("total connections: %zu\n", ops.total_connections);
  std::printf("total ops/timestep: %zu\n", ops.total_ops_per_timestep);
  const auto [gpu, neuro] = estimate_energy(ops.total_ops_per_timestep, model);
  std::printf("energy on GPU: %.3e J\n", gpu);
  std::printf("energy on neuromorphic: %.3e J\n", neuro);
  return 0;
}

int cmd_gen_data(const std::string& kind, const std::string& out_path,
                 std::uint32_t n_per_class, std::uint32_t classes, std::uint32_t t,
                 std::uint32_t h, std::uint32_t w, std::uint64_t seed,
                 double noise) {
  if (kind != "synthetic-events")
    throw std::runtime_error("unknown --kind: " + kind +
                             " (supported: synthetic-events)");
  const EventDataset ds = synthetic_events(n_per_class, classes, t, h, w, seed, noise);
  save_event_dataset(ds, out_path);
  std::printf("wrote %zu samples (%u classes, T=%u, %ux%u) to %s\n", ds.size(),
              classes, t, h, w, out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eslsnn: sparse-from-scratch spiking neural network training"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", data_dir, events_path, ckpt_path;
  std::string split = "test", eps_csv, kind = "synthetic-events";
  long long seed_override = -1;
  std::uint32_t seeds = 1, n_per_class = 100, classes = 2, t = 4, h = 8, w = 8;
  std::uint64_t gen_seed = 1;
  double noise = 0.02, j_gpu = 0.0, j_neuro = 0.0;

  auto* tr = app.add_subcommand("train", "train a model from a config file");
  tr->add_option("--config", config_path, "config file")->required();
  tr->add_option("--out", out_dir, "output directory");
  tr->add_option("--data-dir", data_dir, "MNIST root (default $ESLSNN_DATA_DIR)");
  tr->add_option("--events", events_path, "event dataset file instead of MNIST");
  tr->add_option("--seed", seed_override, "override the config seed");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  ev->add_option("--split", split, "train|test")
      ->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--data-dir", data_dir, "MNIST root (default $ESLSNN_DATA_DIR)");
  ev->add_option("--events", events_path, "event dataset file instead of MNIST");

  auto* sw = app.add_subcommand("sweep", "train across epsilon values");
  sw->add_option("--config", config_path, "config file")->required();
  sw->add_option("--epsilon", eps_csv, "comma-separated epsilon list")->required();
  sw->add_option("--seeds", seeds, "seeds per epsilon");
  sw->add_option("--out", out_dir, "output directory");
  sw->add_option("--data-dir", data_dir, "MNIST root (default $ESLSNN_DATA_DIR)");
  sw->add_option("--seed", seed_override, "override the config base seed");

  auto* en = app.add_subcommand("energy", "op counts and energy of a checkpoint");
  en->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  en->add_option("--joules-per-op-gpu", j_gpu, "override GPU energy per op");
  en->add_option("--joules-per-op-neuromorphic", j_neuro,
                 "override neuromorphic energy per op");

  auto* gd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gd->add_option("--kind", kind, "dataset kind (synthetic-events)");
  gd->add_option("--out", out_dir, "output file")->required();
  gd->add_option("--n-per-class", n_per_class, "samples per class");
  gd->add_option("--classes", classes, "number of classes");
  gd->add_option("--timesteps", t, "timesteps per sample");
  gd->add_option("--height", h, "frame height");
  gd->add_option("--width", w, "frame width");
  gd->add_option("--seed", gen_seed, "generator seed");
  gd->add_option("--noise", noise, "flip probability per entry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (tr->parsed())
      return cmd_train(config_path, out_dir, data_dir, events_path, seed_override);
    if (ev->parsed()) return cmd_eval(ckpt_path, split, data_dir, events_path);
    if (sw->parsed())
      return cmd_sweep(config_path, eps_csv, seeds, out_dir, data_dir, seed_override);
    if (en->parsed()) return cmd_energy(ckpt_path, j_gpu, j_neuro);
    if (gd->parsed())
      return cmd_gen_data(kind, out_dir, n_per_class, classes, t, h, w, gen_seed, noise);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
