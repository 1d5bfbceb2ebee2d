#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ckl/gnn.hpp"
#include "ckl/graph.hpp"

namespace ckl::experiment {

enum class Command { train_mask, adapt, fewshot, kernel, gen_synthetic };

std::string to_string(Command c);
/// ConfigError on an unknown command name.
Command parse_command(const std::string& s);

/// Every tunable of every command, flat. A config file is a JSON object
/// whose keys are a subset of these names; see docs/configuration.md.
struct ExperimentConfig {
  // run
  std::uint64_t seed = 0;
  std::string out = "ckl-out";
  std::size_t threads = 1;

  // data: "synthetic" or a directory in TU format
  std::string dataset = "synthetic";
  std::string dataset_name;
  std::string target_dataset = "synthetic";
  std::string target_name;
  std::string pos_motif = "triangle";
  std::string neg_motif = "star";
  std::size_t n_per_class = 100;
  std::size_t target_n_per_class = 50;
  std::size_t background_nodes = 20;
  double background_edge_prob = 0.05;
  double target_background_edge_prob = 0.20;
  double noise = 0.0;

  // model and pre-training
  std::size_t hidden = 128;
  std::size_t layers = 3;
  std::size_t pretrain_epochs = 100;
  double pretrain_lr = 0.001;

  // mask
  std::size_t mask_dim = 128;
  double temperature = 1.0;
  double mask_lr = 0.001;
  std::size_t mask_epochs = 100;
  std::size_t samples = 4;
  double head_bias = 0.0;
  double node_threshold = 0.5;
  double edge_threshold = 0.5;

  // kernel
  std::size_t wl_depth = 2;

  // few-shot
  std::size_t fs_num_graphs = 120;
  std::size_t fs_background_nodes = 15;
  double fs_background_edge_prob = 0.1;
  std::size_t heldout_task = 2;
  double inner_lr = 0.1;
  double outer_lr = 0.01;
  std::size_t inner_steps = 1;
  std::size_t shots = 1;
  std::size_t n_query = 10;
  std::size_t episodes_per_step = 4;
  std::size_t max_steps = 100;
  std::size_t eval_every = 10;
  std::size_t patience = 5;
  std::size_t eval_episodes = 8;
  std::size_t test_episodes = 10;
  std::size_t finetune_steps = 5;

  /// Names of every accepted key, in declaration order.
  static std::vector<std::string> keys();

  /// Applies the keys of a JSON object text. ConfigError listing every
  /// unknown or ill-typed key.
  void merge_json(const std::string& text, const std::string& origin = "<config>");
  /// Applies one `--key value` override. ConfigError on an unknown key or a
  /// value that does not parse as the key's type.
  void set(const std::string& key, const std::string& value);
  /// Resolved config as a pretty JSON object with every key.
  std::string to_json() const;
  /// FNV-1a of the resolved config with `out` and `threads` removed (they do
  /// not affect results), as 16 hex digits.
  std::string hash() const;
  /// ConfigError listing every offending key for `cmd`.
  void validate(Command cmd) const;
};

/// ExperimentConfig from a JSON file plus `--key value` overrides applied in order.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

struct PretrainConfig {
  std::size_t hidden = 128;
  std::size_t layers = 3;
  std::size_t epochs = 100;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  gnn::GraphClassifier model;      ///< best-train-loss checkpoint
  std::vector<double> loss_trace;  ///< mean loss of the parameters entering each epoch, plus the final ones
  std::size_t best_epoch = 0;
  double train_accuracy = 0.0;
};

/// Full-batch Adam on the mean cross-entropy. Deterministic given the seed;
/// TrainingError on a non-finite loss.
PretrainResult pretrain_classifier(const Dataset& ds, const PretrainConfig& cfg);

struct MetricRow {
  std::string metric;
  std::size_t step = 0;
  double value = 0.0;
};

struct MetricsRecord {
  std::string run_id;
  Command command = Command::train_mask;
  std::string config_hash;
  std::vector<MetricRow> rows;           ///< traces and scalars, in emission order
  std::map<std::string, double> finals;  ///< final scalars

  void trace(const std::string& metric, const std::vector<double>& values);
  void scalar(const std::string& metric, double value);
};

/// Runs `cmd`, writing under cfg.out: config.json, metrics.csv, result.json
/// and command-specific artifacts. Errors from modules are rethrown with the
/// command name prepended.
MetricsRecord run_command(Command cmd, const ExperimentConfig& cfg);

/// Source dataset described by the config (generated or loaded).
Dataset source_dataset(const ExperimentConfig& cfg);
/// Target dataset: same motifs, target density, independent seed stream.
Dataset target_dataset(const ExperimentConfig& cfg);

}  // namespace ckl::experiment
