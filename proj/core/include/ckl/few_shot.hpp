#pragma once

// Bi-level few-shot learning over core subgraphs.
//
// The inner loop adapts the mask parameters Theta on a task's support set
// using the unsupervised core-subgraph objective. The outer loop updates the
// encoder and classifier Phi with the supervised cross-entropy of the masked
// model on the support set, treating the adapted Theta as a constant
// (first-order truncation).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ckl/autodiff.hpp"
#include "ckl/gnn.hpp"
#include "ckl/graph.hpp"
#include "ckl/mask.hpp"

namespace ckl::fewshot {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Graphs with one binary label per task.
struct TaskData {
  std::vector<Graph> graphs;
  std::vector<std::string> task_names;
  std::vector<std::vector<int>> labels;  ///< labels[task][graph]

  std::size_t num_tasks() const { return task_names.size(); }
  void validate() const;
};

/// Multi-property planted-motif data: each graph receives every motif of
/// `motifs` independently with probability `motif_prob` on top of an
/// Erdos-Renyi background; task t asks "does the graph contain motifs[t]".
struct TaskSpec {
  std::vector<MotifKind> motifs{MotifKind::triangle, MotifKind::house, MotifKind::star};
  std::size_t num_graphs = 200;
  std::size_t background_nodes = 15;
  double background_edge_prob = 0.1;
  double motif_prob = 0.5;
  double noise = 0.0;
};

TaskData generate_task_data(const TaskSpec& spec, std::uint64_t seed);

struct Episode {
  std::size_t task = 0;
  std::vector<std::size_t> support;  ///< graph indices, K positives then K negatives
  std::vector<int> support_labels;
  std::vector<std::size_t> query;  ///< ceil(n/2) positives then floor(n/2) negatives
  std::vector<int> query_labels;
};

/// Uniform sampling without replacement per class. DomainError naming the
/// class when it has fewer than shots + its query share of graphs.
Episode sample_episode(const TaskData& data, std::size_t task, std::size_t shots, std::size_t n_query,
                       std::uint64_t seed);

/// T plain gradient steps p <- p - lr * dL/dp on `params`, with the loss
/// re-traced from the current values at every step. Throws TrainingError on a
/// non-finite loss or gradient.
using LossFn = std::function<Var(Tape&)>;
void gradient_descent(const std::vector<Tensor*>& params, const LossFn& loss, double lr, std::size_t steps);

struct MetaConfig {
  double inner_lr = 0.1;   ///< alpha
  double outer_lr = 0.01;  ///< beta
  std::size_t inner_steps = 1;  ///< T
  std::size_t samples = 2;      ///< Monte-Carlo samples in the inner objective
  std::size_t shots = 1;        ///< K per class
  std::size_t n_query = 10;
  std::size_t episodes_per_step = 4;
  std::size_t max_steps = 100;
  std::size_t eval_every = 10;
  std::size_t patience = 5;
  std::size_t eval_episodes = 8;
  std::size_t finetune_steps = 5;  ///< supervised steps on Phi at meta-test
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean ckl objective of Theta over the support graphs, Phi frozen.
Var inner_loss(Tape& tape, const TaskData& data, const Episode& ep, const gnn::GraphClassifier& phi,
               const mask::MaskParams& theta, std::size_t samples, std::uint64_t seed);

/// Theta* after T gradient steps of inner_loss with step alpha. Phi fixed.
mask::MaskParams inner_update(const mask::MaskParams& theta, const gnn::GraphClassifier& phi, const TaskData& data,
                              const Episode& ep, double alpha, std::size_t steps, std::size_t samples,
                              std::uint64_t seed);

/// Deterministic masks used outside the inner loss: the relaxation at u = 0.5,
/// m = sigmoid(logit(p) / t).
gnn::Masks expected_masks(Tape& tape, const Graph& graph, const gnn::EncoderParams& enc,
                          const mask::MaskParams& theta);

/// Mean cross-entropy of f_{Theta,Phi} on the listed graphs.
Var supervised_loss(Tape& tape, const TaskData& data, const std::vector<std::size_t>& graphs,
                    const std::vector<int>& labels, const gnn::GraphClassifier& phi, const mask::MaskParams& theta);

/// P(class 1) of f_{Theta,Phi} for each listed graph.
std::vector<double> positive_scores(const TaskData& data, const std::vector<std::size_t>& graphs,
                                    const gnn::GraphClassifier& phi, const mask::MaskParams& theta);

struct OuterStepResult {
  double meta_loss = 0.0;   ///< mean support loss after adaptation
  double query_loss = 0.0;  ///< mean query loss after adaptation (reported only)
  double query_accuracy = 0.0;
};

/// One outer update over a batch of episodes. Phi moves by -beta times the
/// mean first-order gradient; Theta becomes the mean of the adapted Theta*.
/// DomainError on an empty batch.
OuterStepResult outer_step(gnn::GraphClassifier& phi, mask::MaskParams& theta, const TaskData& data,
                           const std::vector<Episode>& batch, const MetaConfig& cfg, std::uint64_t seed);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. DomainError unless both classes are present.
double evaluate_roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct TaskEvaluation {
  double mean_auc = 0.0;
  double mean_accuracy = 0.0;
  double mean_query_loss = 0.0;
  std::vector<double> episode_auc;
};

/// Meta-test on `task`: per episode, fine-tune a copy of Phi on the support
/// set for finetune_steps steps of beta, adapt Theta for T inner steps, and
/// score the query set.
TaskEvaluation evaluate_task(const TaskData& data, std::size_t task, const gnn::GraphClassifier& phi,
                             const mask::MaskParams& theta, const MetaConfig& cfg, std::size_t episodes,
                             std::uint64_t seed);

struct HistoryRow {
  std::size_t step = 0;
  double meta_loss = 0.0;
  double val_meta_loss = 0.0;
  double val_query_auc = 0.0;
  std::vector<double> task_auc;  ///< one per validation task
};

struct MetaTrainResult {
  gnn::GraphClassifier phi;  ///< best validation checkpoint
  mask::MaskParams theta;
  std::size_t best_step = 0;
  double initial_meta_loss = 0.0;
  double best_meta_loss = 0.0;  ///< training meta-loss at the best checkpoint
  std::vector<HistoryRow> history;
};

/// Outer steps over episodes of `train_tasks`, validated every eval_every
/// steps (and at step 0) on `val_tasks`. Stops after `patience` evaluations
/// without improvement of the validation meta-loss, or at max_steps.
MetaTrainResult meta_train(const TaskData& data, const std::vector<std::size_t>& train_tasks,
                           const std::vector<std::size_t>& val_tasks, gnn::GraphClassifier phi,
                           mask::MaskParams theta, const MetaConfig& cfg);

/// CSV: step,meta_loss,val_meta_loss,val_query_auc,task_<t>_auc...
void write_history_csv(std::ostream& out, const MetaTrainResult& result, const std::vector<std::size_t>& val_tasks);

}  // namespace ckl::fewshot
