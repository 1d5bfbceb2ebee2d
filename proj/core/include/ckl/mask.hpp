#pragma once

// Core subgraph learning.
//
// A mask network reads frozen GIN node embeddings and scores every node and
// edge. Scores become selection probabilities, probabilities become relaxed
// Bernoulli masks through logistic noise, and the masked graph is pushed
// through the frozen classifier. Training minimizes the cross-entropy between
// the classifier's prediction on the full graph and on K masked samples.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ckl/autodiff.hpp"
#include "ckl/gnn.hpp"
#include "ckl/graph.hpp"
#include "ckl/random.hpp"

namespace ckl::mask {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Selection probabilities are clipped to [kProbEps, 1 - kProbEps].
inline constexpr double kProbEps = 1e-6;

struct MaskParams {
  gnn::Mlp node_embed;    ///< encoder dim -> mask dim
  gnn::Mlp edge_embed;    ///< encoder dim -> mask dim
  gnn::Linear node_head;  ///< mask dim -> 1
  gnn::Linear edge_head;  ///< 3 * mask dim -> 1
  double temperature = 1.0;

  /// Glorot weights; both heads start with bias `head_bias`.
  static MaskParams init(std::size_t encoder_dim, std::size_t mask_dim, double temperature, Rng& rng,
                         double head_bias = 0.0);

  std::size_t encoder_dim() const { return node_embed.in_dim(); }
  std::size_t mask_dim() const { return node_embed.out_dim(); }
  void validate() const;
};

std::vector<Tensor*> parameters(MaskParams& mp);
gnn::Checkpoint to_checkpoint(const MaskParams& mp);
MaskParams mask_from_checkpoint(const gnn::Checkpoint& ckpt);

struct Embeddings {
  Var node;  ///< n x mask_dim
  Var edge;  ///< |E| x mask_dim
};

/// Node embeddings E_n = MLP(H) and edge embeddings E_e = MLP(E) where H is
/// the unmasked encoder output and the edge feature E(i,j) is the mean of
/// H_i and H_j.
Embeddings embed_nodes_edges(Tape& tape, const Graph& graph, const gnn::EncoderParams& enc,
                             const MaskParams& mp);

/// p_v = sigmoid(node_head(E_n)), clipped. n x 1.
Var node_probability(Tape& tape, Var node_embedding, const MaskParams& mp);

/// p_e = sigmoid(edge_head([E_n_i + E_n_j, |E_n_i - E_n_j|, E_e_ij])), clipped.
/// The fusion is symmetric in i and j. |E| x 1.
Var edge_probability(Tape& tape, const Graph& graph, const Embeddings& emb, const MaskParams& mp);

/// m = sigmoid((1/t) log(p / (1-p)) + log(u / (1-u))). The temperature
/// scales the log-odds term only. `u` is a constant of p's shape with every
/// entry strictly inside (0,1); DomainError otherwise.
Var sample_node_mask(Var p, double t, const Tensor& u);

/// Edge masks: the relaxation above applied to edge_probability.
Var edge_mask(Tape& tape, const Graph& graph, const Embeddings& emb, const MaskParams& mp, const Tensor& u);

/// Frozen logistic-noise draws for one masked sample.
struct MaskNoise {
  Tensor node;  ///< n x 1
  Tensor edge;  ///< |E| x 1
};

/// K independent noise draws for `graph`, a pure function of `seed`.
std::vector<MaskNoise> draw_noise(const Graph& graph, std::size_t samples, std::uint64_t seed);

/// One sampled mask pair together with the noise that produced it.
struct MaskSample {
  Tensor node_mask;
  Tensor edge_mask;
  MaskNoise noise;
};

MaskSample sample_masks(const Graph& graph, const gnn::EncoderParams& enc, const MaskParams& mp,
                        const MaskNoise& noise);

/// Monte-Carlo objective
///   -(1/K) sum_k sum_c P(c | G) log P(c | G_sub^k)
/// with P(. | G) the model's (constant) prediction on the unmasked graph and
/// G_sub^k the graph under the k-th sampled masks. One sample per entry of
/// `noise`; DomainError when `noise` is empty.
Var ckl_objective(Tape& tape, const Graph& graph, const gnn::GraphClassifier& model, const MaskParams& mp,
                  std::span<const MaskNoise> noise);

/// The same objective with every mask pinned to 1.
Var ckl_objective_pinned(Tape& tape, const Graph& graph, const gnn::GraphClassifier& model);

struct MaskTrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  std::size_t samples = 4;
  std::uint64_t seed = 0;
};

struct MaskTrainResult {
  MaskParams params;               ///< best-of-epoch checkpoint
  std::vector<double> loss_trace;  ///< mean objective of the parameters entering each epoch
  std::vector<double> best_trace;  ///< running minimum of loss_trace
  std::size_t best_epoch = 0;
};

/// Full-batch Adam on the mean objective over `ds`. Noise for graph i is
/// drawn once from derive_seed(seed, {i}). Model parameters are not updated.
/// Throws TrainingError on a non-finite loss or gradient.
MaskTrainResult train_mask(const Dataset& ds, const gnn::GraphClassifier& model, MaskParams init,
                           const MaskTrainConfig& cfg);

/// Mean objective over `ds` with per-graph noise derived from `seed`.
double mean_objective(const Dataset& ds, const gnn::GraphClassifier& model, const MaskParams& mp,
                      std::size_t samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Discrete core subgraphs
// ---------------------------------------------------------------------------

struct CoreSubgraph {
  std::vector<std::size_t> nodes;  ///< kept nodes, ascending
  std::vector<Edge> edges;         ///< kept edges (original node ids)
  double node_threshold = 0.5;
  double edge_threshold = 0.5;

  bool empty() const noexcept { return nodes.empty(); }
  /// Renumbered subgraph of `graph` holding exactly the kept nodes and edges.
  Graph to_graph(const Graph& graph) const;
  /// Throws DomainError when a kept edge has a dropped endpoint or when the
  /// kept sets are not drawn from `graph`.
  void validate(const Graph& graph) const;
};

struct SelectionProbabilities {
  std::vector<double> node;
  std::vector<double> edge;
};

/// Noise-free p_v and p_e.
SelectionProbabilities selection_probabilities(const Graph& graph, const gnn::EncoderParams& enc,
                                               const MaskParams& mp);

/// Keeps node v iff p_v >= node_threshold and edge e iff p_e >= edge_threshold
/// and both endpoints are kept.
CoreSubgraph threshold_core(const Graph& graph, const SelectionProbabilities& probs, double node_threshold,
                            double edge_threshold);

CoreSubgraph extract_core_subgraph(const Graph& graph, const gnn::EncoderParams& enc, const MaskParams& mp,
                                   double node_threshold = 0.5, double edge_threshold = 0.5);

struct Fidelity {
  bool agree = false;
  std::size_t full_pred = 0;
  std::size_t core_pred = 0;
  bool empty_core = false;
};

/// Agreement of the model's argmax on the discretized core with its argmax
/// on the full graph. An empty core never agrees and is flagged.
Fidelity fidelity(const Graph& graph, const CoreSubgraph& core, const gnn::GraphClassifier& model);

/// |a n b| / |a u b| over node sets; 1 when both are empty.
double jaccard(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

/// Edge-list text: a "kept_nodes <k> <ids...>" header, then one "u v" line
/// per kept edge, all 0-based ids of the original graph.
void write_core_subgraph(std::ostream& out, const CoreSubgraph& core);
CoreSubgraph read_core_subgraph(std::istream& in);

}  // namespace ckl::mask
