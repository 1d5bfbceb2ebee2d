#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ckl/autodiff.hpp"
#include "ckl/graph.hpp"
#include "ckl/random.hpp"

namespace ckl::gnn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Affine map x -> x W + b with W [in x out] and b [1 x out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear glorot(std::size_t in, std::size_t out, Rng& rng);
  static Linear identity(std::size_t n);
  static Linear zeros(std::size_t in, std::size_t out);

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
};

/// Stack of Linear layers with ReLU between consecutive layers. When
/// `relu_output` is set a ReLU also follows the last layer.
struct Mlp {
  std::vector<Linear> layers;
  bool relu_output = false;

  /// Two-layer MLP in -> hidden -> out.
  static Mlp two_layer(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng,
                       bool relu_output = false);
  static Mlp identity(std::size_t n, std::size_t depth = 2, bool relu_output = false);

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
};

struct GinLayer {
  Mlp mlp;
  double epsilon = 0.0;
};

/// GIN encoder parameters: K layers of sum aggregation followed by an MLP.
struct EncoderParams {
  std::vector<GinLayer> layers;

  /// GIN-0 with `num_layers` layers, each a two-layer MLP with ReLU output.
  static EncoderParams init(std::size_t input_dim, std::size_t hidden, std::size_t num_layers, Rng& rng);

  std::size_t input_dim() const { return layers.front().mlp.in_dim(); }
  std::size_t output_dim() const { return layers.back().mlp.out_dim(); }
  /// Throws ShapeError when layer dims do not chain or K = 0.
  void validate() const;
};

/// MLP mapping a graph embedding to C logits.
struct ClassifierParams {
  Mlp mlp;

  static ClassifierParams init(std::size_t embedding_dim, std::size_t num_classes, Rng& rng);
  std::size_t num_classes() const { return mlp.out_dim(); }
};

/// Encoder + classifier pair.
struct GraphClassifier {
  EncoderParams encoder;
  ClassifierParams classifier;

  static GraphClassifier init(std::size_t input_dim, std::size_t hidden, std::size_t num_layers,
                              std::size_t num_classes, Rng& rng);
};

/// Soft masks over a graph: node mask [n x 1] and edge mask [|E| x 1] with
/// entries in [0,1]. An absent mask behaves as all ones.
struct Masks {
  std::optional<Var> node;
  std::optional<Var> edge;
};

Var linear_forward(Tape& tape, const Linear& layer, Var x);
Var mlp_forward(Tape& tape, const Mlp& mlp, Var x);

/// h'_v = MLP((1 + eps) m_v h_v + sum_{u in N(v)} m_e(u,v) m_u h_u).
Var gin_layer_forward(Tape& tape, Var h, const Graph& graph, const GinLayer& layer,
                      const Masks& masks = {});

/// Node embeddings after every GIN layer, masks applied at each layer.
Var encode_nodes(Tape& tape, const Graph& graph, const EncoderParams& enc, const Masks& masks = {});

/// z = sum_v m_v h_v, as 1 x H.
Var readout(Var h, std::optional<Var> node_mask = std::nullopt);

/// softmax(MLP(z)), as 1 x C.
Var classify(Tape& tape, Var z, const ClassifierParams& clf);

/// Full pipeline: encode, read out, classify.
Var predict(Tape& tape, const Graph& graph, const GraphClassifier& model, const Masks& masks = {});

/// Convenience: class probabilities of `graph` as plain numbers.
std::vector<double> predict_proba(const Graph& graph, const GraphClassifier& model);
std::size_t predict_class(const Graph& graph, const GraphClassifier& model);

/// -sum_c target_c log(max(p_c, 1e-12)) for a 1 x C probability row.
Var soft_cross_entropy(Var p, const Tensor& target);
/// -log(max(p_y, 1e-12)). Throws DomainError when y is out of range.
Var cross_entropy(Var p, std::size_t y);

/// Every trainable tensor, in a fixed order.
std::vector<Tensor*> parameters(Mlp& mlp);
std::vector<Tensor*> parameters(EncoderParams& enc);
std::vector<Tensor*> parameters(ClassifierParams& clf);
std::vector<Tensor*> parameters(GraphClassifier& model);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Named tensors plus named scalars; see docs/checkpoint-format.md.
struct Checkpoint {
  std::string kind;
  std::map<std::string, Tensor> tensors;
  std::map<std::string, double> scalars;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const GraphClassifier& model);
GraphClassifier classifier_from_checkpoint(const Checkpoint& ckpt);

/// Flattens an MLP into `ckpt` under "<prefix>.<i>.weight|bias".
void put_mlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& mlp);
Mlp get_mlp(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace ckl::gnn
