#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ckl/tensor.hpp"

namespace ckl {

using ad::Tensor;

/// Undirected edge stored with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;

  auto operator<=>(const Edge&) const = default;
};

/// Immutable undirected simple graph with node features.
///
/// Edges are canonicalized (u < v), sorted, and deduplicated at construction;
/// a self-loop or an out-of-range endpoint throws DomainError.
class Graph {
 public:
  Graph() = default;
  Graph(std::size_t num_nodes, std::vector<Edge> edges, Tensor node_features,
        std::optional<std::vector<int>> node_labels = std::nullopt,
        std::optional<int> class_label = std::nullopt);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t feature_dim() const noexcept { return features_.cols(); }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Tensor& node_features() const noexcept { return features_; }
  const std::optional<std::vector<int>>& node_labels() const noexcept { return node_labels_; }
  const std::optional<int>& class_label() const noexcept { return class_label_; }

  /// Neighbor lists, ascending.
  const std::vector<std::vector<std::size_t>>& adjacency() const noexcept { return adjacency_; }
  std::size_t degree(std::size_t v) const { return adjacency_[v].size(); }

  /// Both directions of every edge: message i travels source[i] -> target[i]
  /// along edge edge_of[i]. Ordered by edge, (u->v) before (v->u).
  const std::vector<std::size_t>& message_sources() const noexcept { return msg_src_; }
  const std::vector<std::size_t>& message_targets() const noexcept { return msg_dst_; }
  const std::vector<std::size_t>& message_edges() const noexcept { return msg_edge_; }

  /// |E| / (|V| (|V|-1) / 2); zero for graphs with fewer than two nodes.
  double density() const noexcept;

  /// Copy with a different class label.
  Graph with_class_label(std::optional<int> label) const;

  /// Subgraph on `nodes` (kept in the given order, renumbered 0..k-1) with
  /// exactly the listed edges, which must join kept nodes.
  Graph subgraph(const std::vector<std::size_t>& nodes, const std::vector<Edge>& edges) const;

  /// Same graph with node i renamed perm[i].
  Graph permuted(const std::vector<std::size_t>& perm) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_ && a.features_ == b.features_ &&
           a.node_labels_ == b.node_labels_ && a.class_label_ == b.class_label_;
  }

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  Tensor features_;
  std::optional<std::vector<int>> node_labels_;
  std::optional<int> class_label_;

  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::size_t> msg_src_, msg_dst_, msg_edge_;
};

/// Ground truth recorded by the planted-motif generator.
struct MotifTruth {
  std::vector<std::size_t> nodes;  ///< ascending
  std::vector<Edge> edges;         ///< edges among motif nodes

  friend bool operator==(const MotifTruth&, const MotifTruth&) = default;
};

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  std::size_t feature_dim = 0;
  /// Parallel to `graphs` when the dataset came from a generator.
  std::vector<MotifTruth> motifs;

  std::size_t size() const noexcept { return graphs.size(); }
  std::vector<int> class_labels() const;
  /// Throws DomainError if any Dataset invariant is violated.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Reads the TU flat-file format from `dir`:
///   <name>_A.txt               "i, j" per line, 1-based node ids (mandatory)
///   <name>_graph_indicator.txt graph id per node line, 1-based (mandatory)
///   <name>_graph_labels.txt    class label per graph (mandatory)
///   <name>_node_labels.txt     integer label per node (optional)
///   <name>_node_attributes.txt comma-separated reals per node (optional)
///   <name>_node_motif.txt      0/1 motif membership per node (optional)
/// Separators may be commas or whitespace. Graph labels are remapped to
/// 0..C-1 in ascending order. Without attributes, features are the one-hot
/// node labels; without either, a constant feature 1.0. Directed duplicates
/// and self-loops are dropped.
Dataset load_tu_dataset(const std::filesystem::path& dir, const std::string& name);

/// Writes `ds` in the format read by load_tu_dataset. Node attributes are
/// always written (shortest round-trip decimal form), so loading the output
/// reproduces `ds` exactly.
void save_tu_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Sorts graphs by density (ties by index) and cuts the order into k
/// contiguous buckets whose sizes differ by at most one; earlier buckets get
/// the extra graphs. Bucket datasets are named "<name>_d<i>".
std::vector<Dataset> edge_density_partition(const Dataset& ds, std::size_t k = 4);

/// Indices of `ds` per bucket, in the same order edge_density_partition uses.
std::vector<std::vector<std::size_t>> edge_density_buckets(const Dataset& ds, std::size_t k = 4);

enum class MotifKind { triangle, house, star };

std::string to_string(MotifKind kind);
MotifKind parse_motif_kind(const std::string& s);
std::size_t motif_size(MotifKind kind);

/// Recipe for one synthetic class.
struct MotifSpec {
  MotifKind kind = MotifKind::triangle;
  std::size_t background_nodes = 20;
  double background_edge_prob = 0.1;
  /// Probability that a background node carries the motif node label.
  double noise = 0.0;

  void validate() const;
};

/// Binary planted-motif dataset: n_per_class graphs of class 1 (spec_pos) and
/// class 0 (spec_neg), interleaved pos, neg, pos, ...
///
/// Each graph holds one motif on labeled nodes (label 1) and an Erdos-Renyi
/// background (label 0, or 1 with probability `noise`). Every background pair
/// and every background-motif pair is joined with the background edge
/// probability; motif-internal pairs are exactly the motif. Node order is
/// shuffled. Features are one-hot labels (dim 2). Each graph is a pure
/// function of (seed, graph index).
Dataset generate_planted_motif_dataset(const MotifSpec& spec_pos, const MotifSpec& spec_neg,
                                       std::size_t n_per_class, std::uint64_t seed);

/// One planted graph containing every motif in `kinds` (possibly none).
/// Building block for multi-property task data.
struct PlantedGraph {
  Graph graph;
  MotifTruth truth;
};
PlantedGraph generate_planted_graph(const std::vector<MotifKind>& kinds,
                                    std::size_t background_nodes, double background_edge_prob,
                                    double noise, std::uint64_t seed);

}  // namespace ckl
