#pragma once

// Weisfeiler-Lehman subtree kernel.
//
// Every graph compared in one kernel computation must be labeled through the
// same LabelDictionary, otherwise ids from different graphs mean different
// things and the kernel counts nothing.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "ckl/graph.hpp"
#include "ckl/mask.hpp"

namespace ckl::wl {

/// Corpus-wide label ids. Iteration 0 holds hashed feature rows; iteration
/// i > 0 holds (previous label, sorted neighbor labels) signatures.
class LabelDictionary {
 public:
  /// Id of a feature row, each value rounded to 6 decimals first.
  int feature_label(std::span<const double> row);
  /// Id of a WL signature at `iteration` (>= 1).
  int signature_label(std::size_t iteration, int own, const std::vector<int>& sorted_neighbors);
  /// Number of distinct signatures seen at `iteration` (>= 1).
  std::size_t signature_count(std::size_t iteration) const;

 private:
  std::map<std::vector<long long>, int> features_;
  std::vector<std::map<std::pair<int, std::vector<int>>, int>> signatures_;
};

struct LabeledGraph {
  std::size_t num_nodes = 0;
  std::vector<std::vector<std::size_t>> adjacency;
  /// labels[i][v] is the iteration-i label of v; labels[0] always present.
  std::vector<std::vector<int>> labels;

  std::size_t iterations() const { return labels.empty() ? 0 : labels.size() - 1; }
};

/// Discrete node labels when the graph has them, hashed feature rows otherwise.
std::vector<int> initial_labels(const Graph& graph, LabelDictionary& dict);

/// Iteration-0 labeled view of `graph`.
LabeledGraph make_labeled(const Graph& graph, LabelDictionary& dict);
/// Same for an extracted core (the whole core subgraph, renumbered).
LabeledGraph make_labeled(const Graph& graph, const mask::CoreSubgraph& core, LabelDictionary& dict);

/// Extends `lg` to at least `iterations` WL iterations.
LabeledGraph wl_relabel(LabeledGraph lg, std::size_t iterations, LabelDictionary& dict);

/// Labels every graph of a corpus through one dictionary up to `iterations`.
std::vector<LabeledGraph> label_corpus(const std::vector<Graph>& graphs, std::size_t iterations,
                                       LabelDictionary& dict);

/// Sum over i = 0..depth of the dot product of the two iteration-i label
/// histograms. DomainError when either graph has fewer than `depth`
/// iterations.
double wl_kernel(const LabeledGraph& g1, const LabeledGraph& g2, std::size_t depth);

struct KernelMatrix {
  std::size_t rows = 0;  ///< targets
  std::size_t cols = 0;  ///< sources
  std::size_t depth = 0;
  std::vector<double> values;  ///< row-major

  double operator()(std::size_t target, std::size_t source) const { return values[target * cols + source]; }
  friend bool operator==(const KernelMatrix&, const KernelMatrix&) = default;
};

/// Entry (j, i) = wl_kernel(targets[j], sources[i], depth). Rows are split
/// over `threads` workers (0 means hardware concurrency). DomainError on an
/// empty corpus.
KernelMatrix kernel_matrix(const std::vector<LabeledGraph>& targets, const std::vector<LabeledGraph>& sources,
                           std::size_t depth, std::size_t threads = 1);

/// Independent check of wl_kernel for small graphs: compares canonical
/// strings of depth-i rooted unfolding trees for every node pair, using only
/// the iteration-0 labels. Limited to graphs of at most 8 nodes and depth 2.
double brute_force_subtree_oracle(const LabeledGraph& g1, const LabeledGraph& g2, std::size_t depth);

/// CSV with header "target,source_0,...,source_{n-1}" and one row
/// "target_j,<values>" per target.
void write_kernel_csv(std::ostream& out, const KernelMatrix& km);

}  // namespace ckl::wl
