#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ckl/gnn.hpp"
#include "ckl/graph.hpp"
#include "ckl/mask.hpp"
#include "ckl/wl_kernel.hpp"

namespace ckl::adapt {

struct Assignment {
  int label = 0;
  std::size_t best_source = 0;
  double kernel_value = 0.0;
  bool fallback = false;  ///< target core was empty and the full graph was used
};

struct AdaptationResult {
  std::vector<Assignment> targets;
  std::size_t source_fallbacks = 0;
  std::size_t target_fallbacks = 0;
  std::optional<double> accuracy;  ///< set when target labels are known

  std::vector<int> labels() const;
};

/// Per target row j: i* = argmax_i km(j, i), smallest i on ties, label
/// source_labels[i*].
AdaptationResult assign_labels(const wl::KernelMatrix& km, const std::vector<int>& source_labels);

struct AdaptConfig {
  std::size_t depth = 2;
  double node_threshold = 0.5;
  double edge_threshold = 0.5;
  std::size_t threads = 1;
};

/// Extracts cores for every source and target graph (empty cores fall back
/// to the full graph and are counted), labels both corpora through one WL
/// dictionary, and assigns target labels by kernel-nearest source. Accuracy
/// is filled in when every target graph carries a class label.
AdaptationResult adapt_pipeline(const Dataset& source, const Dataset& target, const gnn::GraphClassifier& model,
                                const mask::MaskParams& mp, const AdaptConfig& cfg);

/// Fraction of equal entries; DomainError on a length mismatch or empty input.
double evaluate_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

/// Accuracy of the frozen classifier applied directly to `ds`.
double classifier_accuracy(const Dataset& ds, const gnn::GraphClassifier& model);

/// CSV: target_index,assigned_label,best_source,kernel_value,fallback_flag.
void write_assignments_csv(std::ostream& out, const AdaptationResult& result);

}  // namespace ckl::adapt
