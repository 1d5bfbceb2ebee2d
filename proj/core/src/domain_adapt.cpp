#include "ckl/domain_adapt.hpp"

#include <charconv>
#include <ostream>
#include <string>
#include <string_view>

#include "ckl/error.hpp"

namespace ckl::adapt {

std::vector<int> AdaptationResult::labels() const {
  std::vector<int> out;
  out.reserve(targets.size());
  for (const auto& a : targets) out.push_back(a.label);
  return out;
}

AdaptationResult assign_labels(const wl::KernelMatrix& km, const std::vector<int>& source_labels) {
  if (source_labels.empty() || km.cols == 0) throw DomainError("assign_labels: no source graphs");
  if (km.cols != source_labels.size()) {
    throw ShapeError("assign_labels: kernel matrix has " + std::to_string(km.cols) + " columns for " +
                     std::to_string(source_labels.size()) + " source labels");
  }
  AdaptationResult result;
  result.targets.reserve(km.rows);
  for (std::size_t j = 0; j < km.rows; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < km.cols; ++i)
      if (km(j, i) > km(j, best)) best = i;
    result.targets.push_back({source_labels[best], best, km(j, best), false});
  }
  return result;
}

namespace {

struct Cores {
  std::vector<Graph> graphs;
  std::vector<bool> fallback;
  std::size_t fallbacks = 0;
};

Cores extract_all(const Dataset& ds, const gnn::GraphClassifier& model, const mask::MaskParams& mp,
                  const AdaptConfig& cfg) {
  Cores out;
  for (const Graph& g : ds.graphs) {
    const mask::CoreSubgraph core =
        mask::extract_core_subgraph(g, model.encoder, mp, cfg.node_threshold, cfg.edge_threshold);
    const bool empty = core.empty();
    out.graphs.push_back(empty ? g : core.to_graph(g));
    out.fallback.push_back(empty);
    out.fallbacks += empty ? 1 : 0;
  }
  return out;
}

}  // namespace

AdaptationResult adapt_pipeline(const Dataset& source, const Dataset& target, const gnn::GraphClassifier& model,
                                const mask::MaskParams& mp, const AdaptConfig& cfg) {
  if (source.graphs.empty()) throw DomainError("adapt: empty source dataset");
  if (target.graphs.empty()) throw DomainError("adapt: empty target dataset");
  const std::vector<int> source_labels = source.class_labels();

  const Cores src = extract_all(source, model, mp, cfg);
  const Cores tgt = extract_all(target, model, mp, cfg);

  wl::LabelDictionary dict;
  const auto src_lg = wl::label_corpus(src.graphs, cfg.depth, dict);
  const auto tgt_lg = wl::label_corpus(tgt.graphs, cfg.depth, dict);
  const wl::KernelMatrix km = wl::kernel_matrix(tgt_lg, src_lg, cfg.depth, cfg.threads);

  AdaptationResult result = assign_labels(km, source_labels);
  for (std::size_t j = 0; j < result.targets.size(); ++j) result.targets[j].fallback = tgt.fallback[j];
  result.source_fallbacks = src.fallbacks;
  result.target_fallbacks = tgt.fallbacks;

  bool labeled = true;
  for (const Graph& g : target.graphs) labeled = labeled && g.class_label().has_value();
  if (labeled) result.accuracy = evaluate_accuracy(result.labels(), target.class_labels());
  return result;
}

double evaluate_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) {
    throw DomainError("evaluate_accuracy: " + std::to_string(pred.size()) + " predictions for " +
                      std::to_string(truth.size()) + " labels");
  }
  if (pred.empty()) throw DomainError("evaluate_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double classifier_accuracy(const Dataset& ds, const gnn::GraphClassifier& model) {
  std::vector<int> pred;
  pred.reserve(ds.graphs.size());
  for (const Graph& g : ds.graphs) pred.push_back(static_cast<int>(gnn::predict_class(g, model)));
  return evaluate_accuracy(pred, ds.class_labels());
}

void write_assignments_csv(std::ostream& out, const AdaptationResult& result) {
  out << "target_index,assigned_label,best_source,kernel_value,fallback_flag\n";
  char buf[64];
  for (std::size_t j = 0; j < result.targets.size(); ++j) {
    const Assignment& a = result.targets[j];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, a.kernel_value);
    out << j << ',' << a.label << ',' << a.best_source << ','
        << std::string_view(buf, static_cast<std::size_t>(end - buf)) << ',' << (a.fallback ? 1 : 0) << '\n';
  }
}

}  // namespace ckl::adapt
