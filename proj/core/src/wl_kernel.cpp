#include "ckl/wl_kernel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <thread>

#include "ckl/error.hpp"

namespace ckl::wl {

int LabelDictionary::feature_label(std::span<const double> row) {
  std::vector<long long> key;
  key.reserve(row.size());
  for (double x : row) key.push_back(std::llround(x * 1e6));
  auto [it, inserted] = features_.try_emplace(std::move(key), static_cast<int>(features_.size()));
  return it->second;
}

int LabelDictionary::signature_label(std::size_t iteration, int own, const std::vector<int>& sorted_neighbors) {
  if (iteration == 0) throw DomainError("label dictionary: signatures start at iteration 1");
  if (signatures_.size() < iteration) signatures_.resize(iteration);
  auto& table = signatures_[iteration - 1];
  auto [it, inserted] = table.try_emplace({own, sorted_neighbors}, static_cast<int>(table.size()));
  return it->second;
}

std::size_t LabelDictionary::signature_count(std::size_t iteration) const {
  if (iteration == 0 || iteration > signatures_.size()) return 0;
  return signatures_[iteration - 1].size();
}

std::vector<int> initial_labels(const Graph& graph, LabelDictionary& dict) {
  if (graph.node_labels()) return *graph.node_labels();
  std::vector<int> out(graph.num_nodes());
  const Tensor& x = graph.node_features();
  for (std::size_t v = 0; v < graph.num_nodes(); ++v)
    out[v] = dict.feature_label(x.values().subspan(v * x.cols(), x.cols()));
  return out;
}

LabeledGraph make_labeled(const Graph& graph, LabelDictionary& dict) {
  return LabeledGraph{graph.num_nodes(), graph.adjacency(), {initial_labels(graph, dict)}};
}

LabeledGraph make_labeled(const Graph& graph, const mask::CoreSubgraph& core, LabelDictionary& dict) {
  return make_labeled(core.to_graph(graph), dict);
}

LabeledGraph wl_relabel(LabeledGraph lg, std::size_t iterations, LabelDictionary& dict) {
  if (lg.labels.empty()) throw DomainError("wl_relabel: iteration-0 labels missing");
  while (lg.iterations() < iterations) {
    const std::size_t next = lg.labels.size();
    const std::vector<int>& prev = lg.labels.back();
    std::vector<int> labels(lg.num_nodes);
    std::vector<int> neigh;
    for (std::size_t v = 0; v < lg.num_nodes; ++v) {
      neigh.clear();
      for (std::size_t u : lg.adjacency[v]) neigh.push_back(prev[u]);
      std::sort(neigh.begin(), neigh.end());
      labels[v] = dict.signature_label(next, prev[v], neigh);
    }
    lg.labels.push_back(std::move(labels));
  }
  return lg;
}

std::vector<LabeledGraph> label_corpus(const std::vector<Graph>& graphs, std::size_t iterations,
                                       LabelDictionary& dict) {
  std::vector<LabeledGraph> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) out.push_back(wl_relabel(make_labeled(g, dict), iterations, dict));
  return out;
}

namespace {

using Histogram = std::vector<std::pair<int, std::size_t>>;  // sorted by label

Histogram histogram(const std::vector<int>& labels) {
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  Histogram h;
  for (int l : sorted) {
    if (!h.empty() && h.back().first == l) ++h.back().second;
    else h.emplace_back(l, 1);
  }
  return h;
}

double dot(const Histogram& a, const Histogram& b) {
  double s = 0.0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (i->first < j->first) ++i;
    else if (j->first < i->first) ++j;
    else {
      s += static_cast<double>(i->second) * static_cast<double>(j->second);
      ++i;
      ++j;
    }
  }
  return s;
}

std::vector<Histogram> histograms(const LabeledGraph& g, std::size_t depth) {
  if (g.labels.empty() || g.iterations() < depth) {
    throw DomainError("wl_kernel: depth " + std::to_string(depth) + " exceeds the " +
                      std::to_string(g.iterations()) + " available WL iterations");
  }
  std::vector<Histogram> out;
  for (std::size_t i = 0; i <= depth; ++i) out.push_back(histogram(g.labels[i]));
  return out;
}

double kernel_from_histograms(const std::vector<Histogram>& a, const std::vector<Histogram>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += dot(a[i], b[i]);
  return s;
}

}  // namespace

double wl_kernel(const LabeledGraph& g1, const LabeledGraph& g2, std::size_t depth) {
  return kernel_from_histograms(histograms(g1, depth), histograms(g2, depth));
}

KernelMatrix kernel_matrix(const std::vector<LabeledGraph>& targets, const std::vector<LabeledGraph>& sources,
                           std::size_t depth, std::size_t threads) {
  if (targets.empty() || sources.empty()) throw DomainError("kernel_matrix: empty corpus");
  std::vector<std::vector<Histogram>> th, sh;
  th.reserve(targets.size());
  sh.reserve(sources.size());
  for (const auto& g : targets) th.push_back(histograms(g, depth));
  for (const auto& g : sources) sh.push_back(histograms(g, depth));

  KernelMatrix km{targets.size(), sources.size(), depth, std::vector<double>(targets.size() * sources.size())};
  auto fill_rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j)
      for (std::size_t i = 0; i < km.cols; ++i) km.values[j * km.cols + i] = kernel_from_histograms(th[j], sh[i]);
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, km.rows);
  if (threads <= 1) {
    fill_rows(0, km.rows);
    return km;
  }
  std::vector<std::jthread> workers;
  const std::size_t chunk = (km.rows + threads - 1) / threads;
  for (std::size_t begin = 0; begin < km.rows; begin += chunk)
    workers.emplace_back(fill_rows, begin, std::min(km.rows, begin + chunk));
  workers.clear();  // joins
  return km;
}

namespace {

std::string unfolding_tree(const LabeledGraph& g, std::size_t v, std::size_t depth) {
  std::string s = "(" + std::to_string(g.labels[0][v]);
  if (depth > 0) {
    std::vector<std::string> children;
    for (std::size_t u : g.adjacency[v]) children.push_back(unfolding_tree(g, u, depth - 1));
    std::sort(children.begin(), children.end());
    for (const auto& c : children) s += c;
  }
  return s + ")";
}

}  // namespace

double brute_force_subtree_oracle(const LabeledGraph& g1, const LabeledGraph& g2, std::size_t depth) {
  if (g1.num_nodes > 8 || g2.num_nodes > 8) throw DomainError("subtree oracle: graphs limited to 8 nodes");
  if (depth > 2) throw DomainError("subtree oracle: depth limited to 2");
  if (g1.labels.empty() || g2.labels.empty()) throw DomainError("subtree oracle: iteration-0 labels missing");
  double total = 0.0;
  for (std::size_t d = 0; d <= depth; ++d)
    for (std::size_t a = 0; a < g1.num_nodes; ++a)
      for (std::size_t b = 0; b < g2.num_nodes; ++b)
        if (unfolding_tree(g1, a, d) == unfolding_tree(g2, b, d)) total += 1.0;
  return total;
}

void write_kernel_csv(std::ostream& out, const KernelMatrix& km) {
  out << "target";
  for (std::size_t i = 0; i < km.cols; ++i) out << ",source_" << i;
  out << '\n';
  char buf[64];
  for (std::size_t j = 0; j < km.rows; ++j) {
    out << "target_" << j;
    for (std::size_t i = 0; i < km.cols; ++i) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, km(j, i));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

}  // namespace ckl::wl
