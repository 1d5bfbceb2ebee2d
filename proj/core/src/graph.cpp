#include "ckl/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ckl/error.hpp"
#include "ckl/random.hpp"

namespace ckl {

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges, Tensor node_features,
             std::optional<std::vector<int>> node_labels, std::optional<int> class_label)
    : num_nodes_(num_nodes),
      features_(std::move(node_features)),
      node_labels_(std::move(node_labels)),
      class_label_(class_label) {
  if (features_.rows() != num_nodes_) {
    throw DomainError("graph: " + std::to_string(features_.rows()) + " feature rows for " +
                      std::to_string(num_nodes_) + " nodes");
  }
  if (node_labels_ && node_labels_->size() != num_nodes_) {
    throw DomainError("graph: node label count does not match node count");
  }
  if (node_labels_) {
    for (int l : *node_labels_)
      if (l < 0) throw DomainError("graph: negative node label");
  }
  for (Edge& e : edges) {
    if (e.u == e.v) throw DomainError("graph: self-loop on node " + std::to_string(e.u));
    if (e.u >= num_nodes_ || e.v >= num_nodes_) {
      throw DomainError("graph: edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                        ") outside " + std::to_string(num_nodes_) + " nodes");
    }
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  adjacency_.assign(num_nodes_, {});
  msg_src_.reserve(2 * edges_.size());
  msg_dst_.reserve(2 * edges_.size());
  msg_edge_.reserve(2 * edges_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
    msg_src_.push_back(e.u);
    msg_dst_.push_back(e.v);
    msg_edge_.push_back(i);
    msg_src_.push_back(e.v);
    msg_dst_.push_back(e.u);
    msg_edge_.push_back(i);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

double Graph::density() const noexcept {
  if (num_nodes_ < 2) return 0.0;
  const double pairs = static_cast<double>(num_nodes_) * static_cast<double>(num_nodes_ - 1) / 2.0;
  return static_cast<double>(edges_.size()) / pairs;
}

Graph Graph::with_class_label(std::optional<int> label) const {
  Graph g = *this;
  g.class_label_ = label;
  return g;
}

Graph Graph::subgraph(const std::vector<std::size_t>& nodes, const std::vector<Edge>& edges) const {
  std::vector<std::size_t> remap(num_nodes_, SIZE_MAX);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] >= num_nodes_) throw DomainError("subgraph: node outside graph");
    remap[nodes[i]] = i;
  }
  std::vector<Edge> sub_edges;
  sub_edges.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= num_nodes_ || e.v >= num_nodes_ || remap[e.u] == SIZE_MAX || remap[e.v] == SIZE_MAX) {
      throw DomainError("subgraph: edge endpoint not kept");
    }
    sub_edges.push_back({remap[e.u], remap[e.v]});
  }
  Tensor feats(nodes.size(), features_.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t c = 0; c < features_.cols(); ++c) feats(i, c) = features_(nodes[i], c);
  std::optional<std::vector<int>> labels;
  if (node_labels_) {
    labels.emplace();
    for (std::size_t v : nodes) labels->push_back((*node_labels_)[v]);
  }
  return Graph(nodes.size(), std::move(sub_edges), std::move(feats), std::move(labels), class_label_);
}

Graph Graph::permuted(const std::vector<std::size_t>& perm) const {
  if (perm.size() != num_nodes_) throw DomainError("permuted: permutation size mismatch");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const Edge& e : edges_) edges.push_back({perm[e.u], perm[e.v]});
  Tensor feats(num_nodes_, features_.cols());
  for (std::size_t i = 0; i < num_nodes_; ++i)
    for (std::size_t c = 0; c < features_.cols(); ++c) feats(perm[i], c) = features_(i, c);
  std::optional<std::vector<int>> labels;
  if (node_labels_) {
    labels.emplace(num_nodes_);
    for (std::size_t i = 0; i < num_nodes_; ++i) (*labels)[perm[i]] = (*node_labels_)[i];
  }
  return Graph(num_nodes_, std::move(edges), std::move(feats), std::move(labels), class_label_);
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

std::vector<int> Dataset::class_labels() const {
  std::vector<int> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) out.push_back(g.class_label().value_or(-1));
  return out;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    if (g.feature_dim() != feature_dim) {
      throw DomainError("dataset " + name + ": graph " + std::to_string(i) + " has feature dim " +
                        std::to_string(g.feature_dim()) + ", expected " + std::to_string(feature_dim));
    }
    if (g.class_label() && (*g.class_label() < 0 || *g.class_label() >= num_classes)) {
      throw DomainError("dataset " + name + ": graph " + std::to_string(i) +
                        " class label outside [0," + std::to_string(num_classes) + ")");
    }
  }
  if (!motifs.empty() && motifs.size() != graphs.size()) {
    throw DomainError("dataset " + name + ": motif truth count does not match graph count");
  }
}

// ---------------------------------------------------------------------------
// TU flat files
// ---------------------------------------------------------------------------

namespace {

std::filesystem::path tu_file(const std::filesystem::path& dir, const std::string& name,
                              const std::string& suffix) {
  return dir / (name + "_" + suffix + ".txt");
}

std::vector<std::string> read_lines(const std::filesystem::path& p, bool mandatory, bool& found) {
  std::ifstream in(p);
  found = static_cast<bool>(in);
  if (!found) {
    if (mandatory) throw LoadError("missing mandatory file " + p.string());
    return {};
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // Trailing blank lines carry no records.
  while (!lines.empty() && lines.back().find_first_not_of(" \t,") == std::string::npos) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ',' || c == ' ' || c == '\t'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

long long parse_int(std::string_view s, const std::string& file, std::size_t line) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(file, line, "expected integer, got '" + std::string(s) + "'");
  }
  return v;
}

double parse_real(std::string_view s, const std::string& file, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(file, line, "expected real, got '" + std::string(s) + "'");
  }
  return v;
}

/// One integer per line.
std::vector<long long> read_int_column(const std::filesystem::path& p, bool mandatory, bool& found) {
  const auto lines = read_lines(p, mandatory, found);
  std::vector<long long> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 1) {
      throw ParseError(p.string(), i + 1, "expected one integer, got " + std::to_string(fields.size()) + " fields");
    }
    out.push_back(parse_int(fields[0], p.string(), i + 1));
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset load_tu_dataset(const std::filesystem::path& dir, const std::string& name) {
  bool found = false;
  const auto indicator_path = tu_file(dir, name, "graph_indicator");
  const auto indicator = read_int_column(indicator_path, true, found);
  const auto graph_labels_raw = read_int_column(tu_file(dir, name, "graph_labels"), true, found);
  const auto a_path = tu_file(dir, name, "A");
  const auto a_lines = read_lines(a_path, true, found);

  const std::size_t num_graphs = graph_labels_raw.size();
  const std::size_t total_nodes = indicator.size();

  // Per-node graph id and local index.
  std::vector<std::size_t> graph_of(total_nodes), local_of(total_nodes);
  std::vector<std::size_t> nodes_in(num_graphs, 0);
  for (std::size_t i = 0; i < total_nodes; ++i) {
    const long long g = indicator[i];
    if (g < 1 || static_cast<std::size_t>(g) > num_graphs) {
      throw ParseError(indicator_path.string(), i + 1,
                       "graph id " + std::to_string(g) + " outside 1.." + std::to_string(num_graphs));
    }
    graph_of[i] = static_cast<std::size_t>(g - 1);
    local_of[i] = nodes_in[graph_of[i]]++;
  }

  std::vector<std::vector<Edge>> edges(num_graphs);
  for (std::size_t i = 0; i < a_lines.size(); ++i) {
    const auto fields = split_fields(a_lines[i]);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw ParseError(a_path.string(), i + 1, "expected two node ids");
    }
    const long long a = parse_int(fields[0], a_path.string(), i + 1);
    const long long b = parse_int(fields[1], a_path.string(), i + 1);
    for (long long x : {a, b}) {
      if (x < 1 || static_cast<std::size_t>(x) > total_nodes) {
        throw ParseError(a_path.string(), i + 1,
                         "node index " + std::to_string(x) + " outside 1.." + std::to_string(total_nodes));
      }
    }
    const std::size_t u = static_cast<std::size_t>(a - 1), v = static_cast<std::size_t>(b - 1);
    if (graph_of[u] != graph_of[v]) {
      throw ParseError(a_path.string(), i + 1, "edge joins nodes of different graphs");
    }
    if (u == v) continue;
    edges[graph_of[u]].push_back({local_of[u], local_of[v]});
  }

  const auto node_labels_path = tu_file(dir, name, "node_labels");
  bool has_labels = false;
  const auto node_labels = read_int_column(node_labels_path, false, has_labels);
  if (has_labels && node_labels.size() != total_nodes) {
    throw ParseError(node_labels_path.string(), node_labels.size() + 1,
                     "expected " + std::to_string(total_nodes) + " node labels");
  }
  for (std::size_t i = 0; i < node_labels.size(); ++i) {
    if (node_labels[i] < 0) throw ParseError(node_labels_path.string(), i + 1, "negative node label");
  }

  const auto attr_path = tu_file(dir, name, "node_attributes");
  bool has_attrs = false;
  const auto attr_lines = read_lines(attr_path, false, has_attrs);
  std::vector<std::vector<double>> attrs;
  if (has_attrs) {
    if (attr_lines.size() != total_nodes) {
      throw ParseError(attr_path.string(), attr_lines.size() + 1,
                       "expected " + std::to_string(total_nodes) + " attribute lines");
    }
    for (std::size_t i = 0; i < attr_lines.size(); ++i) {
      const auto fields = split_fields(attr_lines[i]);
      std::vector<double> row;
      for (auto f : fields) row.push_back(parse_real(f, attr_path.string(), i + 1));
      if (!attrs.empty() && row.size() != attrs.front().size()) {
        throw ParseError(attr_path.string(), i + 1,
                         "attribute arity " + std::to_string(row.size()) + ", expected " +
                             std::to_string(attrs.front().size()));
      }
      if (row.empty()) throw ParseError(attr_path.string(), i + 1, "empty attribute line");
      attrs.push_back(std::move(row));
    }
  }

  const auto motif_path = tu_file(dir, name, "node_motif");
  bool has_motif = false;
  const auto motif_flags = read_int_column(motif_path, false, has_motif);
  if (has_motif && motif_flags.size() != total_nodes) {
    throw ParseError(motif_path.string(), motif_flags.size() + 1, "expected one flag per node");
  }

  std::size_t feature_dim = 1;
  if (has_attrs) {
    feature_dim = total_nodes == 0 ? 0 : attrs.front().size();
  } else if (has_labels) {
    long long mx = 0;
    for (long long l : node_labels) mx = std::max(mx, l);
    feature_dim = static_cast<std::size_t>(mx + 1);
  }

  std::map<long long, int> class_map;
  for (long long l : graph_labels_raw) class_map.emplace(l, 0);
  int next = 0;
  for (auto& [raw, idx] : class_map) idx = next++;

  // Global node ids per graph, in file order.
  std::vector<std::vector<std::size_t>> members(num_graphs);
  for (std::size_t i = 0; i < total_nodes; ++i) members[graph_of[i]].push_back(i);

  Dataset ds;
  ds.name = name;
  ds.num_classes = static_cast<int>(class_map.size());
  ds.feature_dim = feature_dim;
  for (std::size_t g = 0; g < num_graphs; ++g) {
    const std::size_t n = members[g].size();
    Tensor feats(n, feature_dim);
    std::optional<std::vector<int>> labels;
    if (has_labels) labels.emplace();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t node = members[g][k];
      if (has_attrs) {
        for (std::size_t c = 0; c < feature_dim; ++c) feats(k, c) = attrs[node][c];
      } else if (has_labels) {
        feats(k, static_cast<std::size_t>(node_labels[node])) = 1.0;
      } else {
        feats(k, 0) = 1.0;
      }
      if (has_labels) labels->push_back(static_cast<int>(node_labels[node]));
    }
    ds.graphs.emplace_back(n, std::move(edges[g]), std::move(feats), std::move(labels),
                           class_map.at(graph_labels_raw[g]));
    if (has_motif) {
      MotifTruth t;
      for (std::size_t k = 0; k < n; ++k)
        if (motif_flags[members[g][k]] != 0) t.nodes.push_back(k);
      const std::set<std::size_t> in(t.nodes.begin(), t.nodes.end());
      for (const Edge& e : ds.graphs.back().edges())
        if (in.count(e.u) && in.count(e.v)) t.edges.push_back(e);
      ds.motifs.push_back(std::move(t));
    }
  }
  return ds;
}

void save_tu_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& suffix) {
    std::ofstream out(tu_file(dir, ds.name, suffix));
    if (!out) throw LoadError("cannot write " + tu_file(dir, ds.name, suffix).string());
    return out;
  };
  const bool labeled = !ds.graphs.empty() && std::all_of(ds.graphs.begin(), ds.graphs.end(),
                                                         [](const Graph& g) { return g.node_labels().has_value(); });
  std::ofstream a = open("A"), ind = open("graph_indicator"), gl = open("graph_labels"),
                attr = open("node_attributes");
  std::ofstream nl, motif;
  if (labeled) nl = open("node_labels");
  if (!ds.motifs.empty()) motif = open("node_motif");

  std::size_t offset = 0;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const Graph& graph = ds.graphs[g];
    gl << graph.class_label().value_or(0) << '\n';
    for (const Edge& e : graph.edges()) {
      a << (offset + e.u + 1) << ", " << (offset + e.v + 1) << '\n';
      a << (offset + e.v + 1) << ", " << (offset + e.u + 1) << '\n';
    }
    std::vector<char> in_motif(graph.num_nodes(), 0);
    if (!ds.motifs.empty())
      for (std::size_t v : ds.motifs[g].nodes) in_motif[v] = 1;
    for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
      ind << (g + 1) << '\n';
      for (std::size_t c = 0; c < graph.feature_dim(); ++c) {
        if (c) attr << ", ";
        attr << format_real(graph.node_features()(v, c));
      }
      attr << '\n';
      if (labeled) nl << (*graph.node_labels())[v] << '\n';
      if (!ds.motifs.empty()) motif << static_cast<int>(in_motif[v]) << '\n';
    }
    offset += graph.num_nodes();
  }
}

// ---------------------------------------------------------------------------
// Density partition
// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> edge_density_buckets(const Dataset& ds, std::size_t k) {
  if (ds.graphs.empty()) throw DomainError("edge_density_partition: empty dataset");
  if (k < 2) throw DomainError("edge_density_partition: k must be at least 2");
  if (k > ds.graphs.size()) {
    throw DomainError("edge_density_partition: k=" + std::to_string(k) + " exceeds " +
                      std::to_string(ds.graphs.size()) + " graphs");
  }
  std::vector<std::size_t> order(ds.graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> d(ds.graphs.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = ds.graphs[i].density();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  const std::size_t base = order.size() / k, extra = order.size() % k;
  std::vector<std::vector<std::size_t>> buckets(k);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    buckets[b].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                      order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return buckets;
}

std::vector<Dataset> edge_density_partition(const Dataset& ds, std::size_t k) {
  std::vector<Dataset> out;
  const auto buckets = edge_density_buckets(ds, k);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    Dataset part;
    part.name = ds.name + "_d" + std::to_string(b);
    part.num_classes = ds.num_classes;
    part.feature_dim = ds.feature_dim;
    for (std::size_t i : buckets[b]) {
      part.graphs.push_back(ds.graphs[i]);
      if (!ds.motifs.empty()) part.motifs.push_back(ds.motifs[i]);
    }
    out.push_back(std::move(part));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planted motifs
// ---------------------------------------------------------------------------

std::string to_string(MotifKind kind) {
  switch (kind) {
    case MotifKind::triangle: return "triangle";
    case MotifKind::house: return "house";
    case MotifKind::star: return "star";
  }
  return "unknown";
}

MotifKind parse_motif_kind(const std::string& s) {
  if (s == "triangle") return MotifKind::triangle;
  if (s == "house") return MotifKind::house;
  if (s == "star") return MotifKind::star;
  throw DomainError("unknown motif kind '" + s + "' (expected triangle, house or star)");
}

namespace {

std::vector<Edge> motif_template(MotifKind kind) {
  switch (kind) {
    case MotifKind::triangle: return {{0, 1}, {1, 2}, {0, 2}};
    case MotifKind::house: return {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 4}, {1, 4}};
    case MotifKind::star: return {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  }
  return {};
}

}  // namespace

std::size_t motif_size(MotifKind kind) {
  switch (kind) {
    case MotifKind::triangle: return 3;
    case MotifKind::house: return 5;
    case MotifKind::star: return 5;
  }
  return 0;
}

void MotifSpec::validate() const {
  if (!(background_edge_prob >= 0.0 && background_edge_prob <= 1.0)) {
    throw DomainError("motif spec: background edge probability outside [0,1]");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) throw DomainError("motif spec: noise outside [0,1]");
}

PlantedGraph generate_planted_graph(const std::vector<MotifKind>& kinds,
                                    std::size_t background_nodes, double background_edge_prob,
                                    double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  std::vector<int> labels;
  std::vector<std::size_t> motif_nodes;
  for (MotifKind kind : kinds) {
    const std::size_t base = labels.size();
    for (const Edge& e : motif_template(kind)) edges.push_back({base + e.u, base + e.v});
    for (std::size_t i = 0; i < motif_size(kind); ++i) {
      motif_nodes.push_back(base + i);
      labels.push_back(1);
    }
  }
  const std::size_t m = labels.size();
  const std::size_t n = m + background_nodes;
  for (std::size_t i = 0; i < background_nodes; ++i) labels.push_back(rng.bernoulli(noise) ? 1 : 0);
  for (std::size_t a = m; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (rng.bernoulli(background_edge_prob)) edges.push_back({a, b});
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = m; b < n; ++b)
      if (rng.bernoulli(background_edge_prob)) edges.push_back({a, b});

  const std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<Edge> shuffled;
  shuffled.reserve(edges.size());
  for (const Edge& e : edges) shuffled.push_back({perm[e.u], perm[e.v]});
  std::vector<int> node_labels(n);
  Tensor feats(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    node_labels[perm[i]] = labels[i];
    feats(perm[i], static_cast<std::size_t>(labels[i])) = 1.0;
  }

  PlantedGraph out{Graph(n, std::move(shuffled), std::move(feats), std::move(node_labels)), {}};
  for (std::size_t v : motif_nodes) out.truth.nodes.push_back(perm[v]);
  std::sort(out.truth.nodes.begin(), out.truth.nodes.end());
  const std::set<std::size_t> in(out.truth.nodes.begin(), out.truth.nodes.end());
  for (const Edge& e : out.graph.edges())
    if (in.count(e.u) && in.count(e.v)) out.truth.edges.push_back(e);
  return out;
}

Dataset generate_planted_motif_dataset(const MotifSpec& spec_pos, const MotifSpec& spec_neg,
                                       std::size_t n_per_class, std::uint64_t seed) {
  spec_pos.validate();
  spec_neg.validate();
  if (spec_pos.kind == spec_neg.kind) {
    throw DomainError("planted motif dataset: both classes use motif '" + to_string(spec_pos.kind) + "'");
  }
  if (n_per_class < 1) throw DomainError("planted motif dataset: n_per_class must be at least 1");

  Dataset ds;
  ds.name = "planted_" + to_string(spec_pos.kind) + "_vs_" + to_string(spec_neg.kind);
  ds.num_classes = 2;
  ds.feature_dim = 2;
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const bool positive = i % 2 == 0;
    const MotifSpec& spec = positive ? spec_pos : spec_neg;
    PlantedGraph pg = generate_planted_graph({spec.kind}, spec.background_nodes, spec.background_edge_prob,
                                             spec.noise, derive_seed(seed, {i}));
    ds.graphs.push_back(pg.graph.with_class_label(positive ? 1 : 0));
    ds.motifs.push_back(std::move(pg.truth));
  }
  return ds;
}

}  // namespace ckl
