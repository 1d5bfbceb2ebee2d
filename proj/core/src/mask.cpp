#include "ckl/mask.hpp"

#include <algorithm>
#include <iterator>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ckl/error.hpp"
#include "ckl/optim.hpp"

namespace ckl::mask {

MaskParams MaskParams::init(std::size_t encoder_dim, std::size_t mask_dim, double temperature, Rng& rng,
                            double head_bias) {
  if (!(temperature > 0.0)) throw DomainError("mask params: temperature must be positive");
  MaskParams mp;
  mp.node_embed = gnn::Mlp::two_layer(encoder_dim, mask_dim, mask_dim, rng);
  mp.edge_embed = gnn::Mlp::two_layer(encoder_dim, mask_dim, mask_dim, rng);
  mp.node_head = gnn::Linear::glorot(mask_dim, 1, rng);
  mp.edge_head = gnn::Linear::glorot(3 * mask_dim, 1, rng);
  mp.node_head.bias[0] = head_bias;
  mp.edge_head.bias[0] = head_bias;
  mp.temperature = temperature;
  return mp;
}

void MaskParams::validate() const {
  if (!(temperature > 0.0)) throw DomainError("mask params: temperature must be positive");
  if (node_embed.layers.empty() || edge_embed.layers.empty()) throw ShapeError("mask params: empty embedding MLP");
  if (edge_embed.in_dim() != node_embed.in_dim() || edge_embed.out_dim() != node_embed.out_dim())
    throw ShapeError("mask params: node and edge embedding MLPs disagree on dims");
  if (node_head.in_dim() != mask_dim() || node_head.out_dim() != 1)
    throw ShapeError("mask params: node head must map mask dim to 1");
  if (edge_head.in_dim() != 3 * mask_dim() || edge_head.out_dim() != 1)
    throw ShapeError("mask params: edge head must map 3 x mask dim to 1");
}

std::vector<Tensor*> parameters(MaskParams& mp) {
  auto out = gnn::parameters(mp.node_embed);
  auto e = gnn::parameters(mp.edge_embed);
  out.insert(out.end(), e.begin(), e.end());
  out.push_back(&mp.node_head.weight);
  out.push_back(&mp.node_head.bias);
  out.push_back(&mp.edge_head.weight);
  out.push_back(&mp.edge_head.bias);
  return out;
}

gnn::Checkpoint to_checkpoint(const MaskParams& mp) {
  gnn::Checkpoint ckpt;
  ckpt.kind = "mask-params";
  gnn::put_mlp(ckpt, "node_embed", mp.node_embed);
  gnn::put_mlp(ckpt, "edge_embed", mp.edge_embed);
  gnn::put_mlp(ckpt, "node_head", gnn::Mlp{{mp.node_head}, false});
  gnn::put_mlp(ckpt, "edge_head", gnn::Mlp{{mp.edge_head}, false});
  ckpt.scalars["temperature"] = mp.temperature;
  return ckpt;
}

MaskParams mask_from_checkpoint(const gnn::Checkpoint& ckpt) {
  if (ckpt.kind != "mask-params") throw ParseError(ckpt.kind, 0, "not a mask-params checkpoint");
  MaskParams mp;
  mp.node_embed = gnn::get_mlp(ckpt, "node_embed");
  mp.edge_embed = gnn::get_mlp(ckpt, "edge_embed");
  mp.node_head = gnn::get_mlp(ckpt, "node_head").layers.at(0);
  mp.edge_head = gnn::get_mlp(ckpt, "edge_head").layers.at(0);
  mp.temperature = ckpt.scalars.at("temperature");
  mp.validate();
  return mp;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> edge_ends(const Graph& g, bool first) {
  std::vector<std::size_t> out;
  out.reserve(g.num_edges());
  for (const Edge& e : g.edges()) out.push_back(first ? e.u : e.v);
  return out;
}

Var clipped_sigmoid(Var logits) { return ad::clamp(ad::sigmoid(logits), kProbEps, 1.0 - kProbEps); }

}  // namespace

Embeddings embed_nodes_edges(Tape& tape, const Graph& graph, const gnn::EncoderParams& enc,
                             const MaskParams& mp) {
  if (enc.output_dim() != mp.encoder_dim()) {
    throw ShapeError("embed: encoder output dim " + std::to_string(enc.output_dim()) +
                     " does not match mask input dim " + std::to_string(mp.encoder_dim()));
  }
  Var h = gnn::encode_nodes(tape, graph, enc);
  Var node = gnn::mlp_forward(tape, mp.node_embed, h);
  const auto us = edge_ends(graph, true), vs = edge_ends(graph, false);
  Var edge_feat = ad::scale(ad::add(ad::gather_rows(h, us), ad::gather_rows(h, vs)), 0.5);
  Var edge = gnn::mlp_forward(tape, mp.edge_embed, edge_feat);
  return {node, edge};
}

Var node_probability(Tape& tape, Var node_embedding, const MaskParams& mp) {
  return clipped_sigmoid(gnn::linear_forward(tape, mp.node_head, node_embedding));
}

Var edge_probability(Tape& tape, const Graph& graph, const Embeddings& emb, const MaskParams& mp) {
  const auto us = edge_ends(graph, true), vs = edge_ends(graph, false);
  Var ni = ad::gather_rows(emb.node, us);
  Var nj = ad::gather_rows(emb.node, vs);
  const Var parts[] = {ad::add(ni, nj), ad::abs(ad::sub(ni, nj)), emb.edge};
  Var fusion = ad::concat_cols(parts);
  return clipped_sigmoid(gnn::linear_forward(tape, mp.edge_head, fusion));
}

Var sample_node_mask(Var p, double t, const Tensor& u) {
  if (!(t > 0.0)) throw DomainError("mask relaxation: temperature must be positive");
  if (!u.same_shape(p.value())) {
    throw ShapeError("mask relaxation: noise " + u.shape_string() + " for probabilities " +
                     p.value().shape_string());
  }
  Tensor noise(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0 && u[i] < 1.0)) throw DomainError("mask relaxation: noise draw outside (0,1)");
    noise[i] = std::log(u[i] / (1.0 - u[i]));
  }
  Tape& tape = *p.tape();
  Var log_odds = ad::sub(ad::log(p), ad::log(ad::add_scalar(ad::neg(p), 1.0)));
  return ad::sigmoid(ad::add(ad::scale(log_odds, 1.0 / t), tape.constant(std::move(noise))));
}

Var edge_mask(Tape& tape, const Graph& graph, const Embeddings& emb, const MaskParams& mp, const Tensor& u) {
  return sample_node_mask(edge_probability(tape, graph, emb, mp), mp.temperature, u);
}

std::vector<MaskNoise> draw_noise(const Graph& graph, std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MaskNoise> out;
  out.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    MaskNoise n{Tensor(graph.num_nodes(), 1), Tensor(graph.num_edges(), 1)};
    for (double& v : n.node.values()) v = rng.uniform_open();
    for (double& v : n.edge.values()) v = rng.uniform_open();
    out.push_back(std::move(n));
  }
  return out;
}

MaskSample sample_masks(const Graph& graph, const gnn::EncoderParams& enc, const MaskParams& mp,
                        const MaskNoise& noise) {
  Tape tape;
  Embeddings emb = embed_nodes_edges(tape, graph, enc, mp);
  Var mv = sample_node_mask(node_probability(tape, emb.node, mp), mp.temperature, noise.node);
  Var me = edge_mask(tape, graph, emb, mp, noise.edge);
  return MaskSample{mv.value(), me.value(), noise};
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

Var ckl_objective(Tape& tape, const Graph& graph, const gnn::GraphClassifier& model, const MaskParams& mp,
                  std::span<const MaskNoise> noise) {
  if (noise.empty()) throw DomainError("ckl_objective: at least one sample required");
  const Tensor target = gnn::predict(tape, graph, model).value();
  Embeddings emb = embed_nodes_edges(tape, graph, model.encoder, mp);
  Var pv = node_probability(tape, emb.node, mp);
  Var pe = edge_probability(tape, graph, emb, mp);
  Var total;
  for (const MaskNoise& n : noise) {
    gnn::Masks masks{sample_node_mask(pv, mp.temperature, n.node), sample_node_mask(pe, mp.temperature, n.edge)};
    Var ce = gnn::soft_cross_entropy(gnn::predict(tape, graph, model, masks), target);
    total = total.valid() ? ad::add(total, ce) : ce;
  }
  return ad::scale(total, 1.0 / static_cast<double>(noise.size()));
}

Var ckl_objective_pinned(Tape& tape, const Graph& graph, const gnn::GraphClassifier& model) {
  const Tensor target = gnn::predict(tape, graph, model).value();
  gnn::Masks ones{tape.constant(Tensor(graph.num_nodes(), 1, 1.0)),
                  tape.constant(Tensor(graph.num_edges(), 1, 1.0))};
  return gnn::soft_cross_entropy(gnn::predict(tape, graph, model, ones), target);
}

double mean_objective(const Dataset& ds, const gnn::GraphClassifier& model, const MaskParams& mp,
                      std::size_t samples, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    Tape tape;
    const auto noise = draw_noise(ds.graphs[i], samples, derive_seed(seed, {i}));
    total += ckl_objective(tape, ds.graphs[i], model, mp, noise).value().item();
  }
  return total / static_cast<double>(ds.graphs.size());
}

MaskTrainResult train_mask(const Dataset& ds, const gnn::GraphClassifier& model, MaskParams init,
                           const MaskTrainConfig& cfg) {
  if (ds.graphs.empty()) throw DomainError("train_mask: empty dataset");
  if (cfg.samples < 1) throw DomainError("train_mask: at least one sample required");
  init.validate();

  std::vector<std::vector<MaskNoise>> noise;
  noise.reserve(ds.graphs.size());
  for (std::size_t i = 0; i < ds.graphs.size(); ++i)
    noise.push_back(draw_noise(ds.graphs[i], cfg.samples, derive_seed(cfg.seed, {i})));

  MaskTrainResult result;
  MaskParams mp = std::move(init);
  const std::vector<Tensor*> params = parameters(mp);
  optim::Adam adam(cfg.learning_rate);
  double best = std::numeric_limits<double>::infinity();
  const double inv_n = 1.0 / static_cast<double>(ds.graphs.size());

  for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
    std::vector<Tensor> grads;
    for (const Tensor* p : params) grads.emplace_back(p->rows(), p->cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
      Tape tape;
      Var l = ckl_objective(tape, ds.graphs[i], model, mp, noise[i]);
      loss += l.value().item() * inv_n;
      const ad::Gradients g = tape.backward(l);
      for (std::size_t k = 0; k < params.size(); ++k) optim::axpy(grads[k], inv_n, g.wrt(*params[k]));
    }
    if (!std::isfinite(loss) || !optim::all_finite(grads)) {
      throw TrainingError("train_mask: non-finite loss or gradient at epoch " + std::to_string(epoch) +
                          " (loss=" + std::to_string(loss) + ")");
    }
    result.loss_trace.push_back(loss);
    if (loss < best) {
      best = loss;
      result.params = mp;
      result.best_epoch = epoch;
    }
    result.best_trace.push_back(best);
    if (epoch == cfg.epochs) break;
    adam.step(params, grads);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Discrete cores
// ---------------------------------------------------------------------------

Graph CoreSubgraph::to_graph(const Graph& graph) const {
  validate(graph);
  return graph.subgraph(nodes, edges);
}

void CoreSubgraph::validate(const Graph& graph) const {
  std::vector<char> kept(graph.num_nodes(), 0);
  for (std::size_t v : nodes) {
    if (v >= graph.num_nodes()) throw DomainError("core subgraph: node outside graph");
    kept[v] = 1;
  }
  for (const Edge& e : edges) {
    if (e.u >= graph.num_nodes() || e.v >= graph.num_nodes() || !kept[e.u] || !kept[e.v]) {
      throw DomainError("core subgraph: kept edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                        ") has a dropped endpoint");
    }
    if (!std::binary_search(graph.edges().begin(), graph.edges().end(), e))
      throw DomainError("core subgraph: edge not in graph");
  }
}

SelectionProbabilities selection_probabilities(const Graph& graph, const gnn::EncoderParams& enc,
                                               const MaskParams& mp) {
  Tape tape;
  Embeddings emb = embed_nodes_edges(tape, graph, enc, mp);
  const Tensor pv = node_probability(tape, emb.node, mp).value();
  const Tensor pe = edge_probability(tape, graph, emb, mp).value();
  return {{pv.values().begin(), pv.values().end()}, {pe.values().begin(), pe.values().end()}};
}

CoreSubgraph threshold_core(const Graph& graph, const SelectionProbabilities& probs, double node_threshold,
                            double edge_threshold) {
  if (!(node_threshold > 0.0 && node_threshold < 1.0) || !(edge_threshold > 0.0 && edge_threshold < 1.0)) {
    throw DomainError("extract_core_subgraph: thresholds must lie in (0,1)");
  }
  if (probs.node.size() != graph.num_nodes() || probs.edge.size() != graph.num_edges())
    throw ShapeError("extract_core_subgraph: probability counts do not match graph");
  CoreSubgraph core;
  core.node_threshold = node_threshold;
  core.edge_threshold = edge_threshold;
  std::vector<char> kept(graph.num_nodes(), 0);
  for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
    if (probs.node[v] >= node_threshold) {
      kept[v] = 1;
      core.nodes.push_back(v);
    }
  }
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    const Edge& ed = graph.edges()[e];
    if (probs.edge[e] >= edge_threshold && kept[ed.u] && kept[ed.v]) core.edges.push_back(ed);
  }
  core.validate(graph);
  return core;
}

CoreSubgraph extract_core_subgraph(const Graph& graph, const gnn::EncoderParams& enc, const MaskParams& mp,
                                   double node_threshold, double edge_threshold) {
  return threshold_core(graph, selection_probabilities(graph, enc, mp), node_threshold, edge_threshold);
}

Fidelity fidelity(const Graph& graph, const CoreSubgraph& core, const gnn::GraphClassifier& model) {
  Fidelity f;
  f.full_pred = gnn::predict_class(graph, model);
  if (core.empty()) {
    f.empty_core = true;
    return f;
  }
  f.core_pred = gnn::predict_class(core.to_graph(graph), model);
  f.agree = f.core_pred == f.full_pred;
  return f;
}

double jaccard(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::size_t> inter, uni;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
  if (uni.empty()) return 1.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

void write_core_subgraph(std::ostream& out, const CoreSubgraph& core) {
  out << "kept_nodes " << core.nodes.size();
  for (std::size_t v : core.nodes) out << ' ' << v;
  out << '\n';
  for (const Edge& e : core.edges) out << e.u << ' ' << e.v << '\n';
}

CoreSubgraph read_core_subgraph(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("core", 1, "missing kept_nodes header");
  std::istringstream header(line);
  std::string tag;
  std::size_t k = 0;
  if (!(header >> tag >> k) || tag != "kept_nodes") throw ParseError("core", 1, "bad kept_nodes header");
  CoreSubgraph core;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t v;
    if (!(header >> v)) throw ParseError("core", 1, "header lists fewer nodes than declared");
    core.nodes.push_back(v);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Edge e;
    if (!(ls >> e.u >> e.v)) throw ParseError("core", lineno, "expected 'u v'");
    core.edges.push_back(e);
  }
  return core;
}

}  // namespace ckl::mask
