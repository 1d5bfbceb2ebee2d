#include "ckl/gnn.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ckl/error.hpp"

namespace ckl::gnn {

Linear Linear::glorot(std::size_t in, std::size_t out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  Linear l{Tensor(in, out), Tensor(1, out)};
  for (double& w : l.weight.values()) w = rng.uniform(-a, a);
  return l;
}

Linear Linear::identity(std::size_t n) { return Linear{Tensor::identity(n), Tensor(1, n)}; }

Linear Linear::zeros(std::size_t in, std::size_t out) { return Linear{Tensor(in, out), Tensor(1, out)}; }

Mlp Mlp::two_layer(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, bool relu_output) {
  Mlp m;
  m.layers.push_back(Linear::glorot(in, hidden, rng));
  m.layers.push_back(Linear::glorot(hidden, out, rng));
  m.relu_output = relu_output;
  return m;
}

Mlp Mlp::identity(std::size_t n, std::size_t depth, bool relu_output) {
  Mlp m;
  for (std::size_t i = 0; i < depth; ++i) m.layers.push_back(Linear::identity(n));
  m.relu_output = relu_output;
  return m;
}

EncoderParams EncoderParams::init(std::size_t input_dim, std::size_t hidden, std::size_t num_layers,
                                  Rng& rng) {
  if (num_layers == 0) throw ShapeError("encoder: at least one layer required");
  EncoderParams enc;
  for (std::size_t k = 0; k < num_layers; ++k) {
    enc.layers.push_back(GinLayer{Mlp::two_layer(k == 0 ? input_dim : hidden, hidden, hidden, rng, true), 0.0});
  }
  return enc;
}

void EncoderParams::validate() const {
  if (layers.empty()) throw ShapeError("encoder: at least one layer required");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Mlp& m = layers[k].mlp;
    if (m.layers.empty()) throw ShapeError("encoder: empty MLP in layer " + std::to_string(k));
    for (std::size_t i = 1; i < m.layers.size(); ++i)
      if (m.layers[i].in_dim() != m.layers[i - 1].out_dim())
        throw ShapeError("encoder: MLP dims do not chain in layer " + std::to_string(k));
    if (k > 0 && m.in_dim() != layers[k - 1].mlp.out_dim())
      throw ShapeError("encoder: layer " + std::to_string(k) + " input dim does not match previous output");
  }
}

ClassifierParams ClassifierParams::init(std::size_t embedding_dim, std::size_t num_classes, Rng& rng) {
  return ClassifierParams{Mlp::two_layer(embedding_dim, embedding_dim, num_classes, rng, false)};
}

GraphClassifier GraphClassifier::init(std::size_t input_dim, std::size_t hidden, std::size_t num_layers,
                                      std::size_t num_classes, Rng& rng) {
  GraphClassifier m;
  m.encoder = EncoderParams::init(input_dim, hidden, num_layers, rng);
  m.classifier = ClassifierParams::init(hidden, num_classes, rng);
  return m;
}

Var linear_forward(Tape& tape, const Linear& layer, Var x) {
  if (x.cols() != layer.in_dim()) {
    throw ShapeError("linear: input " + x.value().shape_string() + " for weight " +
                     layer.weight.shape_string());
  }
  return ad::add(ad::matmul(x, tape.param(layer.weight)), tape.param(layer.bias));
}

Var mlp_forward(Tape& tape, const Mlp& mlp, Var x) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = linear_forward(tape, mlp.layers[i], x);
    if (i + 1 < mlp.layers.size() || mlp.relu_output) x = ad::relu(x);
  }
  return x;
}

namespace {

void check_mask(const std::optional<Var>& mask, std::size_t rows, const char* what) {
  if (!mask) return;
  const Tensor& m = mask->value();
  if (m.rows() != rows || m.cols() != 1) {
    throw ShapeError(std::string(what) + " mask shape " + m.shape_string() + ", expected [" +
                     std::to_string(rows) + "x1]");
  }
  for (double v : m.values())
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(what) + " mask entry outside [0,1]");
}

}  // namespace

Var gin_layer_forward(Tape& tape, Var h, const Graph& graph, const GinLayer& layer, const Masks& masks) {
  const std::size_t n = graph.num_nodes();
  if (h.rows() != n) throw ShapeError("gin: " + std::to_string(h.rows()) + " rows for " + std::to_string(n) + " nodes");
  if (h.cols() != layer.mlp.in_dim()) {
    throw ShapeError("gin: input dim " + std::to_string(h.cols()) + ", layer expects " +
                     std::to_string(layer.mlp.in_dim()));
  }
  check_mask(masks.node, n, "node");
  check_mask(masks.edge, graph.num_edges(), "edge");

  Var hm = masks.node ? ad::mul(h, *masks.node) : h;
  Var msg = ad::gather_rows(hm, graph.message_sources());
  if (masks.edge) msg = ad::mul(msg, ad::gather_rows(*masks.edge, graph.message_edges()));
  Var agg = ad::scatter_add_rows(msg, graph.message_targets(), n);
  Var self = layer.epsilon == 0.0 ? hm : ad::scale(hm, 1.0 + layer.epsilon);
  return mlp_forward(tape, layer.mlp, ad::add(self, agg));
}

Var encode_nodes(Tape& tape, const Graph& graph, const EncoderParams& enc, const Masks& masks) {
  Var h = tape.constant(graph.node_features());
  for (const GinLayer& layer : enc.layers) h = gin_layer_forward(tape, h, graph, layer, masks);
  return h;
}

Var readout(Var h, std::optional<Var> node_mask) {
  if (h.rows() == 0) throw ShapeError("readout: empty node matrix");
  if (node_mask) {
    if (node_mask->rows() != h.rows() || node_mask->cols() != 1)
      throw ShapeError("readout: mask shape " + node_mask->value().shape_string() + " for " + h.value().shape_string());
    h = ad::mul(h, *node_mask);
  }
  return ad::sum_rows(h);
}

Var classify(Tape& tape, Var z, const ClassifierParams& clf) {
  if (z.rows() != 1) throw ShapeError("classify: expected a 1 x H embedding, got " + z.value().shape_string());
  return ad::softmax_row(mlp_forward(tape, clf.mlp, z));
}

Var predict(Tape& tape, const Graph& graph, const GraphClassifier& model, const Masks& masks) {
  Var h = encode_nodes(tape, graph, model.encoder, masks);
  return classify(tape, readout(h, masks.node), model.classifier);
}

std::vector<double> predict_proba(const Graph& graph, const GraphClassifier& model) {
  Tape tape;
  const Tensor& p = predict(tape, graph, model).value();
  return {p.values().begin(), p.values().end()};
}

std::size_t predict_class(const Graph& graph, const GraphClassifier& model) {
  const auto p = predict_proba(graph, model);
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c)
    if (p[c] > p[best]) best = c;
  return best;
}

Var soft_cross_entropy(Var p, const Tensor& target) {
  if (!p.value().same_shape(target)) {
    throw ShapeError("cross_entropy: probabilities " + p.value().shape_string() + " vs target " +
                     target.shape_string());
  }
  Tape& tape = *p.tape();
  Var logp = ad::log(ad::clamp(p, 1e-12, INFINITY));
  return ad::neg(ad::sum(ad::mul(logp, tape.constant(target))));
}

Var cross_entropy(Var p, std::size_t y) {
  if (p.rows() != 1) throw ShapeError("cross_entropy: expected a 1 x C row");
  if (y >= p.cols()) {
    throw DomainError("cross_entropy: class " + std::to_string(y) + " outside [0," + std::to_string(p.cols()) + ")");
  }
  Tensor onehot(1, p.cols());
  onehot[y] = 1.0;
  return soft_cross_entropy(p, onehot);
}

std::vector<Tensor*> parameters(Mlp& mlp) {
  std::vector<Tensor*> out;
  for (Linear& l : mlp.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<Tensor*> parameters(EncoderParams& enc) {
  std::vector<Tensor*> out;
  for (GinLayer& layer : enc.layers) {
    auto p = parameters(layer.mlp);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Tensor*> parameters(ClassifierParams& clf) { return parameters(clf.mlp); }

std::vector<Tensor*> parameters(GraphClassifier& model) {
  auto out = parameters(model.encoder);
  auto c = parameters(model.classifier);
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kFormat = "ckl-checkpoint";
constexpr int kVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = ckpt.kind;
  j["tensors"] = nlohmann::json::object();
  for (const auto& [name, t] : ckpt.tensors) {
    j["tensors"][name] = {{"shape", {t.rows(), t.cols()}}, {"values", t.storage()}};
  }
  j["scalars"] = nlohmann::json::object();
  for (const auto& [name, v] : ckpt.scalars) j["scalars"][name] = v;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion) {
    throw ParseError(path.string(), 0, "not a version 1 ckl checkpoint");
  }
  Checkpoint ckpt;
  ckpt.kind = j.value("kind", "");
  for (const auto& [name, t] : j.at("tensors").items()) {
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw ParseError(path.string(), 0, "tensor " + name + " is not two-dimensional");
    ckpt.tensors.emplace(name, Tensor(shape[0], shape[1], t.at("values").get<std::vector<double>>()));
  }
  for (const auto& [name, v] : j.at("scalars").items()) ckpt.scalars.emplace(name, v.get<double>());
  return ckpt;
}

void put_mlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    ckpt.tensors[prefix + "." + std::to_string(i) + ".weight"] = mlp.layers[i].weight;
    ckpt.tensors[prefix + "." + std::to_string(i) + ".bias"] = mlp.layers[i].bias;
  }
  ckpt.scalars[prefix + ".depth"] = static_cast<double>(mlp.layers.size());
  ckpt.scalars[prefix + ".relu_output"] = mlp.relu_output ? 1.0 : 0.0;
}

Mlp get_mlp(const Checkpoint& ckpt, const std::string& prefix) {
  auto scalar = [&](const std::string& key) {
    auto it = ckpt.scalars.find(key);
    if (it == ckpt.scalars.end()) throw ParseError(ckpt.kind, 0, "checkpoint lacks " + key);
    return it->second;
  };
  auto tensor = [&](const std::string& key) {
    auto it = ckpt.tensors.find(key);
    if (it == ckpt.tensors.end()) throw ParseError(ckpt.kind, 0, "checkpoint lacks " + key);
    return it->second;
  };
  Mlp m;
  const auto depth = static_cast<std::size_t>(scalar(prefix + ".depth"));
  for (std::size_t i = 0; i < depth; ++i) {
    m.layers.push_back(Linear{tensor(prefix + "." + std::to_string(i) + ".weight"),
                              tensor(prefix + "." + std::to_string(i) + ".bias")});
  }
  m.relu_output = scalar(prefix + ".relu_output") != 0.0;
  return m;
}

Checkpoint to_checkpoint(const GraphClassifier& model) {
  Checkpoint ckpt;
  ckpt.kind = "graph-classifier";
  ckpt.scalars["encoder.layers"] = static_cast<double>(model.encoder.layers.size());
  for (std::size_t k = 0; k < model.encoder.layers.size(); ++k) {
    const std::string p = "encoder." + std::to_string(k);
    put_mlp(ckpt, p + ".mlp", model.encoder.layers[k].mlp);
    ckpt.scalars[p + ".epsilon"] = model.encoder.layers[k].epsilon;
  }
  put_mlp(ckpt, "classifier", model.classifier.mlp);
  return ckpt;
}

GraphClassifier classifier_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "graph-classifier") throw ParseError(ckpt.kind, 0, "not a graph-classifier checkpoint");
  GraphClassifier m;
  const auto layers = static_cast<std::size_t>(ckpt.scalars.at("encoder.layers"));
  for (std::size_t k = 0; k < layers; ++k) {
    const std::string p = "encoder." + std::to_string(k);
    m.encoder.layers.push_back(GinLayer{get_mlp(ckpt, p + ".mlp"), ckpt.scalars.at(p + ".epsilon")});
  }
  m.encoder.validate();
  m.classifier.mlp = get_mlp(ckpt, "classifier");
  return m;
}

}  // namespace ckl::gnn
