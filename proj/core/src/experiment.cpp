#include "ckl/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <type_traits>

#include "ckl/domain_adapt.hpp"
#include "ckl/error.hpp"
#include "ckl/few_shot.hpp"
#include "ckl/mask.hpp"
#include "ckl/optim.hpp"
#include "ckl/random.hpp"
#include "ckl/wl_kernel.hpp"

namespace ckl::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Command c) {
  switch (c) {
    case Command::train_mask: return "train-mask";
    case Command::adapt: return "adapt";
    case Command::fewshot: return "fewshot";
    case Command::kernel: return "kernel";
    case Command::gen_synthetic: return "gen-synthetic";
  }
  return "?";
}

Command parse_command(const std::string& s) {
  for (Command c : {Command::train_mask, Command::adapt, Command::fewshot, Command::kernel, Command::gen_synthetic})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown command '" + s + "' (expected train-mask, adapt, fewshot, kernel or gen-synthetic)");
}

// ---------------------------------------------------------------------------
// Config fields
// ---------------------------------------------------------------------------

namespace {

struct Field {
  std::string name;
  // Returns false when the JSON value has the wrong type.
  std::function<bool(ExperimentConfig&, const json&)> assign;
  std::function<json(const ExperimentConfig&)> read;
  bool is_string = false;
};

template <typename T>
Field field(std::string name, T ExperimentConfig::*member) {
  Field f;
  f.name = std::move(name);
  f.is_string = std::is_same_v<T, std::string>;
  f.assign = [member](ExperimentConfig& c, const json& j) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) return false;
      c.*member = j.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) return false;
      c.*member = j.get<double>();
    } else {
      if (!j.is_number_unsigned()) return false;
      c.*member = j.get<T>();
    }
    return true;
  };
  f.read = [member](const ExperimentConfig& c) { return json(c.*member); };
  return f;
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> all = {
      field("seed", &C::seed),
      field("out", &C::out),
      field("threads", &C::threads),
      field("dataset", &C::dataset),
      field("dataset_name", &C::dataset_name),
      field("target_dataset", &C::target_dataset),
      field("target_name", &C::target_name),
      field("pos_motif", &C::pos_motif),
      field("neg_motif", &C::neg_motif),
      field("n_per_class", &C::n_per_class),
      field("target_n_per_class", &C::target_n_per_class),
      field("background_nodes", &C::background_nodes),
      field("background_edge_prob", &C::background_edge_prob),
      field("target_background_edge_prob", &C::target_background_edge_prob),
      field("noise", &C::noise),
      field("hidden", &C::hidden),
      field("layers", &C::layers),
      field("pretrain_epochs", &C::pretrain_epochs),
      field("pretrain_lr", &C::pretrain_lr),
      field("mask_dim", &C::mask_dim),
      field("temperature", &C::temperature),
      field("mask_lr", &C::mask_lr),
      field("mask_epochs", &C::mask_epochs),
      field("samples", &C::samples),
      field("head_bias", &C::head_bias),
      field("node_threshold", &C::node_threshold),
      field("edge_threshold", &C::edge_threshold),
      field("wl_depth", &C::wl_depth),
      field("fs_num_graphs", &C::fs_num_graphs),
      field("fs_background_nodes", &C::fs_background_nodes),
      field("fs_background_edge_prob", &C::fs_background_edge_prob),
      field("heldout_task", &C::heldout_task),
      field("inner_lr", &C::inner_lr),
      field("outer_lr", &C::outer_lr),
      field("inner_steps", &C::inner_steps),
      field("shots", &C::shots),
      field("n_query", &C::n_query),
      field("episodes_per_step", &C::episodes_per_step),
      field("max_steps", &C::max_steps),
      field("eval_every", &C::eval_every),
      field("patience", &C::patience),
      field("eval_episodes", &C::eval_episodes),
      field("test_episodes", &C::test_episodes),
      field("finetune_steps", &C::finetune_steps),
  };
  return all;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields())
    if (f.name == key) return &f;
  return nullptr;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

json to_object(const ExperimentConfig& c) {
  json j = json::object();
  for (const Field& f : fields()) j[f.name] = f.read(c);
  return j;
}

}  // namespace

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.name);
  return out;
}

void ExperimentConfig::merge_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": top level must be a JSON object");
  std::vector<std::string> unknown, bad;
  for (const auto& [key, value] : j.items()) {
    const Field* f = find_field(key);
    if (!f) unknown.push_back(key);
    else if (!f->assign(*this, value)) bad.push_back(key);
  }
  std::string msg;
  if (!unknown.empty()) msg += "unknown keys: " + join(unknown);
  if (!bad.empty()) msg += std::string(msg.empty() ? "" : "; ") + "ill-typed values for: " + join(bad);
  if (!msg.empty()) throw ConfigError(origin + ": " + msg);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key: " + key);
  json j;
  if (f->is_string) {
    j = value;
  } else {
    try {
      j = json::parse(value);
    } catch (const json::parse_error&) {
      throw ConfigError("ill-typed value for " + key + ": '" + value + "'");
    }
  }
  if (!f->assign(*this, j)) throw ConfigError("ill-typed value for " + key + ": '" + value + "'");
}

std::string ExperimentConfig::to_json() const { return to_object(*this).dump(2) + "\n"; }

std::string ExperimentConfig::hash() const {
  json j = to_object(*this);
  j.erase("out");
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ExperimentConfig::validate(Command cmd) const {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* key) {
    if (!ok) bad.emplace_back(key);
  };
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  auto open01 = [](double p) { return p > 0.0 && p < 1.0; };
  const bool models = cmd == Command::train_mask || cmd == Command::adapt || cmd == Command::fewshot;
  const bool masks = cmd == Command::train_mask || cmd == Command::adapt;
  need(!out.empty(), "out");
  if (cmd != Command::fewshot) {
    need(dataset == "synthetic" || !dataset_name.empty(), "dataset_name");
    need(prob(background_edge_prob), "background_edge_prob");
    need(prob(noise), "noise");
    need(n_per_class >= 1, "n_per_class");
    try {
      parse_motif_kind(pos_motif);
    } catch (const Error&) {
      bad.emplace_back("pos_motif");
    }
    try {
      parse_motif_kind(neg_motif);
    } catch (const Error&) {
      bad.emplace_back("neg_motif");
    }
    need(pos_motif != neg_motif, "neg_motif");
  }
  if (cmd == Command::adapt || cmd == Command::kernel) {
    need(target_dataset == "synthetic" || !target_name.empty(), "target_name");
    need(prob(target_background_edge_prob), "target_background_edge_prob");
    need(target_n_per_class >= 1, "target_n_per_class");
  }
  if (models) {
    need(hidden >= 1, "hidden");
    need(layers >= 1, "layers");
  }
  if (masks) {
    need(pretrain_lr > 0.0, "pretrain_lr");
    need(mask_dim >= 1, "mask_dim");
    need(temperature > 0.0, "temperature");
    need(mask_lr > 0.0, "mask_lr");
    need(samples >= 1, "samples");
    need(open01(node_threshold), "node_threshold");
    need(open01(edge_threshold), "edge_threshold");
  }
  if (cmd == Command::fewshot) {
    need(mask_dim >= 1, "mask_dim");
    need(temperature > 0.0, "temperature");
    need(samples >= 1, "samples");
    need(fs_num_graphs >= 4, "fs_num_graphs");
    need(prob(fs_background_edge_prob), "fs_background_edge_prob");
    need(heldout_task < 3, "heldout_task");
    need(inner_lr > 0.0, "inner_lr");
    need(outer_lr > 0.0, "outer_lr");
    need(shots >= 1, "shots");
    need(n_query >= 2, "n_query");
    need(episodes_per_step >= 1, "episodes_per_step");
    need(eval_every >= 1, "eval_every");
    need(eval_episodes >= 1, "eval_episodes");
    need(test_episodes >= 1, "test_episodes");
  }
  if (!bad.empty()) throw ConfigError("invalid config for " + to_string(cmd) + ": " + join(bad));
}

ExperimentConfig load_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  cfg.merge_json(ss.str(), path.string());
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

PretrainResult pretrain_classifier(const Dataset& ds, const PretrainConfig& cfg) {
  ds.validate();
  if (ds.graphs.empty()) throw DomainError("pretrain: empty dataset");
  for (const Graph& g : ds.graphs)
    if (!g.class_label()) throw DomainError("pretrain: every graph needs a class label");

  Rng rng(cfg.seed);
  gnn::GraphClassifier model = gnn::GraphClassifier::init(ds.feature_dim, cfg.hidden, cfg.layers,
                                                          static_cast<std::size_t>(ds.num_classes), rng);
  const std::vector<ad::Tensor*> params = gnn::parameters(model);
  optim::Adam adam(cfg.learning_rate);
  const double inv_n = 1.0 / static_cast<double>(ds.graphs.size());

  PretrainResult result;
  result.model = model;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
    std::vector<ad::Tensor> grads;
    for (const ad::Tensor* p : params) grads.emplace_back(p->rows(), p->cols());
    double loss = 0.0;
    for (const Graph& g : ds.graphs) {
      ad::Tape tape;
      const ad::Var l =
          gnn::cross_entropy(gnn::predict(tape, g, model), static_cast<std::size_t>(*g.class_label()));
      loss += l.value().item() * inv_n;
      const ad::Gradients gr = tape.backward(l);
      for (std::size_t k = 0; k < params.size(); ++k) optim::axpy(grads[k], inv_n, gr.wrt(*params[k]));
    }
    if (!std::isfinite(loss) || !optim::all_finite(grads))
      throw TrainingError("pretrain: non-finite loss or gradient at epoch " + std::to_string(epoch));
    result.loss_trace.push_back(loss);
    if (loss < best) {
      best = loss;
      result.model = model;
      result.best_epoch = epoch;
    }
    if (epoch == cfg.epochs) break;
    adam.step(params, grads);
  }
  result.train_accuracy = adapt::classifier_accuracy(ds, result.model);
  return result;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

void MetricsRecord::trace(const std::string& metric, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) rows.push_back({metric, i, values[i]});
}

void MetricsRecord::scalar(const std::string& metric, double value) {
  rows.push_back({metric, 0, value});
  finals[metric] = value;
}

namespace {

std::string number(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

void write_metrics(const fs::path& dir, const MetricsRecord& rec) {
  std::string csv = "metric,step,value\n";
  for (const MetricRow& r : rec.rows) csv += r.metric + "," + std::to_string(r.step) + "," + number(r.value) + "\n";
  write_text(dir / "metrics.csv", csv);

  json j;
  j["run_id"] = rec.run_id;
  j["command"] = to_string(rec.command);
  j["config_hash"] = rec.config_hash;
  j["metrics"] = json::object();
  for (const auto& [k, v] : rec.finals) j["metrics"][k] = v;
  write_text(dir / "result.json", j.dump(2) + "\n");
}

Dataset synthetic(const ExperimentConfig& cfg, double density, std::size_t n_per_class, std::uint64_t stream) {
  const MotifSpec pos{parse_motif_kind(cfg.pos_motif), cfg.background_nodes, density, cfg.noise};
  const MotifSpec neg{parse_motif_kind(cfg.neg_motif), cfg.background_nodes, density, cfg.noise};
  return generate_planted_motif_dataset(pos, neg, n_per_class, derive_seed(cfg.seed, {stream}));
}

struct TrainedExplainer {
  PretrainResult pretrain;
  mask::MaskTrainResult mask;
};

TrainedExplainer train_explainer(const Dataset& ds, const ExperimentConfig& cfg, MetricsRecord& rec) {
  TrainedExplainer t;
  t.pretrain = pretrain_classifier(ds, {cfg.hidden, cfg.layers, cfg.pretrain_epochs, cfg.pretrain_lr,
                                        derive_seed(cfg.seed, {10})});
  rec.trace("pretrain_loss", t.pretrain.loss_trace);
  rec.scalar("train_accuracy", t.pretrain.train_accuracy);

  Rng rng(derive_seed(cfg.seed, {11}));
  mask::MaskParams init = mask::MaskParams::init(cfg.hidden, cfg.mask_dim, cfg.temperature, rng, cfg.head_bias);
  t.mask = mask::train_mask(ds, t.pretrain.model, std::move(init),
                            {cfg.mask_epochs, cfg.mask_lr, cfg.samples, derive_seed(cfg.seed, {12})});
  rec.trace("mask_loss", t.mask.loss_trace);
  rec.trace("mask_best_loss", t.mask.best_trace);
  rec.scalar("mask_best_epoch", static_cast<double>(t.mask.best_epoch));
  return t;
}

void run_train_mask(const ExperimentConfig& cfg, const fs::path& dir, MetricsRecord& rec) {
  const Dataset ds = source_dataset(cfg);
  const TrainedExplainer t = train_explainer(ds, cfg, rec);
  gnn::save_checkpoint(gnn::to_checkpoint(t.pretrain.model), dir / "classifier.json");
  gnn::save_checkpoint(mask::to_checkpoint(t.mask.params), dir / "mask.json");

  fs::create_directories(dir / "cores");
  std::size_t agree = 0, empty = 0, jaccard_ok = 0;
  double jaccard_sum = 0.0, core_nodes = 0.0;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const Graph& g = ds.graphs[i];
    const mask::CoreSubgraph core = mask::extract_core_subgraph(g, t.pretrain.model.encoder, t.mask.params,
                                                                cfg.node_threshold, cfg.edge_threshold);
    const mask::Fidelity f = mask::fidelity(g, core, t.pretrain.model);
    agree += f.agree ? 1 : 0;
    empty += f.empty_core ? 1 : 0;
    core_nodes += static_cast<double>(core.nodes.size());
    if (!ds.motifs.empty()) {
      const double jac = mask::jaccard(core.nodes, ds.motifs[i].nodes);
      jaccard_sum += jac;
      jaccard_ok += jac >= 0.5 ? 1 : 0;
    }
    std::ofstream out(dir / "cores" / ("graph_" + std::to_string(i) + ".txt"));
    mask::write_core_subgraph(out, core);
  }
  const double n = static_cast<double>(ds.graphs.size());
  rec.scalar("fidelity_rate", static_cast<double>(agree) / n);
  rec.scalar("empty_cores", static_cast<double>(empty));
  rec.scalar("mean_core_nodes", core_nodes / n);
  if (!ds.motifs.empty()) {
    rec.scalar("jaccard_mean", jaccard_sum / n);
    rec.scalar("jaccard_ge_half_fraction", static_cast<double>(jaccard_ok) / n);
  }
}

void run_adapt(const ExperimentConfig& cfg, const fs::path& dir, MetricsRecord& rec) {
  const Dataset src = source_dataset(cfg);
  const Dataset tgt = target_dataset(cfg);
  const TrainedExplainer t = train_explainer(src, cfg, rec);
  gnn::save_checkpoint(gnn::to_checkpoint(t.pretrain.model), dir / "classifier.json");
  gnn::save_checkpoint(mask::to_checkpoint(t.mask.params), dir / "mask.json");

  const adapt::AdaptationResult r = adapt::adapt_pipeline(
      src, tgt, t.pretrain.model, t.mask.params,
      {cfg.wl_depth, cfg.node_threshold, cfg.edge_threshold, cfg.threads});
  std::ofstream out(dir / "assignments.csv", std::ios::binary);
  adapt::write_assignments_csv(out, r);

  rec.scalar("source_fallbacks", static_cast<double>(r.source_fallbacks));
  rec.scalar("target_fallbacks", static_cast<double>(r.target_fallbacks));
  rec.scalar("classifier_source_accuracy", adapt::classifier_accuracy(src, t.pretrain.model));
  bool labeled = true;
  for (const Graph& g : tgt.graphs) labeled = labeled && g.class_label().has_value();
  if (labeled) rec.scalar("classifier_target_accuracy", adapt::classifier_accuracy(tgt, t.pretrain.model));
  if (r.accuracy) rec.scalar("adapt_accuracy", *r.accuracy);
}

void run_kernel(const ExperimentConfig& cfg, const fs::path& dir, MetricsRecord& rec) {
  const Dataset src = source_dataset(cfg);
  const Dataset tgt = target_dataset(cfg);
  wl::LabelDictionary dict;
  const auto s = wl::label_corpus(src.graphs, cfg.wl_depth, dict);
  const auto t = wl::label_corpus(tgt.graphs, cfg.wl_depth, dict);
  const wl::KernelMatrix km = wl::kernel_matrix(t, s, cfg.wl_depth, cfg.threads);
  std::ofstream out(dir / "kernel.csv", std::ios::binary);
  wl::write_kernel_csv(out, km);
  rec.scalar("targets", static_cast<double>(km.rows));
  rec.scalar("sources", static_cast<double>(km.cols));
  double total = 0.0;
  for (double v : km.values) total += v;
  rec.scalar("kernel_mean", total / static_cast<double>(km.values.size()));
}

void run_gen_synthetic(const ExperimentConfig& cfg, const fs::path& dir, MetricsRecord& rec) {
  const Dataset src = synthetic(cfg, cfg.background_edge_prob, cfg.n_per_class, 1);
  const Dataset tgt = synthetic(cfg, cfg.target_background_edge_prob, cfg.target_n_per_class, 2);
  save_tu_dataset(src, dir / "source");
  save_tu_dataset(tgt, dir / "target");
  rec.scalar("source_graphs", static_cast<double>(src.size()));
  rec.scalar("target_graphs", static_cast<double>(tgt.size()));
}

fewshot::MetaConfig meta_config(const ExperimentConfig& cfg) {
  fewshot::MetaConfig m;
  m.inner_lr = cfg.inner_lr;
  m.outer_lr = cfg.outer_lr;
  m.inner_steps = cfg.inner_steps;
  m.samples = cfg.samples;
  m.shots = cfg.shots;
  m.n_query = cfg.n_query;
  m.episodes_per_step = cfg.episodes_per_step;
  m.max_steps = cfg.max_steps;
  m.eval_every = cfg.eval_every;
  m.patience = cfg.patience;
  m.eval_episodes = cfg.eval_episodes;
  m.finetune_steps = cfg.finetune_steps;
  m.seed = derive_seed(cfg.seed, {22});
  return m;
}

void run_fewshot(const ExperimentConfig& cfg, const fs::path& dir, MetricsRecord& rec) {
  fewshot::TaskSpec spec;
  spec.num_graphs = cfg.fs_num_graphs;
  spec.background_nodes = cfg.fs_background_nodes;
  spec.background_edge_prob = cfg.fs_background_edge_prob;
  const fewshot::TaskData data = fewshot::generate_task_data(spec, derive_seed(cfg.seed, {20}));
  std::vector<std::size_t> train_tasks;
  for (std::size_t t = 0; t < data.num_tasks(); ++t)
    if (t != cfg.heldout_task) train_tasks.push_back(t);

  Rng rng(derive_seed(cfg.seed, {21}));
  gnn::GraphClassifier phi = gnn::GraphClassifier::init(2, cfg.hidden, cfg.layers, 2, rng);
  mask::MaskParams theta = mask::MaskParams::init(cfg.hidden, cfg.mask_dim, cfg.temperature, rng, cfg.head_bias);
  const fewshot::MetaConfig mc = meta_config(cfg);
  const fewshot::MetaTrainResult r = fewshot::meta_train(data, train_tasks, train_tasks, phi, theta, mc);
  {
    std::ofstream out(dir / "history.csv", std::ios::binary);
    fewshot::write_history_csv(out, r, train_tasks);
  }
  gnn::save_checkpoint(gnn::to_checkpoint(r.phi), dir / "phi.json");
  gnn::save_checkpoint(mask::to_checkpoint(r.theta), dir / "theta.json");

  std::vector<double> meta, val_auc;
  for (const auto& h : r.history) {
    meta.push_back(h.meta_loss);
    val_auc.push_back(h.val_query_auc);
  }
  rec.trace("meta_loss", meta);
  rec.trace("val_query_auc", val_auc);
  rec.scalar("best_step", static_cast<double>(r.best_step));
  rec.scalar("initial_meta_loss", r.initial_meta_loss);
  rec.scalar("best_meta_loss", r.best_meta_loss);
  const fewshot::TaskEvaluation ev =
      fewshot::evaluate_task(data, cfg.heldout_task, r.phi, r.theta, mc, cfg.test_episodes, derive_seed(cfg.seed, {23}));
  rec.trace("heldout_episode_auc", ev.episode_auc);
  rec.scalar("heldout_auc", ev.mean_auc);
  rec.scalar("heldout_accuracy", ev.mean_accuracy);
  rec.scalar("heldout_query_loss", ev.mean_query_loss);
}

}  // namespace

Dataset source_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset == "synthetic") return synthetic(cfg, cfg.background_edge_prob, cfg.n_per_class, 1);
  return load_tu_dataset(cfg.dataset, cfg.dataset_name);
}

Dataset target_dataset(const ExperimentConfig& cfg) {
  if (cfg.target_dataset == "synthetic")
    return synthetic(cfg, cfg.target_background_edge_prob, cfg.target_n_per_class, 2);
  return load_tu_dataset(cfg.target_dataset, cfg.target_name);
}

MetricsRecord run_command(Command cmd, const ExperimentConfig& cfg) {
  cfg.validate(cmd);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_text(dir / "config.json", cfg.to_json());

  MetricsRecord rec;
  rec.command = cmd;
  rec.config_hash = cfg.hash();
  rec.run_id = to_string(cmd) + "-" + rec.config_hash;
  try {
    switch (cmd) {
      case Command::train_mask: run_train_mask(cfg, dir, rec); break;
      case Command::adapt: run_adapt(cfg, dir, rec); break;
      case Command::fewshot: run_fewshot(cfg, dir, rec); break;
      case Command::kernel: run_kernel(cfg, dir, rec); break;
      case Command::gen_synthetic: run_gen_synthetic(cfg, dir, rec); break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw Error(to_string(cmd) + ": " + e.what());
  }
  write_metrics(dir, rec);
  return rec;
}

}  // namespace ckl::experiment
