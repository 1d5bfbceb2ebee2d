#include "ckl/few_shot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string_view>

#include "ckl/error.hpp"
#include "ckl/optim.hpp"
#include "ckl/random.hpp"

namespace ckl::fewshot {

void TaskData::validate() const {
  if (labels.size() != task_names.size()) throw DomainError("task data: one label vector per task required");
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t].size() != graphs.size())
      throw DomainError("task data: task '" + task_names[t] + "' labels a different number of graphs");
    for (int y : labels[t])
      if (y != 0 && y != 1) throw DomainError("task data: labels must be binary");
  }
}

TaskData generate_task_data(const TaskSpec& spec, std::uint64_t seed) {
  if (spec.motifs.empty()) throw DomainError("task spec: at least one motif required");
  if (!(spec.motif_prob > 0.0 && spec.motif_prob < 1.0)) throw DomainError("task spec: motif_prob must lie in (0,1)");
  TaskData data;
  for (MotifKind k : spec.motifs) data.task_names.push_back("has_" + to_string(k));
  data.labels.assign(spec.motifs.size(), std::vector<int>(spec.num_graphs, 0));
  for (std::size_t i = 0; i < spec.num_graphs; ++i) {
    Rng pick(derive_seed(seed, {i, 0}));
    std::vector<MotifKind> kinds;
    for (std::size_t t = 0; t < spec.motifs.size(); ++t) {
      if (pick.bernoulli(spec.motif_prob)) {
        kinds.push_back(spec.motifs[t]);
        data.labels[t][i] = 1;
      }
    }
    data.graphs.push_back(generate_planted_graph(kinds, spec.background_nodes, spec.background_edge_prob, spec.noise,
                                                 derive_seed(seed, {i, 1}))
                              .graph);
  }
  return data;
}

Episode sample_episode(const TaskData& data, std::size_t task, std::size_t shots, std::size_t n_query,
                       std::uint64_t seed) {
  if (task >= data.num_tasks()) throw DomainError("sample_episode: task " + std::to_string(task) + " out of range");
  if (shots < 1) throw DomainError("sample_episode: shots must be at least 1");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < data.graphs.size(); ++i) (data.labels[task][i] ? pos : neg).push_back(i);
  const std::size_t q_pos = (n_query + 1) / 2, q_neg = n_query / 2;
  if (pos.size() < shots + q_pos) {
    throw DomainError("sample_episode: positive class of task '" + data.task_names[task] + "' has " +
                      std::to_string(pos.size()) + " graphs, needs " + std::to_string(shots + q_pos));
  }
  if (neg.size() < shots + q_neg) {
    throw DomainError("sample_episode: negative class of task '" + data.task_names[task] + "' has " +
                      std::to_string(neg.size()) + " graphs, needs " + std::to_string(shots + q_neg));
  }
  Rng rng(seed);
  const auto p = rng.sample_without_replacement(pos, shots + q_pos);
  const auto n = rng.sample_without_replacement(neg, shots + q_neg);
  Episode ep;
  ep.task = task;
  ep.support.insert(ep.support.end(), p.begin(), p.begin() + static_cast<std::ptrdiff_t>(shots));
  ep.support.insert(ep.support.end(), n.begin(), n.begin() + static_cast<std::ptrdiff_t>(shots));
  ep.support_labels.assign(shots, 1);
  ep.support_labels.resize(2 * shots, 0);
  ep.query.insert(ep.query.end(), p.begin() + static_cast<std::ptrdiff_t>(shots), p.end());
  ep.query.insert(ep.query.end(), n.begin() + static_cast<std::ptrdiff_t>(shots), n.end());
  ep.query_labels.assign(q_pos, 1);
  ep.query_labels.resize(q_pos + q_neg, 0);
  return ep;
}

void gradient_descent(const std::vector<Tensor*>& params, const LossFn& loss, double lr, std::size_t steps) {
  const optim::Sgd sgd(lr);
  for (std::size_t s = 0; s < steps; ++s) {
    Tape tape;
    const Var l = loss(tape);
    if (!l.value().all_finite()) throw TrainingError("gradient descent: non-finite loss at step " + std::to_string(s));
    const ad::Gradients g = tape.backward(l);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (const Tensor* p : params) grads.push_back(g.wrt(*p));
    if (!optim::all_finite(grads))
      throw TrainingError("gradient descent: non-finite gradient at step " + std::to_string(s));
    sgd.step(params, grads);
  }
}

void MetaConfig::validate() const {
  if (!(inner_lr > 0.0) || !(outer_lr > 0.0)) throw ConfigError("meta config: learning rates must be positive");
  if (samples < 1) throw ConfigError("meta config: samples must be at least 1");
  if (shots < 1) throw ConfigError("meta config: shots must be at least 1");
  if (n_query < 2) throw ConfigError("meta config: n_query must be at least 2 so both classes are queried");
  if (episodes_per_step < 1) throw ConfigError("meta config: episodes_per_step must be at least 1");
  if (eval_every < 1) throw ConfigError("meta config: eval_every must be at least 1");
  if (eval_episodes < 1) throw ConfigError("meta config: eval_episodes must be at least 1");
}

Var inner_loss(Tape& tape, const TaskData& data, const Episode& ep, const gnn::GraphClassifier& phi,
               const mask::MaskParams& theta, std::size_t samples, std::uint64_t seed) {
  Var total;
  for (std::size_t k = 0; k < ep.support.size(); ++k) {
    const Graph& g = data.graphs[ep.support[k]];
    const auto noise = mask::draw_noise(g, samples, derive_seed(seed, {k}));
    Var l = mask::ckl_objective(tape, g, phi, theta, noise);
    total = total.valid() ? ad::add(total, l) : l;
  }
  return ad::scale(total, 1.0 / static_cast<double>(ep.support.size()));
}

mask::MaskParams inner_update(const mask::MaskParams& theta, const gnn::GraphClassifier& phi, const TaskData& data,
                              const Episode& ep, double alpha, std::size_t steps, std::size_t samples,
                              std::uint64_t seed) {
  mask::MaskParams out = theta;
  gradient_descent(
      mask::parameters(out),
      [&](Tape& tape) { return inner_loss(tape, data, ep, phi, out, samples, seed); }, alpha, steps);
  return out;
}

gnn::Masks expected_masks(Tape& tape, const Graph& graph, const gnn::EncoderParams& enc,
                          const mask::MaskParams& theta) {
  const mask::Embeddings emb = mask::embed_nodes_edges(tape, graph, enc, theta);
  const Var pv = mask::node_probability(tape, emb.node, theta);
  const Var pe = mask::edge_probability(tape, graph, emb, theta);
  return {mask::sample_node_mask(pv, theta.temperature, Tensor(graph.num_nodes(), 1, 0.5)),
          mask::sample_node_mask(pe, theta.temperature, Tensor(graph.num_edges(), 1, 0.5))};
}

Var supervised_loss(Tape& tape, const TaskData& data, const std::vector<std::size_t>& graphs,
                    const std::vector<int>& labels, const gnn::GraphClassifier& phi, const mask::MaskParams& theta) {
  if (graphs.empty() || graphs.size() != labels.size())
    throw DomainError("supervised_loss: need one label per graph and at least one graph");
  Var total;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const Graph& g = data.graphs[graphs[k]];
    const Var p = gnn::predict(tape, g, phi, expected_masks(tape, g, phi.encoder, theta));
    const Var l = gnn::cross_entropy(p, static_cast<std::size_t>(labels[k]));
    total = total.valid() ? ad::add(total, l) : l;
  }
  return ad::scale(total, 1.0 / static_cast<double>(graphs.size()));
}

std::vector<double> positive_scores(const TaskData& data, const std::vector<std::size_t>& graphs,
                                    const gnn::GraphClassifier& phi, const mask::MaskParams& theta) {
  std::vector<double> out;
  out.reserve(graphs.size());
  for (std::size_t idx : graphs) {
    Tape tape;
    const Graph& g = data.graphs[idx];
    out.push_back(gnn::predict(tape, g, phi, expected_masks(tape, g, phi.encoder, theta)).value()(0, 1));
  }
  return out;
}

namespace {

struct QueryStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

QueryStats query_stats(const std::vector<double>& scores, const std::vector<int>& labels) {
  QueryStats s;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = labels[i] == 1 ? scores[i] : 1.0 - scores[i];
    s.loss -= std::log(std::max(p, 1e-12));
    s.accuracy += (scores[i] > 0.5) == (labels[i] == 1) ? 1.0 : 0.0;
  }
  s.loss /= static_cast<double>(scores.size());
  s.accuracy /= static_cast<double>(scores.size());
  return s;
}

// Running mean update: mean += (x - mean) / n, exact when x == mean.
void accumulate_mean(mask::MaskParams& mean, mask::MaskParams& x, std::size_t n) {
  const auto m = mask::parameters(mean);
  const auto v = mask::parameters(x);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t k = 0; k < m[i]->size(); ++k) (*m[i])[k] += ((*v[i])[k] - (*m[i])[k]) / static_cast<double>(n);
}

}  // namespace

OuterStepResult outer_step(gnn::GraphClassifier& phi, mask::MaskParams& theta, const TaskData& data,
                           const std::vector<Episode>& batch, const MetaConfig& cfg, std::uint64_t seed) {
  if (batch.empty()) throw DomainError("outer_step: empty episode batch");
  const std::vector<Tensor*> params = gnn::parameters(phi);
  std::vector<Tensor> grads;
  for (const Tensor* p : params) grads.emplace_back(p->rows(), p->cols());
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  OuterStepResult r;
  mask::MaskParams theta_mean;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Episode& ep = batch[b];
    mask::MaskParams adapted =
        inner_update(theta, phi, data, ep, cfg.inner_lr, cfg.inner_steps, cfg.samples, derive_seed(seed, {b}));
    Tape tape;
    const Var l = supervised_loss(tape, data, ep.support, ep.support_labels, phi, adapted);
    if (!l.value().all_finite()) throw TrainingError("outer_step: non-finite meta-loss");
    const ad::Gradients g = tape.backward(l);
    for (std::size_t k = 0; k < params.size(); ++k) optim::axpy(grads[k], inv_b, g.wrt(*params[k]));
    r.meta_loss += l.value().item() * inv_b;

    const QueryStats q = query_stats(positive_scores(data, ep.query, phi, adapted), ep.query_labels);
    r.query_loss += q.loss * inv_b;
    r.query_accuracy += q.accuracy * inv_b;

    if (b == 0) theta_mean = adapted;
    else accumulate_mean(theta_mean, adapted, b + 1);
  }
  if (!optim::all_finite(grads)) throw TrainingError("outer_step: non-finite meta-gradient");
  optim::Sgd(cfg.outer_lr).step(params, grads);
  theta = std::move(theta_mean);
  return r;
}

double evaluate_roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DomainError("roc_auc: scores and labels differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) throw DomainError("roc_auc: both classes must be present");
  // Rank-based Mann-Whitney U with midranks for ties.
  std::vector<std::pair<double, int>> all;
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 1) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

TaskEvaluation evaluate_task(const TaskData& data, std::size_t task, const gnn::GraphClassifier& phi,
                             const mask::MaskParams& theta, const MetaConfig& cfg, std::size_t episodes,
                             std::uint64_t seed) {
  if (episodes < 1) throw DomainError("evaluate_task: at least one episode required");
  TaskEvaluation ev;
  for (std::size_t e = 0; e < episodes; ++e) {
    const Episode ep = sample_episode(data, task, cfg.shots, cfg.n_query, derive_seed(seed, {task, e, 0}));
    const mask::MaskParams adapted = inner_update(theta, phi, data, ep, cfg.inner_lr, cfg.inner_steps, cfg.samples,
                                                  derive_seed(seed, {task, e, 1}));
    gnn::GraphClassifier tuned = phi;
    gradient_descent(
        gnn::parameters(tuned),
        [&](Tape& tape) { return supervised_loss(tape, data, ep.support, ep.support_labels, tuned, adapted); },
        cfg.outer_lr, cfg.finetune_steps);
    const std::vector<double> scores = positive_scores(data, ep.query, tuned, adapted);
    const QueryStats q = query_stats(scores, ep.query_labels);
    ev.episode_auc.push_back(evaluate_roc_auc(scores, ep.query_labels));
    ev.mean_auc += ev.episode_auc.back() / static_cast<double>(episodes);
    ev.mean_accuracy += q.accuracy / static_cast<double>(episodes);
    ev.mean_query_loss += q.loss / static_cast<double>(episodes);
  }
  return ev;
}

namespace {

std::vector<Episode> sample_batch(const TaskData& data, const std::vector<std::size_t>& tasks, const MetaConfig& cfg,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Episode> batch;
  for (std::size_t e = 0; e < cfg.episodes_per_step; ++e) {
    const std::size_t task = tasks[rng.below(tasks.size())];
    batch.push_back(sample_episode(data, task, cfg.shots, cfg.n_query, derive_seed(seed, {e})));
  }
  return batch;
}

// Training meta-loss of (phi, theta) on a fixed probe batch, without updating either.
double probe_meta_loss(const gnn::GraphClassifier& phi, const mask::MaskParams& theta, const TaskData& data,
                       const std::vector<Episode>& probe, const MetaConfig& cfg, std::uint64_t seed) {
  gnn::GraphClassifier phi_copy = phi;
  mask::MaskParams theta_copy = theta;
  return outer_step(phi_copy, theta_copy, data, probe, cfg, seed).meta_loss;
}

}  // namespace

MetaTrainResult meta_train(const TaskData& data, const std::vector<std::size_t>& train_tasks,
                           const std::vector<std::size_t>& val_tasks, gnn::GraphClassifier phi,
                           mask::MaskParams theta, const MetaConfig& cfg) {
  cfg.validate();
  data.validate();
  if (train_tasks.empty()) throw DomainError("meta_train: at least one training task required");
  if (val_tasks.empty()) throw DomainError("meta_train: at least one validation task required");

  const std::vector<Episode> probe = sample_batch(data, train_tasks, cfg, derive_seed(cfg.seed, {0}));
  const std::uint64_t probe_seed = derive_seed(cfg.seed, {1});
  const std::uint64_t val_seed = derive_seed(cfg.seed, {2});

  MetaTrainResult result;
  double best_val = 0.0;
  std::size_t bad = 0;
  auto evaluate = [&](std::size_t step) {
    HistoryRow row;
    row.step = step;
    row.meta_loss = probe_meta_loss(phi, theta, data, probe, cfg, probe_seed);
    for (std::size_t t : val_tasks) {
      const TaskEvaluation ev = evaluate_task(data, t, phi, theta, cfg, cfg.eval_episodes, val_seed);
      row.task_auc.push_back(ev.mean_auc);
      row.val_query_auc += ev.mean_auc / static_cast<double>(val_tasks.size());
      row.val_meta_loss += ev.mean_query_loss / static_cast<double>(val_tasks.size());
    }
    result.history.push_back(row);
    if (step == 0) result.initial_meta_loss = row.meta_loss;
    if (step == 0 || row.val_meta_loss < best_val) {
      best_val = row.val_meta_loss;
      bad = 0;
      result.phi = phi;
      result.theta = theta;
      result.best_step = step;
      result.best_meta_loss = row.meta_loss;
    } else {
      ++bad;
    }
  };

  evaluate(0);
  if (cfg.patience == 0) return result;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    const auto batch = sample_batch(data, train_tasks, cfg, derive_seed(cfg.seed, {3, step}));
    outer_step(phi, theta, data, batch, cfg, derive_seed(cfg.seed, {4, step}));
    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      evaluate(step);
      if (bad >= cfg.patience) break;
    }
  }
  return result;
}

void write_history_csv(std::ostream& out, const MetaTrainResult& result, const std::vector<std::size_t>& val_tasks) {
  out << "step,meta_loss,val_meta_loss,val_query_auc";
  for (std::size_t t : val_tasks) out << ",task_" << t << "_auc";
  out << '\n';
  char buf[64];
  auto num = [&](double x) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string_view(buf, static_cast<std::size_t>(end - buf));
  };
  for (const HistoryRow& r : result.history) {
    out << r.step << ',' << num(r.meta_loss) << ',' << num(r.val_meta_loss) << ',' << num(r.val_query_auc);
    for (double a : r.task_auc) out << ',' << num(a);
    out << '\n';
  }
}

}  // namespace ckl::fewshot
