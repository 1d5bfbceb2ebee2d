#include "ckl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ckl/error.hpp"

namespace ckl::ad {

// ---------------------------------------------------------------------------
// Var / Gradients / Tape
// ---------------------------------------------------------------------------

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw Error("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(id_); }

Tensor Gradients::wrt(const Tensor& param) const {
  auto it = params_.find(&param);
  if (it == params_.end() || !grads_[it->second]) return Tensor(param.rows(), param.cols());
  return *grads_[it->second];
}

Tensor Gradients::wrt(Var v) const {
  if (v.id() >= grads_.size()) throw Error("gradient lookup for a Var from another tape");
  if (!grads_[v.id()]) return Tensor(shapes_[v.id()][0], shapes_[v.id()][1]);
  return *grads_[v.id()];
}

Tensor* Tape::GradSink::at(std::size_t id) {
  if (!tape_.nodes_[id].requires_grad) return nullptr;
  auto& slot = grads_[id];
  if (!slot) {
    const Tensor& v = tape_.nodes_[id].value;
    slot.emplace(v.rows(), v.cols());
  }
  return &*slot;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), true, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Tensor& param) {
  if (auto it = params_.find(&param); it != params_.end()) return Var(this, it->second);
  Var v = variable(param);
  params_.emplace(&param, v.id());
  return v;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  bool needs = false;
  for (std::size_t i : inputs) needs = needs || nodes_[i].requires_grad;
  Node node{std::move(value), needs, {}, {}};
  if (needs) {
    node.inputs = std::move(inputs);
    node.backward = std::move(fn);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this) throw Error("backward: loss belongs to another tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + lv.shape_string());
  }

  Gradients out;
  out.grads_.resize(nodes_.size());
  out.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.shapes_.push_back(n.value.shape());
  out.params_ = params_;

  if (nodes_[loss.id()].requires_grad) {
    GradSink sink(*this, out.grads_);
    *sink.at(loss.id()) = Tensor::scalar(1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.backward || !out.grads_[i]) continue;
      // Copy: the callback may grow other slots but never its own.
      const Tensor g = *out.grads_[i];
      n.backward(g, sink);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw Error(std::string(op) + ": operands recorded on different tapes");
  }
  return *a.tape();
}

enum class Broadcast { same, row, col, scalar };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  throw ShapeError(std::string(op) + ": shapes " + a.shape_string() + " and " + b.shape_string() +
                   " do not broadcast");
}

inline std::size_t b_index(Broadcast m, std::size_t r, std::size_t c, std::size_t cols) {
  switch (m) {
    case Broadcast::same:
      return r * cols + c;
    case Broadcast::row:
      return c;
    case Broadcast::col:
      return r;
    case Broadcast::scalar:
      return 0;
  }
  return 0;
}

template <class F, class DF>
Var unary(Var a, F&& f, DF&& df) {
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {ia},
                     [ia, df, &tape](const Tensor& g, Tape::GradSink& sink) {
                       if (Tensor* ga = sink.at(ia)) {
                         const Tensor& x = tape.value(ia);
                         for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += g[i] * df(x[i]);
                       }
                     });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: shapes " + A.shape_string() + " and " + B.shape_string() +
                     " do not conform");
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) C(i, j) += aip * B(p, j);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(C), {ia, ib},
                     [ia, ib, n, k, m, &tape](const Tensor& G, Tape::GradSink& sink) {
                       const Tensor& A = tape.value(ia);
                       const Tensor& B = tape.value(ib);
                       if (Tensor* ga = sink.at(ia)) {
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < m; ++j) s += G(i, j) * B(p, j);
                             (*ga)(i, p) += s;
                           }
                       }
                       if (Tensor* gb = sink.at(ib)) {
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = A(i, p);
                             if (aip == 0.0) continue;
                             for (std::size_t j = 0; j < m; ++j) (*gb)(p, j) += aip * G(i, j);
                           }
                       }
                     });
}

namespace {

template <class F, class DA, class DB>
Var binary(Var a, Var b, const char* op, F&& f, DA&& da, DB&& db) {
  Tape& tape = same_tape(a, b, op);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const Broadcast mode = broadcast_mode(A, B, op);
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor C(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) C(r, c) = f(A(r, c), B[b_index(mode, r, c, cols)]);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      std::move(C), {ia, ib},
      [ia, ib, mode, rows, cols, da, db, &tape](const Tensor& G, Tape::GradSink& sink) {
        const Tensor& A = tape.value(ia);
        const Tensor& B = tape.value(ib);
        Tensor* ga = sink.at(ia);
        Tensor* gb = sink.at(ib);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t bi = b_index(mode, r, c, cols);
            const double g = G(r, c);
            if (ga) (*ga)(r, c) += g * da(A(r, c), B[bi]);
            if (gb) (*gb)[bi] += g * db(A(r, c), B[bi]);
          }
      });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape* tape = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape() != tape) throw Error("concat: operands recorded on different tapes");
    if (p.rows() != rows) {
      throw ShapeError("concat: row mismatch " + parts.front().value().shape_string() + " vs " +
                       p.value().shape_string());
    }
    cols += p.cols();
    ids.push_back(p.id());
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, off + c) = v(r, c);
    offsets.push_back(off);
    off += v.cols();
  }
  return tape->record(std::move(out), ids,
                      [ids, offsets, rows, tape](const Tensor& G, Tape::GradSink& sink) {
                        for (std::size_t k = 0; k < ids.size(); ++k) {
                          Tensor* gk = sink.at(ids[k]);
                          if (!gk) continue;
                          const std::size_t w = tape->value(ids[k]).cols();
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < w; ++c) (*gk)(r, c) += G(r, offsets[k] + c);
                        }
                      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + x.shape_string());
  }
  const std::size_t rows = x.rows(), w = end - begin;
  Tensor out(rows, w);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) = x(r, begin + c);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia},
                          [ia, rows, w, begin](const Tensor& G, Tape::GradSink& sink) {
                            if (Tensor* ga = sink.at(ia))
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < w; ++c) (*ga)(r, begin + c) += G(r, c);
                          });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(s), {ia}, [ia](const Tensor& G, Tape::GradSink& sink) {
    if (Tensor* ga = sink.at(ia))
      for (double& v : ga->values()) v += G[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(1, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(0, c) += x(r, c);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia},
                          [ia, rows, cols](const Tensor& G, Tape::GradSink& sink) {
                            if (Tensor* ga = sink.at(ia))
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c) (*ga)(r, c) += G(0, c);
                          });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw DomainError("clamp: lo > hi");
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var softmax_row(Var a) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (y(r, c) = std::exp(x(r, c) - mx));
    for (std::size_t c = 0; c < cols; ++c) y(r, c) /= z;
  }
  const std::size_t ia = a.id();
  Tape* tape = a.tape();
  const std::size_t iy = tape->size();  // id the result will receive
  return tape->record(std::move(y), {ia},
                      [ia, iy, rows, cols, tape](const Tensor& G, Tape::GradSink& sink) {
                        Tensor* ga = sink.at(ia);
                        if (!ga) return;
                        const Tensor& Y = tape->value(iy);
                        for (std::size_t r = 0; r < rows; ++r) {
                          double dot = 0.0;
                          for (std::size_t c = 0; c < cols; ++c) dot += G(r, c) * Y(r, c);
                          for (std::size_t c = 0; c < cols; ++c)
                            (*ga)(r, c) += Y(r, c) * (G(r, c) - dot);
                        }
                      });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  const Tensor& x = a.value();
  const std::size_t cols = x.cols();
  Tensor out(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " outside " +
                       x.shape_string());
    }
    for (std::size_t c = 0; c < cols; ++c) out(i, c) = x(index[i], c);
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape()->record(std::move(out), {ia},
                          [ia, idx = std::move(idx), cols](const Tensor& G, Tape::GradSink& sink) {
                            if (Tensor* ga = sink.at(ia))
                              for (std::size_t i = 0; i < idx.size(); ++i)
                                for (std::size_t c = 0; c < cols; ++c) (*ga)(idx[i], c) += G(i, c);
                          });
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t out_rows) {
  const Tensor& x = a.value();
  if (index.size() != x.rows()) {
    throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " +
                     x.shape_string());
  }
  const std::size_t cols = x.cols();
  Tensor out(out_rows, cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= out_rows) {
      throw ShapeError("scatter_add_rows: index " + std::to_string(index[i]) + " >= " +
                       std::to_string(out_rows));
    }
    for (std::size_t c = 0; c < cols; ++c) out(index[i], c) += x(i, c);
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape()->record(std::move(out), {ia},
                          [ia, idx = std::move(idx), cols](const Tensor& G, Tape::GradSink& sink) {
                            if (Tensor* ga = sink.at(ia))
                              for (std::size_t i = 0; i < idx.size(); ++i)
                                for (std::size_t c = 0; c < cols; ++c) (*ga)(i, c) += G(idx[i], c);
                          });
}

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::concat: return "concat";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::log: return "log";
    case OpKind::exp: return "exp";
    case OpKind::softmax_row: return "softmax_row";
  }
  return "unknown";
}

Var forward_primitive(OpKind kind, std::span<const Var> inputs) {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ShapeError(to_string(kind) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul: arity(2); return matmul(inputs[0], inputs[1]);
    case OpKind::add: arity(2); return add(inputs[0], inputs[1]);
    case OpKind::mul: arity(2); return mul(inputs[0], inputs[1]);
    case OpKind::concat: return concat_cols(inputs);
    case OpKind::sum: arity(1); return sum(inputs[0]);
    case OpKind::mean: arity(1); return mean(inputs[0]);
    case OpKind::relu: arity(1); return relu(inputs[0]);
    case OpKind::sigmoid: arity(1); return sigmoid(inputs[0]);
    case OpKind::log: arity(1); return log(inputs[0]);
    case OpKind::exp: arity(1); return exp(inputs[0]);
    case OpKind::softmax_row: arity(1); return softmax_row(inputs[0]);
  }
  throw Error("forward_primitive: unknown op");
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

namespace {

double evaluate(const ScalarFn& f) {
  Tape tape;
  const double v = f(tape).value().item();
  if (!std::isfinite(v)) throw DomainError("finite_difference_check: f is not finite");
  return v;
}

}  // namespace

FdReport finite_difference_check(const ScalarFn& f, std::span<Tensor* const> params, double h,
                                 double tol) {
  if (!(h > 0.0)) throw DomainError("finite_difference_check: step must be positive");
  Tape tape;
  Var loss = f(tape);
  if (!std::isfinite(loss.value().item()))
    throw DomainError("finite_difference_check: f is not finite");
  const Gradients grads = tape.backward(loss);

  FdReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p];
    const Tensor analytic = grads.wrt(param);
    FdParamReport pr;
    pr.param_index = p;
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + h;
      const double fp = evaluate(f);
      param[i] = saved - h;
      const double fm = evaluate(f);
      param[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (i == 0 || rel > pr.max_rel_error) {
        pr.max_rel_error = rel;
        pr.worst_entry = i;
        pr.analytic = a;
        pr.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, pr.max_rel_error);
    report.params.push_back(pr);
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace ckl::ad
