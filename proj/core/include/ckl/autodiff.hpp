#pragma once

// Reverse-mode differentiation over dense tensors.
//
// A Tape records every operation applied to Vars created from it. Nodes are
// appended in evaluation order, so the record is always topologically sorted
// and backward() is a single reverse sweep. Gradients are written into a
// buffer owned by the returned Gradients object; the tape itself is never
// mutated by backward(), so repeated calls yield bitwise-identical results.
//
// Parameters enter a trace through Tape::param(const Tensor&). The tape keys
// parameters by address, so a tensor bound twice maps to one leaf and its
// gradient accumulates across every use.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ckl/tensor.hpp"

namespace ckl::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Result of a backward sweep.
class Gradients {
 public:
  /// Gradient for a bound parameter; zeros of the parameter's shape when the
  /// parameter did not influence the loss or was never bound.
  Tensor wrt(const Tensor& param) const;
  /// Gradient for any recorded Var (zeros when it does not require grad).
  Tensor wrt(Var v) const;

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
  std::vector<std::array<std::size_t, 2>> shapes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
};

class Tape {
 public:
  /// Accumulation target passed to backward functions.
  class GradSink {
   public:
    /// Gradient buffer of node `id`, or nullptr when the node does not
    /// require a gradient.
    Tensor* at(std::size_t id);

   private:
    friend class Tape;
    GradSink(const Tape& tape, std::vector<std::optional<Tensor>>& grads)
        : tape_(tape), grads_(grads) {}
    const Tape& tape_;
    std::vector<std::optional<Tensor>>& grads_;
  };

  using BackwardFn = std::function<void(const Tensor& grad_out, GradSink& sink)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value that never receives a gradient (data, frozen noise draws).
  Var constant(Tensor value);
  /// Free leaf that receives a gradient but is not tied to a parameter.
  Var variable(Tensor value);
  /// Leaf bound to `param`. Binding the same tensor again returns the same
  /// Var. The value is copied at bind time.
  Var param(const Tensor& param);

  /// Gradients of the scalar `loss` with respect to every leaf requiring
  /// one. Throws ShapeError for a non-scalar loss.
  Gradients backward(Var loss) const;

  /// Records an op result. `inputs` are ids of the operands; `fn` is only
  /// retained when at least one operand requires a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
};

// ---------------------------------------------------------------------------
// Primitives. Binary elementwise ops accept a right operand of the same shape
// or one that broadcasts: a 1 x C row, an R x 1 column, or a 1 x 1 scalar.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

/// Horizontal concatenation; all parts share a row count.
Var concat_cols(std::span<const Var> parts);
/// Columns [begin, end) of `a`.
Var slice_cols(Var a, std::size_t begin, std::size_t end);

/// Sum of all entries, as 1 x 1.
Var sum(Var a);
/// Mean of all entries, as 1 x 1.
Var mean(Var a);
/// Column sums, as 1 x C.
Var sum_rows(Var a);

Var relu(Var a);
Var sigmoid(Var a);
/// Natural log. Every entry must be strictly positive.
Var log(Var a);
Var exp(Var a);
Var abs(Var a);
/// Row-wise softmax.
Var softmax_row(Var a);
/// Entries clipped to [lo, hi]; zero gradient where clipped.
Var clamp(Var a, double lo, double hi);

/// Rows of `a` selected by `index` (repeats allowed).
Var gather_rows(Var a, std::span<const std::size_t> index);
/// Row i of `a` is added into output row index[i]; output has `out_rows` rows.
Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t out_rows);

/// Dispatch form of the core primitive set.
enum class OpKind { matmul, add, mul, concat, sum, mean, relu, sigmoid, log, exp, softmax_row };

std::string to_string(OpKind kind);
Var forward_primitive(OpKind kind, std::span<const Var> inputs);

// ---------------------------------------------------------------------------
// Finite-difference gradient check.
// ---------------------------------------------------------------------------

struct FdParamReport {
  std::size_t param_index = 0;
  double max_rel_error = 0.0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct FdReport {
  std::vector<FdParamReport> params;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Scalar function of parameters: builds a trace on the given tape, binding
/// each checked tensor with Tape::param, and returns the 1 x 1 loss.
using ScalarFn = std::function<Var(Tape&)>;

/// Compares backward() against central differences with step h. The
/// relative error of an entry is |a - n| / max(|a|, |n|, 1e-8).
/// `params` are perturbed in place and restored before returning.
/// Throws DomainError when f evaluates to a non-finite value.
FdReport finite_difference_check(const ScalarFn& f, std::span<Tensor* const> params, double h,
                                 double tol);

}  // namespace ckl::ad
