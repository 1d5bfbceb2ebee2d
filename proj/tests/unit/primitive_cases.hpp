#pragma once

// Random finite-difference cases for every differentiable primitive, shared
// by the unit tests and the acceptance run.

#include <cstddef>
#include <memory>
#include <vector>

#include "ckl/autodiff.hpp"
#include "ckl/random.hpp"
#include "test_util.hpp"

namespace ckl::test_util {

inline constexpr int kPrimitiveCaseCount = 20;

struct PrimitiveCase {
  ad::Tensor a, b, pos, m, row, col, wout;
  std::vector<std::size_t> idx, targets;
  ad::ScalarFn f;
  std::vector<ad::Tensor*> params;
};

/// Case `op` in [0, kPrimitiveCaseCount) on random shapes and values. The
/// lambdas point into the returned object, so it is heap-allocated and pinned.
inline std::unique_ptr<PrimitiveCase> make_primitive_case(int op, Rng& rng) {
  using ad::Tape;
  using ad::Tensor;
  using ad::Var;
  auto pc = std::make_unique<PrimitiveCase>();
  PrimitiveCase& k = *pc;
  const std::size_t r = 1 + rng.below(4), c = 1 + rng.below(4);
  k.a = random_tensor(r, c, rng);
  k.b = random_tensor(r, c, rng);
  k.pos = random_tensor(r, c, rng, 0.2, 2.0);
  k.m = random_tensor(c, 1 + rng.below(3), rng);
  k.row = random_tensor(1, c, rng);
  k.col = random_tensor(r, 1, rng);
  // Weighted sum so each output entry has a distinct cotangent.
  k.wout = random_tensor(r, c, rng);
  for (std::size_t i = 0; i < r + 2; ++i) k.idx.push_back(rng.below(r));
  for (std::size_t i = 0; i < r; ++i) k.targets.push_back(rng.below(2));
  k.params = {&k.a};

  auto reduce = [&k, r, c](Tape& t, Var y) {
    if (y.rows() == r && y.cols() == c) return ad::sum(ad::mul(y, t.constant(k.wout)));
    Tensor w(y.rows(), y.cols());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i);
    return ad::sum(ad::mul(y, t.constant(w)));
  };
  switch (op) {
    case 0: k.f = [&k](Tape& t) { return ad::sum(ad::matmul(t.param(k.a), t.param(k.m))); }; k.params.push_back(&k.m); break;
    case 1: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::add(t.param(k.a), t.param(k.b))); }; k.params.push_back(&k.b); break;
    case 2: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::add(t.param(k.a), t.param(k.row))); }; k.params.push_back(&k.row); break;
    case 3: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::mul(t.param(k.a), t.param(k.col))); }; k.params.push_back(&k.col); break;
    case 4: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::sub(t.param(k.a), t.param(k.b))); }; k.params.push_back(&k.b); break;
    case 5: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::mul(t.param(k.a), t.param(k.b))); }; k.params.push_back(&k.b); break;
    case 6: k.f = [&k](Tape& t) { const Var p[] = {t.param(k.a), t.param(k.b)}; return ad::sum(ad::mul(ad::concat_cols(p), ad::concat_cols(p))); }; k.params.push_back(&k.b); break;
    case 7: k.f = [&k](Tape& t) { return ad::mul(ad::mean(t.param(k.a)), ad::sum(t.param(k.a))); }; break;
    case 8: k.f = [&k](Tape& t) { return ad::sum(ad::mul(ad::sum_rows(t.param(k.a)), t.param(k.row))); }; k.params.push_back(&k.row); break;
    case 9: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::relu(t.param(k.a))); }; break;
    case 10: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::sigmoid(t.param(k.a))); }; break;
    case 11: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::log(t.param(k.pos))); }; k.params = {&k.pos}; break;
    case 12: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::exp(t.param(k.a))); }; break;
    case 13: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::softmax_row(t.param(k.a))); }; break;
    case 14: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::abs(t.param(k.a))); }; break;
    case 15: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::clamp(t.param(k.a), -0.5, 0.5)); }; break;
    case 16: k.f = [&k](Tape& t) { return ad::sum(ad::mul(ad::gather_rows(t.param(k.a), k.idx), ad::gather_rows(t.param(k.a), k.idx))); }; break;
    case 17: k.f = [&k](Tape& t) { return ad::sum(ad::mul(ad::scatter_add_rows(t.param(k.a), k.targets, 2), ad::scatter_add_rows(t.param(k.a), k.targets, 2))); }; break;
    case 18: k.f = [&k, reduce](Tape& t) { return reduce(t, ad::add_scalar(ad::scale(t.param(k.a), -2.5), 0.3)); }; break;
    case 19: k.f = [&k, c](Tape& t) { return ad::sum(ad::mul(ad::slice_cols(t.param(k.a), 0, 1), ad::slice_cols(t.param(k.a), c - 1, c))); }; break;
  }
  return pc;
}

}  // namespace ckl::test_util
