#pragma once

// Test-only helpers: random inputs, a finite-difference gradient checker and
// loop-based reference implementations used as oracles.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cavit/attention.hpp"
#include "cavit/model.hpp"

namespace cavit::testing {

template <typename T>
Tensor<T> random_tensor(Shape dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(dims));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

/// |a - n| / max(1, |a|, |n|)
double rel_error(double analytic, double numeric);

using OpFn = std::function<Var<double>(std::span<const Var<double>>)>;

/// Backprop vs central differences for the scalar sum(op(inputs) * R), R a
/// seeded random tensor shaped like the op's output. Returns the largest
/// rel_error over every input scalar.
double fd_max_error(const OpFn& op, const std::vector<Tensor<double>>& inputs,
                    std::uint64_t seed, double h = 1e-6);

/// Row-major [M,K] x [K,P] by three nested loops.
Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b);

struct NaiveAttention {
  Tensor<double> values;  // [B,H,T,d]
  Tensor<double> maps;    // [B,H,T,T]
};
/// softmax(q k^T / sqrt(d)) v, one (batch, head, query) row at a time.
NaiveAttention naive_sdpa(const Tensor<double>& q, const Tensor<double>& k,
                          const Tensor<double>& v);

/// [B,N+1,C] -> [B,C+1,N] by explicit indexing; the CLS row is copied as is (C == N).
template <typename T>
Tensor<T> manual_swap_in(const Tensor<T>& x);
/// [B,C+1,N] -> [B,N+1,C] by explicit indexing.
template <typename T>
Tensor<T> manual_swap_out(const Tensor<T>& y);

/// Channel stage residual output u + untranspose(shsa(norm(transpose(u)))),
/// with both transpositions done by hand. Identity CLS mapping only.
template <typename T>
Tensor<T> manual_channel_stage(Tape<T>& tape, const Tensor<T>& u, const BlockParams<T>& p);

/// Head- and query-averaged map from a [1,H,T,T] tensor with explicit loops,
/// CLS key dropped, min-max normalized (constant -> 0.5).
std::vector<double> loop_attention_map(const Tensor<double>& attn, bool cls_row_only);

}  // namespace cavit::testing
