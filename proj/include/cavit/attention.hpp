#pragma once

#include <cstddef>

#include "cavit/ops.hpp"

namespace cavit {

/// Q, K, V and output projections of one attention stage, bound to a tape.
/// Weights are [D,D] in x W orientation. A default-constructed (invalid)
/// bias Var means the projection has no bias.
template <typename T>
struct AttentionWeights {
  Var<T> w_q, w_k, w_v, w_o;
  Var<T> b_q, b_k, b_v, b_o;
};

template <typename T>
struct AttentionOutput {
  Var<T> values;  // [B,T,D]
  Var<T> maps;    // [B,H,T,T], post-softmax
};

/// softmax(q k^T / sqrt(d)) v over [B,H,T,d] operands.
template <typename T>
AttentionOutput<T> sdpa(Var<T> q, Var<T> k, Var<T> v);

/// Multi-head self-attention over the token axis of x [B,T,D].
template <typename T>
AttentionOutput<T> mhsa(Var<T> x, const AttentionWeights<T>& w, std::size_t n_heads);

/// Single-head self-attention; identical to mhsa with one head.
template <typename T>
AttentionOutput<T> shsa(Var<T> x, const AttentionWeights<T>& w) {
  return mhsa(x, w, 1);
}

}  // namespace cavit
