#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "cavit/autodiff.hpp"

namespace cavit {

/// Coefficient of the tanh GELU approximation, sqrt(2/pi).
inline constexpr double kGeluCoeff = 0.7978845608;
inline constexpr double kGeluCubic = 0.044715;
inline constexpr double kLayerNormEps = 1e-6;

/// [...,M,K] x [...,K,P] -> [...,M,P]. Leading extents must be equal or absent
/// on one side, in which case that operand is shared across the batch.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

template <typename T>
Var<T> transpose_last2(Var<T> x);

template <typename T>
Var<T> softmax_lastdim(Var<T> x);

/// Normalizes every last-axis slice, then applies gamma and beta.
template <typename T>
Var<T> layernorm(Var<T> x, Var<T> gamma, Var<T> beta, double eps = kLayerNormEps);

/// Elementwise sum. `b` may have fewer leading axes (or leading extents of 1)
/// as long as its remaining extents are a suffix of `a`'s; it is then repeated.
template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> x, double s);

/// 0.5 x (1 + tanh(kGeluCoeff (x + kGeluCubic x^3)))
template <typename T>
Var<T> gelu(Var<T> x);

template <typename T>
Var<T> sum_all(Var<T> x);

template <typename T>
Var<T> mean_all(Var<T> x);

template <typename T>
Var<T> concat_axis1(Var<T> a, Var<T> b);

/// Rows [begin, end) along axis 1.
template <typename T>
Var<T> slice_axis1(Var<T> x, std::size_t begin, std::size_t end);

template <typename T>
std::pair<Var<T>, Var<T>> split_axis1(Var<T> x, std::size_t at);

template <typename T>
Var<T> reshape(Var<T> x, Shape dims);

/// [1,...] -> [batch,...]
template <typename T>
Var<T> broadcast_batch(Var<T> x, std::size_t batch);

/// [B,T,D] -> [B,H,T,D/H]
template <typename T>
Var<T> split_heads(Var<T> x, std::size_t heads);

/// [B,H,T,d] -> [B,T,H*d]
template <typename T>
Var<T> merge_heads(Var<T> x);

/// [B,C,W,W] -> [B,N,C*w*w]: non-overlapping w x w patches in row-major grid
/// order. Each patch is flattened channel-major, then row, then column.
template <typename T>
Var<T> extract_patches(Var<T> images, std::size_t patch);

/// Mean softmax cross-entropy of logits [B,K] against class ids.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::size_t> labels);

/// x W + b, with W shaped [in, out] and b shaped [out].
template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  return add(matmul(x, weight), bias);
}

}  // namespace cavit
