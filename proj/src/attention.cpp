#include "cavit/attention.hpp"

#include <cmath>

namespace cavit {

namespace {

template <typename T>
Var<T> project(Var<T> x, Var<T> weight, Var<T> bias) {
  auto y = matmul(x, weight);
  return bias.valid() ? add(y, bias) : y;
}

}  // namespace

template <typename T>
AttentionOutput<T> sdpa(Var<T> q, Var<T> k, Var<T> v) {
  if (q.dims() != k.dims() || q.dims() != v.dims())
    throw DimensionError("sdpa operand mismatch: q " + shape_str(q.dims()) + ", k " +
                         shape_str(k.dims()) + ", v " + shape_str(v.dims()));
  const double d = static_cast<double>(q.dim(-1));
  auto scores = scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(d));
  auto attn = softmax_lastdim(scores);
  return {matmul(attn, v), attn};
}

template <typename T>
AttentionOutput<T> mhsa(Var<T> x, const AttentionWeights<T>& w, std::size_t n_heads) {
  if (x.value().rank() != 3) throw RankError("mhsa needs [B,T,D], got " + shape_str(x.dims()));
  const std::size_t D = x.dim(-1);
  if (n_heads == 0 || D % n_heads != 0)
    throw ConfigError("attention width " + std::to_string(D) + " is not divisible by " +
                      std::to_string(n_heads) + " heads");
  for (auto* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_o})
    if (m->dims() != Shape{D, D})
      throw DimensionError("attention projection " + shape_str(m->dims()) +
                           " does not match width " + std::to_string(D));
  auto q = split_heads(project(x, w.w_q, w.b_q), n_heads);
  auto k = split_heads(project(x, w.w_k, w.b_k), n_heads);
  auto v = split_heads(project(x, w.w_v, w.b_v), n_heads);
  auto heads = sdpa(q, k, v);
  return {project(merge_heads(heads.values), w.w_o, w.b_o), heads.maps};
}

template AttentionOutput<float> sdpa(Var<float>, Var<float>, Var<float>);
template AttentionOutput<double> sdpa(Var<double>, Var<double>, Var<double>);
template AttentionOutput<float> mhsa(Var<float>, const AttentionWeights<float>&, std::size_t);
template AttentionOutput<double> mhsa(Var<double>, const AttentionWeights<double>&, std::size_t);

}  // namespace cavit
