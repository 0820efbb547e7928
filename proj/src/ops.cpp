#include "cavit/ops.hpp"

#include <algorithm>
#include <cmath>

namespace cavit {

namespace {

template <typename T>
void same_tape(Var<T> a, Var<T> b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

Shape leading(const Shape& s, std::size_t keep_back) {
  return Shape(s.begin(), s.end() - static_cast<std::ptrdiff_t>(keep_back));
}

// C[M,P] += A[M,K] B[K,P]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = a[i * k + kk];
      const T* brow = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[M,K] += G[M,P] B[K,P]^T
template <typename T>
void gemm_nt(const T* g, const T* b, T* da, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T* brow = b + kk * p;
      T acc = 0;
      for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
      da[i * k + kk] += acc;
    }
  }
}

// dB[K,P] += A[M,K]^T G[M,P]
template <typename T>
void gemm_tn(const T* a, const T* g, T* db, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = a[i * k + kk];
      T* drow = db + kk * p;
      for (std::size_t j = 0; j < p; ++j) drow[j] += av * grow[j];
    }
  }
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() < 2 || bv.rank() < 2)
    throw RankError("matmul needs rank >= 2 operands, got " + shape_str(av.dims()) + " and " +
                    shape_str(bv.dims()));
  const std::size_t m = av.dim(-2), k = av.dim(-1), k2 = bv.dim(-2), p = bv.dim(-1);
  const Shape la = leading(av.dims(), 2), lb = leading(bv.dims(), 2);
  if (k != k2 || (!la.empty() && !lb.empty() && la != lb))
    throw DimensionError("matmul shape mismatch: " + shape_str(av.dims()) + " x " +
                         shape_str(bv.dims()));
  const bool a_batched = !la.empty(), b_batched = !lb.empty();
  Shape out_dims = a_batched ? la : lb;
  const std::size_t batch = shape_numel(out_dims);
  out_dims.push_back(m);
  out_dims.push_back(p);

  Tensor<T> out(out_dims);
  for (std::size_t i = 0; i < batch; ++i) {
    gemm_nn(av.data().data() + (a_batched ? i * m * k : 0),
            bv.data().data() + (b_batched ? i * k * p : 0), out.data().data() + i * m * p, m, k,
            p);
  }
  FlopCounter::add_matmul(static_cast<std::uint64_t>(batch) * m * k * p);

  auto& tape = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      OpKind::kMatmul, {ia, ib}, std::move(out),
      [=](const Tensor<T>& g, Tape<T>& t) {
        const auto& A = t.value(ia);
        const auto& B = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor<T> da(A.dims());
          for (std::size_t i = 0; i < batch; ++i)
            gemm_nt(g.data().data() + i * m * p, B.data().data() + (b_batched ? i * k * p : 0),
                    da.data().data() + (a_batched ? i * m * k : 0), m, k, p);
          t.accumulate(ia, da);
        }
        if (t.requires_grad(ib)) {
          Tensor<T> db(B.dims());
          for (std::size_t i = 0; i < batch; ++i)
            gemm_tn(A.data().data() + (a_batched ? i * m * k : 0), g.data().data() + i * m * p,
                    db.data().data() + (b_batched ? i * k * p : 0), m, k, p);
          t.accumulate(ib, db);
        }
      });
}

namespace {

template <typename T>
Tensor<T> transpose_tensor(const Tensor<T>& x) {
  const std::size_t r = x.dim(-2), c = x.dim(-1);
  Shape dims = x.dims();
  std::swap(dims[dims.size() - 1], dims[dims.size() - 2]);
  Tensor<T> out(dims);
  const std::size_t batch = x.numel() / (r * c);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dst[b * r * c + j * r + i] = src[b * r * c + i * c + j];
  return out;
}

}  // namespace

template <typename T>
Var<T> transpose_last2(Var<T> x) {
  if (x.value().rank() < 2)
    throw RankError("transpose_last2 needs rank >= 2, got " + shape_str(x.dims()));
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::kTransposeLast2, {ix}, transpose_tensor(x.value()),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           t.accumulate(ix, transpose_tensor(g));
                         });
}

template <typename T>
Var<T> softmax_lastdim(Var<T> x) {
  const auto& xv = x.value();
  const std::size_t d = xv.dim(-1);
  const std::size_t rows = xv.numel() / d;
  Tensor<T> out(xv.dims());
  auto src = xv.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = src.data() + r * d;
    T* o = dst.data() + r * d;
    const T mx = *std::max_element(in, in + d);
    T sum = 0;
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < d; ++j) o[j] /= sum;
  }
  const std::size_t ix = x.id();
  Tensor<T> saved = out;
  return x.tape().record(
      OpKind::kSoftmax, {ix}, std::move(out),
      [=, y = std::move(saved)](const Tensor<T>& g, Tape<T>& t) {
        Tensor<T> dx(y.dims());
        for (std::size_t r = 0; r < rows; ++r) {
          const T* yr = y.data().data() + r * d;
          const T* gr = g.data().data() + r * d;
          T dot = 0;
          for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
          T* o = dx.data().data() + r * d;
          for (std::size_t j = 0; j < d; ++j) o[j] = yr[j] * (gr[j] - dot);
        }
        t.accumulate(ix, dx);
      });
}

template <typename T>
Var<T> layernorm(Var<T> x, Var<T> gamma, Var<T> beta, double eps) {
  same_tape(x, gamma);
  same_tape(x, beta);
  const auto& xv = x.value();
  const std::size_t d = xv.dim(-1);
  if (gamma.value().dims() != Shape{d} || beta.value().dims() != Shape{d})
    throw DimensionError("layernorm affine shapes " + shape_str(gamma.dims()) + ", " +
                         shape_str(beta.dims()) + " do not match last extent of " +
                         shape_str(xv.dims()));
  const std::size_t rows = xv.numel() / d;
  Tensor<T> out(xv.dims());
  Tensor<T> xhat(xv.dims());
  std::vector<T> rstd(rows);
  const auto gv = gamma.value().data();
  const auto bv = beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data().data() + r * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(eps));
    rstd[r] = rs;
    T* xh = xhat.data().data() + r * d;
    T* o = out.data().data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (in[j] - mean) * rs;
      o[j] = xh[j] * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record(
      OpKind::kLayerNorm, {ix, ig, ib}, std::move(out),
      [=, xhat = std::move(xhat), rstd = std::move(rstd)](const Tensor<T>& g, Tape<T>& t) {
        const auto gam = t.value(ig).data();
        Tensor<T> dx(xhat.dims());
        Tensor<T> dgamma({d});
        Tensor<T> dbeta({d});
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g.data().data() + r * d;
          const T* xh = xhat.data().data() + r * d;
          T mean_dxh = 0, mean_dxh_xh = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const T dxh = gr[j] * gam[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[j];
            dgamma[j] += gr[j] * xh[j];
            dbeta[j] += gr[j];
          }
          mean_dxh /= static_cast<T>(d);
          mean_dxh_xh /= static_cast<T>(d);
          T* o = dx.data().data() + r * d;
          for (std::size_t j = 0; j < d; ++j)
            o[j] = rstd[r] * (gr[j] * gam[j] - mean_dxh - xh[j] * mean_dxh_xh);
        }
        t.accumulate(ix, dx);
        t.accumulate(ig, dgamma);
        t.accumulate(ib, dbeta);
      });
}

namespace {

// Number of times `b` repeats inside `a` under suffix broadcasting, or 0.
std::size_t suffix_repeats(const Shape& a, const Shape& b) {
  std::size_t first = 0;
  while (b.size() - first > 1 && b[first] == 1) ++first;
  const std::size_t len = b.size() - first;
  if (len > a.size()) return 0;
  if (!std::equal(b.begin() + static_cast<std::ptrdiff_t>(first), b.end(),
                  a.end() - static_cast<std::ptrdiff_t>(len)))
    return 0;
  return shape_numel(a) / shape_numel(b);
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t reps = suffix_repeats(av.dims(), bv.dims());
  if (reps == 0)
    throw DimensionError("add shape mismatch: " + shape_str(av.dims()) + " + " +
                         shape_str(bv.dims()));
  const std::size_t n = bv.numel();
  Tensor<T> out = av;
  auto o = out.data();
  auto src = bv.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t i = 0; i < n; ++i) o[r * n + i] += src[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Shape bdims = bv.dims();
  return a.tape().record(OpKind::kAdd, {ia, ib}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           t.accumulate(ia, g);
                           if (!t.requires_grad(ib)) return;
                           Tensor<T> db(bdims);
                           auto d = db.data();
                           auto gs = g.data();
                           for (std::size_t r = 0; r < reps; ++r)
                             for (std::size_t i = 0; i < n; ++i) d[i] += gs[r * n + i];
                           t.accumulate(ib, db);
                         });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.dims() != bv.dims())
    throw DimensionError("mul shape mismatch: " + shape_str(av.dims()) + " * " +
                         shape_str(bv.dims()));
  Tensor<T> out(av.dims());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kMul, {ia, ib}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           const auto& A = t.value(ia);
                           const auto& B = t.value(ib);
                           Tensor<T> da(A.dims()), db(B.dims());
                           for (std::size_t i = 0; i < g.numel(); ++i) {
                             da[i] = g[i] * B[i];
                             db[i] = g[i] * A[i];
                           }
                           t.accumulate(ia, da);
                           t.accumulate(ib, db);
                         });
}

template <typename T>
Var<T> scale(Var<T> x, double s) {
  const T f = static_cast<T>(s);
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v *= f;
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::kScale, {ix}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           Tensor<T> dx = g;
                           for (auto& v : dx.data()) v *= f;
                           t.accumulate(ix, dx);
                         });
}

template <typename T>
Var<T> gelu(Var<T> x) {
  const T k = static_cast<T>(kGeluCoeff);
  const T c = static_cast<T>(kGeluCubic);
  const auto& xv = x.value();
  Tensor<T> out(xv.dims());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    const T v = xv[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(k * (v + c * v * v * v)));
  }
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::kGelu, {ix}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           const auto& X = t.value(ix);
                           Tensor<T> dx(X.dims());
                           for (std::size_t i = 0; i < X.numel(); ++i) {
                             const T v = X[i];
                             const T th = std::tanh(k * (v + c * v * v * v));
                             const T dinner = k * (T(1) + T(3) * c * v * v);
                             dx[i] = g[i] * (T(0.5) * (T(1) + th) +
                                             T(0.5) * v * (T(1) - th * th) * dinner);
                           }
                           t.accumulate(ix, dx);
                         });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  T s = 0;
  for (auto v : x.value().data()) s += v;
  const std::size_t ix = x.id();
  const Shape dims = x.dims();
  return x.tape().record(OpKind::kSum, {ix}, Tensor<T>::scalar(s),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           t.accumulate(ix, Tensor<T>::full(dims, g[0]));
                         });
}

template <typename T>
Var<T> mean_all(Var<T> x) {
  const std::size_t n = x.value().numel();
  T s = 0;
  for (auto v : x.value().data()) s += v;
  const std::size_t ix = x.id();
  const Shape dims = x.dims();
  return x.tape().record(OpKind::kMean, {ix}, Tensor<T>::scalar(s / static_cast<T>(n)),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           t.accumulate(ix, Tensor<T>::full(dims, g[0] / static_cast<T>(n)));
                         });
}

template <typename T>
Var<T> concat_axis1(Var<T> a, Var<T> b) {
  same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() < 2 || av.rank() != bv.rank())
    throw RankError("concat_axis1 needs equal ranks >= 2, got " + shape_str(av.dims()) + " and " +
                    shape_str(bv.dims()));
  for (std::size_t i = 0; i < av.rank(); ++i)
    if (i != 1 && av.dims()[i] != bv.dims()[i])
      throw DimensionError("concat_axis1 shape mismatch: " + shape_str(av.dims()) + " and " +
                           shape_str(bv.dims()));
  const std::size_t outer = av.dims()[0];
  const std::size_t ca = av.numel() / outer, cb = bv.numel() / outer;
  Shape dims = av.dims();
  dims[1] += bv.dims()[1];
  Tensor<T> out(dims);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(av.data().data() + o * ca, ca, out.data().data() + o * (ca + cb));
    std::copy_n(bv.data().data() + o * cb, cb, out.data().data() + o * (ca + cb) + ca);
  }
  const std::size_t ia = a.id(), ib = b.id();
  const Shape adims = av.dims(), bdims = bv.dims();
  return a.tape().record(OpKind::kConcat1, {ia, ib}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           Tensor<T> da(adims), db(bdims);
                           for (std::size_t o = 0; o < outer; ++o) {
                             std::copy_n(g.data().data() + o * (ca + cb), ca,
                                         da.data().data() + o * ca);
                             std::copy_n(g.data().data() + o * (ca + cb) + ca, cb,
                                         db.data().data() + o * cb);
                           }
                           t.accumulate(ia, da);
                           t.accumulate(ib, db);
                         });
}

template <typename T>
Var<T> slice_axis1(Var<T> x, std::size_t begin, std::size_t end) {
  const auto& xv = x.value();
  if (xv.rank() < 2) throw RankError("slice_axis1 needs rank >= 2, got " + shape_str(xv.dims()));
  const std::size_t ext = xv.dims()[1];
  if (begin >= end || end > ext)
    throw IndexError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for axis 1 of " + shape_str(xv.dims()));
  const std::size_t outer = xv.dims()[0];
  const std::size_t inner = xv.numel() / (outer * ext);
  Shape dims = xv.dims();
  dims[1] = end - begin;
  Tensor<T> out(dims);
  const std::size_t len = (end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.data().data() + o * ext * inner + begin * inner, len,
                out.data().data() + o * len);
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::kSlice1, {ix}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           for (std::size_t o = 0; o < outer; ++o)
                             t.accumulate_range(ix, o * ext * inner + begin * inner,
                                                g.data().subspan(o * len, len));
                         });
}

template <typename T>
std::pair<Var<T>, Var<T>> split_axis1(Var<T> x, std::size_t at) {
  if (x.value().rank() < 2)
    throw RankError("split_axis1 needs rank >= 2, got " + shape_str(x.dims()));
  const std::size_t ext = x.dims()[1];
  if (at == 0 || at >= ext)
    throw IndexError("split index " + std::to_string(at) + " out of bounds for axis 1 of " +
                     shape_str(x.dims()));
  return {slice_axis1(x, 0, at), slice_axis1(x, at, ext)};
}

template <typename T>
Var<T> reshape(Var<T> x, Shape dims) {
  Tensor<T> out = x.value().reshaped(std::move(dims));
  const std::size_t ix = x.id();
  const Shape src = x.dims();
  return x.tape().record(OpKind::kReshape, {ix}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           t.accumulate(ix, g.reshaped(src));
                         });
}

template <typename T>
Var<T> broadcast_batch(Var<T> x, std::size_t batch) {
  const auto& xv = x.value();
  if (xv.dims()[0] != 1)
    throw DimensionError("broadcast_batch needs leading extent 1, got " + shape_str(xv.dims()));
  Shape dims = xv.dims();
  dims[0] = batch;
  Tensor<T> out(dims);
  const std::size_t n = xv.numel();
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(xv.data().data(), n, out.data().data() + b * n);
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::kBroadcastBatch, {ix}, std::move(out),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           for (std::size_t b = 0; b < batch; ++b)
                             t.accumulate_range(ix, 0, g.data().subspan(b * n, n));
                         });
}

namespace {

// [B,T,H,d] <-> [B,H,T,d]; `forward` selects the direction.
template <typename T>
Tensor<T> permute_heads(const Tensor<T>& x, std::size_t B, std::size_t Tn, std::size_t H,
                        std::size_t d, bool forward) {
  Tensor<T> out(forward ? Shape{B, H, Tn, d} : Shape{B, Tn, H * d});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < Tn; ++t)
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t tok = ((b * Tn + t) * H + h) * d;
        const std::size_t head = ((b * H + h) * Tn + t) * d;
        if (forward)
          std::copy_n(src.data() + tok, d, dst.data() + head);
        else
          std::copy_n(src.data() + head, d, dst.data() + tok);
      }
  return out;
}

}  // namespace

template <typename T>
Var<T> split_heads(Var<T> x, std::size_t heads) {
  const auto& xv = x.value();
  if (xv.rank() != 3) throw RankError("split_heads needs [B,T,D], got " + shape_str(xv.dims()));
  const std::size_t B = xv.dims()[0], Tn = xv.dims()[1], D = xv.dims()[2];
  if (heads == 0 || D % heads != 0)
    throw ConfigError("width " + std::to_string(D) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  const std::size_t d = D / heads;
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::kSplitHeads, {ix}, permute_heads(xv, B, Tn, heads, d, true),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           t.accumulate(ix, permute_heads(g, B, Tn, heads, d, false));
                         });
}

template <typename T>
Var<T> merge_heads(Var<T> x) {
  const auto& xv = x.value();
  if (xv.rank() != 4) throw RankError("merge_heads needs [B,H,T,d], got " + shape_str(xv.dims()));
  const std::size_t B = xv.dims()[0], H = xv.dims()[1], Tn = xv.dims()[2], d = xv.dims()[3];
  const std::size_t ix = x.id();
  return x.tape().record(OpKind::kMergeHeads, {ix}, permute_heads(xv, B, Tn, H, d, false),
                         [=](const Tensor<T>& g, Tape<T>& t) {
                           t.accumulate(ix, permute_heads(g, B, Tn, H, d, true));
                         });
}

template <typename T>
Var<T> extract_patches(Var<T> images, std::size_t patch) {
  const auto& iv = images.value();
  if (iv.rank() != 4)
    throw RankError("extract_patches needs [B,C,H,W], got " + shape_str(iv.dims()));
  const std::size_t B = iv.dims()[0], C = iv.dims()[1], H = iv.dims()[2], W = iv.dims()[3];
  if (patch == 0 || H % patch != 0 || W % patch != 0)
    throw DimensionError("image " + shape_str(iv.dims()) + " is not divisible into " +
                         std::to_string(patch) + "x" + std::to_string(patch) + " patches");
  const std::size_t gh = H / patch, gw = W / patch;
  const std::size_t N = gh * gw, F = C * patch * patch;
  // Flat source offset of each (token, feature) pair.
  std::vector<std::size_t> index(N * F);
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t dy = 0; dy < patch; ++dy)
          for (std::size_t dx = 0; dx < patch; ++dx) {
            const std::size_t tok = py * gw + px;
            const std::size_t f = (c * patch + dy) * patch + dx;
            index[tok * F + f] = (c * H + py * patch + dy) * W + px * patch + dx;
          }
  Tensor<T> out({B, N, F});
  const std::size_t img = C * H * W;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < N * F; ++i) out[b * N * F + i] = iv[b * img + index[i]];
  const std::size_t ix = images.id();
  const Shape dims = iv.dims();
  return images.tape().record(
      OpKind::kPatches, {ix}, std::move(out),
      [=, index = std::move(index)](const Tensor<T>& g, Tape<T>& t) {
        Tensor<T> dx(dims);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t i = 0; i < N * F; ++i) dx[b * img + index[i]] += g[b * N * F + i];
        t.accumulate(ix, dx);
      });
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::size_t> labels) {
  const auto& lv = logits.value();
  if (lv.rank() != 2) throw RankError("cross_entropy needs [B,K], got " + shape_str(lv.dims()));
  const std::size_t B = lv.dims()[0], K = lv.dims()[1];
  if (labels.size() != B)
    throw DimensionError("cross_entropy got " + std::to_string(labels.size()) + " labels for " +
                         shape_str(lv.dims()));
  Tensor<T> probs(lv.dims());
  T loss = 0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= K)
      throw IndexError("label " + std::to_string(labels[b]) + " >= class count " +
                       std::to_string(K));
    const T* row = lv.data().data() + b * K;
    T* p = probs.data().data() + b * K;
    const T mx = *std::max_element(row, row + K);
    T sum = 0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(row[k] - mx);
    const T lse = mx + std::log(sum);
    for (std::size_t k = 0; k < K; ++k) p[k] = std::exp(row[k] - lse);
    loss += lse - row[labels[b]];
  }
  loss /= static_cast<T>(B);
  const std::size_t il = logits.id();
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return logits.tape().record(
      OpKind::kCrossEntropy, {il}, Tensor<T>::scalar(loss),
      [=, probs = std::move(probs), lab = std::move(lab)](const Tensor<T>& g, Tape<T>& t) {
        Tensor<T> dl = probs;
        for (std::size_t b = 0; b < B; ++b) dl[b * K + lab[b]] -= T(1);
        const T f = g[0] / static_cast<T>(B);
        for (auto& v : dl.data()) v *= f;
        t.accumulate(il, dl);
      });
}

#define CAVIT_INSTANTIATE_OPS(T)                                                  \
  template Var<T> matmul(Var<T>, Var<T>);                                         \
  template Var<T> transpose_last2(Var<T>);                                        \
  template Var<T> softmax_lastdim(Var<T>);                                        \
  template Var<T> layernorm(Var<T>, Var<T>, Var<T>, double);                      \
  template Var<T> add(Var<T>, Var<T>);                                            \
  template Var<T> mul(Var<T>, Var<T>);                                            \
  template Var<T> scale(Var<T>, double);                                          \
  template Var<T> gelu(Var<T>);                                                   \
  template Var<T> sum_all(Var<T>);                                                \
  template Var<T> mean_all(Var<T>);                                               \
  template Var<T> concat_axis1(Var<T>, Var<T>);                                   \
  template Var<T> slice_axis1(Var<T>, std::size_t, std::size_t);                  \
  template std::pair<Var<T>, Var<T>> split_axis1(Var<T>, std::size_t);            \
  template Var<T> reshape(Var<T>, Shape);                                         \
  template Var<T> broadcast_batch(Var<T>, std::size_t);                           \
  template Var<T> split_heads(Var<T>, std::size_t);                               \
  template Var<T> merge_heads(Var<T>);                                            \
  template Var<T> extract_patches(Var<T>, std::size_t);                           \
  template Var<T> cross_entropy(Var<T>, std::span<const std::size_t>);

CAVIT_INSTANTIATE_OPS(float)
CAVIT_INSTANTIATE_OPS(double)

#undef CAVIT_INSTANTIATE_OPS

}  // namespace cavit
