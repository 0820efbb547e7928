#include "support.hpp"

#include <algorithm>
#include <cmath>

namespace cavit::testing {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

namespace {

double projected_loss(const OpFn& op, const std::vector<Tensor<double>>& inputs,
                      const Tensor<double>* weights, Tensor<double>* weights_out, Tape<double>& tape,
                      std::vector<Var<double>>& vars, bool requires_grad, std::uint64_t seed) {
  vars.clear();
  for (const auto& in : inputs) vars.push_back(tape.leaf(in, requires_grad));
  auto y = op(vars);
  Tensor<double> r;
  if (weights) {
    r = *weights;
  } else {
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    r = random_tensor<double>(y.dims(), rng);
    *weights_out = r;
  }
  auto loss = sum_all(mul(y, tape.leaf(r)));
  if (requires_grad) tape.backward(loss);
  return loss.value()[0];
}

}  // namespace

double fd_max_error(const OpFn& op, const std::vector<Tensor<double>>& inputs,
                    std::uint64_t seed, double h) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  Tensor<double> weights;
  projected_loss(op, inputs, nullptr, &weights, tape, vars, true, seed);

  double worst = 0;
  auto perturbed = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& grad = tape.grad(vars[i]);
    for (std::size_t k = 0; k < inputs[i].numel(); ++k) {
      const double orig = inputs[i][k];
      auto loss_at = [&](double value) {
        perturbed[i][k] = value;
        Tape<double> t;
        std::vector<Var<double>> vs;
        return projected_loss(op, perturbed, &weights, nullptr, t, vs, false, seed);
      };
      const double numeric = (loss_at(orig + h) - loss_at(orig - h)) / (2 * h);
      perturbed[i][k] = orig;
      worst = std::max(worst, rel_error(grad[k], numeric));
    }
  }
  return worst;
}

Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  const std::size_t M = a.dim(0), K = a.dim(1), P = b.dim(1);
  Tensor<double> c({M, P});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < P; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < K; ++k) s += a.at({i, k}) * b.at({k, j});
      c.at({i, j}) = s;
    }
  return c;
}

NaiveAttention naive_sdpa(const Tensor<double>& q, const Tensor<double>& k,
                          const Tensor<double>& v) {
  const std::size_t B = q.dim(0), H = q.dim(1), T = q.dim(2), d = q.dim(3);
  NaiveAttention out{Tensor<double>({B, H, T, d}), Tensor<double>({B, H, T, T})};
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < T; ++i) {
        std::vector<double> score(T);
        for (std::size_t j = 0; j < T; ++j) {
          double dot = 0;
          for (std::size_t e = 0; e < d; ++e) dot += q.at({b, h, i, e}) * k.at({b, h, j, e});
          score[j] = dot * s;
        }
        const double m = *std::max_element(score.begin(), score.end());
        double z = 0;
        for (auto& x : score) z += (x = std::exp(x - m));
        for (std::size_t j = 0; j < T; ++j) out.maps.at({b, h, i, j}) = score[j] / z;
        for (std::size_t e = 0; e < d; ++e) {
          double acc = 0;
          for (std::size_t j = 0; j < T; ++j) acc += out.maps.at({b, h, i, j}) * v.at({b, h, j, e});
          out.values.at({b, h, i, e}) = acc;
        }
      }
  return out;
}

template <typename T>
Tensor<T> manual_swap_in(const Tensor<T>& x) {
  const std::size_t B = x.dim(0), N = x.dim(1) - 1, C = x.dim(2);
  Tensor<T> y({B, C + 1, N});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < N; ++j) y.at({b, 0, j}) = x.at({b, 0, j});
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t n = 0; n < N; ++n) y.at({b, c + 1, n}) = x.at({b, n + 1, c});
  }
  return y;
}

template <typename T>
Tensor<T> manual_swap_out(const Tensor<T>& y) {
  const std::size_t B = y.dim(0), C = y.dim(1) - 1, N = y.dim(2);
  Tensor<T> x({B, N + 1, C});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < C; ++j) x.at({b, 0, j}) = y.at({b, 0, j});
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) x.at({b, n + 1, c}) = y.at({b, c + 1, n});
  }
  return x;
}

template <typename T>
Tensor<T> manual_channel_stage(Tape<T>& tape, const Tensor<T>& u, const BlockParams<T>& p) {
  auto swapped = tape.leaf(manual_swap_in(u));
  auto normed = layernorm(swapped, p.chan_norm.gamma, p.chan_norm.beta);
  const Tensor<T> att = shsa(normed, p.chan_attn).values.value();
  Tensor<T> back = manual_swap_out(att);
  for (std::size_t i = 0; i < back.numel(); ++i) back[i] += u[i];
  return back;
}

std::vector<double> loop_attention_map(const Tensor<double>& attn, bool cls_row_only) {
  const std::size_t H = attn.dim(1), T = attn.dim(2), N = T - 1;
  std::vector<double> grid(N, 0.0);
  for (std::size_t key = 1; key < T; ++key) {
    double acc = 0;
    std::size_t terms = 0;
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t q = 0; q < (cls_row_only ? 1 : T); ++q) {
        acc += attn.at({0, h, q, key});
        ++terms;
      }
    grid[key - 1] = acc / static_cast<double>(terms);
  }
  const double lo = *std::min_element(grid.begin(), grid.end());
  const double hi = *std::max_element(grid.begin(), grid.end());
  for (auto& g : grid) g = hi > lo ? (g - lo) / (hi - lo) : 0.5;
  return grid;
}

template Tensor<float> manual_swap_in(const Tensor<float>&);
template Tensor<double> manual_swap_in(const Tensor<double>&);
template Tensor<float> manual_swap_out(const Tensor<float>&);
template Tensor<double> manual_swap_out(const Tensor<double>&);
template Tensor<float> manual_channel_stage(Tape<float>&, const Tensor<float>&,
                                            const BlockParams<float>&);
template Tensor<double> manual_channel_stage(Tape<double>&, const Tensor<double>&,
                                             const BlockParams<double>&);

}  // namespace cavit::testing
