#include "cavit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cavit/train.hpp"

namespace cavit {

double gradcheck_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

double GradcheckReport::max_error() const {
  double m = 0;
  for (const auto& g : groups) m = std::max(m, g.max_error);
  return m;
}

namespace {

double loss_of(const Model<double>& model, const Tensor<double>& images,
               std::span<const std::size_t> labels) {
  Tape<double> tape;
  auto bound = model.params().bind(tape);
  auto fwd = model.forward(tape.leaf(images, false), bound);
  return cross_entropy(fwd.logits, labels).value()[0];
}

}  // namespace

GradcheckReport model_gradcheck(const ModelConfig& cfg, std::uint64_t seed, double h) {
  Model<double> model(cfg, seed);
  // Move every parameter off its init value so zero biases and unit gains
  // do not hide errors in the terms they multiply.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for (auto& e : model.params().entries())
    for (auto& v : e.value.data()) v += jitter(rng);

  const std::size_t W = cfg.image_size;
  Tensor<double> images({2, cfg.in_channels, W, W});
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  for (auto& v : images.data()) v = pixel(rng);
  const std::vector<std::size_t> labels{0, 1 % cfg.n_classes};

  loss_and_grads(model, images, labels);

  GradcheckReport report;
  for (auto& e : model.params().entries()) {
    GradcheckGroup g{e.name, e.value.numel(), 0};
    auto values = e.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = loss_of(model, images, labels);
      values[i] = orig - h;
      const double down = loss_of(model, images, labels);
      values[i] = orig;
      g.max_error = std::max(g.max_error, gradcheck_error(e.grad[i], (up - down) / (2 * h)));
    }
    report.groups.push_back(std::move(g));
  }
  return report;
}

}  // namespace cavit
