#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavit/config.hpp"

namespace cavit {

/// |analytic - numeric| / max(1, |analytic|, |numeric|)
double gradcheck_error(double analytic, double numeric);

struct GradcheckGroup {
  std::string name;  // parameter tensor name
  std::size_t scalars = 0;
  double max_error = 0;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  double max_error() const;
};

/// Compares backprop gradients of the mean cross-entropy on a random
/// two-image batch against central differences over every parameter
/// scalar, in double precision.
GradcheckReport model_gradcheck(const ModelConfig& cfg, std::uint64_t seed, double h = 1e-6);

}  // namespace cavit
