#pragma once

#include <cmath>
#include <random>
#include <string>

#include "jtm/numerics/tensor.hpp"

namespace jtm::numerics {

// Uniform in [−1/√fan_in, 1/√fan_in], fan_in = number of columns (or the
// length of a vector).
inline Parameter uniform_parameter(std::string name, Shape shape, std::mt19937_64& rng) {
  Tensor t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return Parameter(std::move(name), std::move(t));
}

inline Parameter zero_parameter(std::string name, Shape shape) {
  return Parameter(std::move(name), Tensor(std::move(shape), 0.0));
}

}  // namespace jtm::numerics
