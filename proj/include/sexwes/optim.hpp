// Adaptive-moment optimizer state over a flat parameter vector.

#pragma once

#include <cmath>
#include <cstddef>

#include "sexwes/linalg.hpp"

namespace sexwes {

struct AdamState {
  Vec m, v;
  long t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(Vec& params, const Vec& grads, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(0.9, t);
    const double bc2 = 1.0 - std::pow(0.999, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * grads[i];
      v[i] = 0.999 * v[i] + 0.001 * grads[i] * grads[i];
      params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
    }
  }
};

}  // namespace sexwes
