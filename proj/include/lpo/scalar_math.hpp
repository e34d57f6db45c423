#pragma once

#include <cmath>

namespace lpo {

/// Logistic function, evaluated without overflow for either sign.
inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(sigmoid(z)) = -softplus(-z).
inline double log_sigmoid(double z) noexcept {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

/// sgn with sgn(0) = 0.
inline double sign_of(double u) noexcept {
  return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
}

}  // namespace lpo
