#pragma once

#include <algorithm>
#include <cmath>

#include "lrt/core.hpp"
#include "lrt/svd.hpp"

namespace lrt {

// Proximal operator of the nuclear norm: shrink every singular value by mu.
inline Matrix svt(const Matrix& m, double mu) {
  if (!(mu > 0.0)) throw InvalidInputError("svt: mu must be positive");
  const SvdFactors f = thin_svd(m);
  if (f.rank() == 0) return Matrix::Zero(m.rows(), m.cols());
  Vector shrunk = (f.singular_values.array() - mu).max(0.0).matrix();
  return f.left_vectors * shrunk.asDiagonal() * f.right_vectors.transpose();
}

// Proximal operator of the (scaled) l1 norm: entrywise shrinkage.
inline Matrix soft_threshold(const Matrix& m, double mu) {
  if (!(mu > 0.0))
    throw InvalidInputError("soft_threshold: mu must be positive");
  return m.unaryExpr([mu](double x) {
    const double mag = std::abs(x) - mu;
    return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
  });
}

// Metric projection onto { Z : ||Z||_spectral <= radius }. Inputs already in
// the ball are returned unchanged, which makes the projection exactly
// idempotent.
inline Matrix project_spectral_ball(const Matrix& m, double radius) {
  if (!(radius > 0.0))
    throw InvalidInputError("project_spectral_ball: radius must be positive");
  const SvdFactors f = thin_svd(m);
  if (f.rank() == 0 || f.singular_values(0) <= radius * (1.0 + 1e-12))
    return m;
  Vector clamped = f.singular_values.cwiseMin(radius);
  return f.left_vectors * clamped.asDiagonal() * f.right_vectors.transpose();
}

// Metric projection onto { Z : ||Z||_inf <= bound }: entrywise clamp.
inline Matrix project_inf_ball(const Matrix& m, double bound) {
  if (!(bound > 0.0))
    throw InvalidInputError("project_inf_ball: bound must be positive");
  return m.cwiseMax(-bound).cwiseMin(bound);
}

}  // namespace lrt
