#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lrt/core.hpp"

namespace lrt {

// Thin SVD, M = U diag(s) V^T with s nonincreasing and strictly positive.
// Values below 1e-12 * s_max are treated as zero rank.
struct SvdFactors {
  Matrix left_vectors;      // m x r, orthonormal columns
  Vector singular_values;   // r, nonincreasing, > 0
  Matrix right_vectors;     // n x r, orthonormal columns

  int rank() const { return static_cast<int>(singular_values.size()); }

  Matrix reconstruct() const {
    return left_vectors * singular_values.asDiagonal() *
           right_vectors.transpose();
  }
};

// One-sided Jacobi on the columns of the (tall) working matrix. Fixed sweep
// order and a fixed sign convention (first nonzero component of each left
// singular vector is nonnegative) make the factors bit-stable for identical
// input.
inline SvdFactors thin_svd(const Matrix& input) {
  if (!input.allFinite())
    throw InvalidInputError("thin_svd: input contains non-finite entries");

  const bool transposed = input.rows() < input.cols();
  Matrix a = transposed ? Matrix(input.transpose()) : input;
  const int q = static_cast<int>(a.cols());
  Matrix v = Matrix::Identity(q, q);

  constexpr double kPairTol = 1e-12;  // relative off-diagonal threshold
  constexpr int kMaxSweeps = 60;

  Vector colsq(q);
  for (int j = 0; j < q; ++j) colsq(j) = a.col(j).squaredNorm();

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int i = 0; i + 1 < q; ++i) {
      for (int j = i + 1; j < q; ++j) {
        const double app = colsq(i);
        const double aqq = colsq(j);
        if (app == 0.0 || aqq == 0.0) continue;
        const double apq = a.col(i).dot(a.col(j));
        if (std::abs(apq) <= kPairTol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Vector ai = a.col(i);
        a.col(i) = c * ai - s * a.col(j);
        a.col(j) = s * ai + c * a.col(j);
        const Vector vi = v.col(i);
        v.col(i) = c * vi - s * v.col(j);
        v.col(j) = s * vi + c * v.col(j);
        colsq(i) = a.col(i).squaredNorm();
        colsq(j) = a.col(j).squaredNorm();
      }
    }
    if (!rotated) break;
  }

  Vector norms(q);
  for (int j = 0; j < q; ++j) norms(j) = a.col(j).norm();

  std::vector<int> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return norms(x) > norms(y); });

  const double smax = q > 0 ? norms(order[0]) : 0.0;
  const double cutoff = 1e-12 * smax;
  int rank = 0;
  while (rank < q && norms(order[rank]) > cutoff && norms(order[rank]) > 0.0)
    ++rank;

  Matrix u_thin(a.rows(), rank);
  Matrix v_thin(q, rank);
  Vector values(rank);
  for (int k = 0; k < rank; ++k) {
    const int src = order[k];
    values(k) = norms(src);
    u_thin.col(k) = a.col(src) / norms(src);
    v_thin.col(k) = v.col(src);
    // sign convention: first nonzero entry of the left vector >= 0
    for (int i = 0; i < u_thin.rows(); ++i) {
      const double x = u_thin(i, k);
      if (x != 0.0) {
        if (x < 0.0) {
          u_thin.col(k) = -u_thin.col(k);
          v_thin.col(k) = -v_thin.col(k);
        }
        break;
      }
    }
  }

  SvdFactors f;
  if (transposed) {
    f.left_vectors = std::move(v_thin);
    f.right_vectors = std::move(u_thin);
  } else {
    f.left_vectors = std::move(u_thin);
    f.right_vectors = std::move(v_thin);
  }
  f.singular_values = std::move(values);
  return f;
}

inline double nuclear_norm(const Matrix& m) {
  return thin_svd(m).singular_values.sum();
}

inline double spectral_norm(const Matrix& m) {
  const SvdFactors f = thin_svd(m);
  return f.rank() > 0 ? f.singular_values(0) : 0.0;
}

// count of singular values above rel_tol * s_max
inline int numerical_rank(const Matrix& m, double rel_tol = 1e-6) {
  const SvdFactors f = thin_svd(m);
  if (f.rank() == 0) return 0;
  const double cut = rel_tol * f.singular_values(0);
  int r = 0;
  while (r < f.rank() && f.singular_values(r) > cut) ++r;
  return r;
}

}  // namespace lrt
