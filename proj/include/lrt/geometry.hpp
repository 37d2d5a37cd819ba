#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "lrt/core.hpp"

namespace lrt {

// Rectangular sampling window. (x0, y0) is the scene coordinate of the first
// sample; the grid has `width` columns and `height` rows, one pixel apart.
struct Window {
  double x0 = 0.0;
  double y0 = 0.0;
  int width = 0;
  int height = 0;

  double cx() const { return x0 + 0.5 * (width - 1); }
  double cy() const { return y0 + 0.5 * (height - 1); }
};

inline void validate_window(const Window& w) {
  if (w.width < 2 || w.height < 2)
    throw InvalidInputError("window must be at least 2x2 pixels");
}

// Deviation from the identity transform on window-centered coordinates:
// u -> (I + dA) u + dt, with parameters (da11, da12, da21, da22, dt1, dt2).
// p = 0 is the identity; outer-loop composition is additive on p.
struct AffineParams {
  Eigen::Matrix<double, 6, 1> p = Eigen::Matrix<double, 6, 1>::Zero();

  static AffineParams identity() { return AffineParams{}; }

  static AffineParams rotation(double theta) {
    AffineParams t;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    t.p << c - 1.0, -s, s, c - 1.0, 0.0, 0.0;
    return t;
  }

  Eigen::Matrix2d linear() const {
    Eigen::Matrix2d a;
    a << 1.0 + p(0), p(1), p(2), 1.0 + p(3);
    return a;
  }

  Eigen::Vector2d translation() const { return {p(4), p(5)}; }

  AffineParams& operator+=(const Eigen::Matrix<double, 6, 1>& inc) {
    p += inc;
    return *this;
  }
};

// Rotation angle of the orthogonal polar factor of (I + dA).
inline double rotation_angle(const AffineParams& t) {
  const Eigen::Matrix2d a = t.linear();
  return std::atan2(a(1, 0) - a(0, 1), a(0, 0) + a(1, 1));
}

namespace detail {

struct BilinearSample {
  double value = 0.0;
  double gx = 0.0;  // d value / d x of the interpolant at the sample point
  double gy = 0.0;
};

// Bilinear lookup with coordinates clamped up to 0.5 px beyond the grid.
// Clamped coordinates have zero derivative along the clamped axis. Callers
// must have bounds-checked against the 0.5 px envelope already.
inline BilinearSample sample_bilinear(const GrayImage& img, double x,
                                      double y) {
  const int w = static_cast<int>(img.cols());
  const int h = static_cast<int>(img.rows());
  bool clamped_x = false;
  bool clamped_y = false;
  if (x < 0.0) {
    x = 0.0;
    clamped_x = true;
  } else if (x > w - 1.0) {
    x = w - 1.0;
    clamped_x = true;
  }
  if (y < 0.0) {
    y = 0.0;
    clamped_y = true;
  } else if (y > h - 1.0) {
    y = h - 1.0;
    clamped_y = true;
  }
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 > w - 2) x0 = w - 2;
  if (y0 > h - 2) y0 = h - 2;
  const double wx = x - x0;
  const double wy = y - y0;
  const double v00 = img(y0, x0);
  const double v01 = img(y0, x0 + 1);
  const double v10 = img(y0 + 1, x0);
  const double v11 = img(y0 + 1, x0 + 1);
  BilinearSample s;
  s.value = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
            wy * ((1.0 - wx) * v10 + wx * v11);
  s.gx = clamped_x ? 0.0 : (1.0 - wy) * (v01 - v00) + wy * (v11 - v10);
  s.gy = clamped_y ? 0.0 : (1.0 - wx) * (v10 - v00) + wx * (v11 - v01);
  return s;
}

inline void check_corners(const GrayImage& scene, const AffineParams& tau,
                          const Window& w, double margin) {
  const Eigen::Matrix2d a = tau.linear();
  const Eigen::Vector2d t = tau.translation();
  const double cx = w.cx();
  const double cy = w.cy();
  const double xmin = -margin;
  const double xmax = scene.cols() - 1.0 + margin;
  const double ymin = -margin;
  const double ymax = scene.rows() - 1.0 + margin;
  const char* names[4] = {"top-left", "top-right", "bottom-left",
                          "bottom-right"};
  const double us[4] = {w.x0 - cx, w.x0 + w.width - 1.0 - cx, w.x0 - cx,
                        w.x0 + w.width - 1.0 - cx};
  const double vs[4] = {w.y0 - cy, w.y0 - cy, w.y0 + w.height - 1.0 - cy,
                        w.y0 + w.height - 1.0 - cy};
  for (int k = 0; k < 4; ++k) {
    const double px = a(0, 0) * us[k] + a(0, 1) * vs[k] + t(0) + cx;
    const double py = a(1, 0) * us[k] + a(1, 1) * vs[k] + t(1) + cy;
    if (px < xmin || px > xmax || py < ymin || py > ymax)
      throw OutOfBoundsError(
          "warp: " + std::string(names[k]) + " window corner maps to (" +
          std::to_string(px) + ", " + std::to_string(py) +
          ") outside the scene");
  }
}

}  // namespace detail

// D o tau on the window grid: output(i, j) samples the scene at
// (I + dA) u_ij + dt + c, where u_ij are window-centered grid coordinates.
inline GrayImage warp(const GrayImage& scene, const AffineParams& tau,
                      const Window& w) {
  validate_window(w);
  detail::check_corners(scene, tau, w, 0.5);
  const Eigen::Matrix2d a = tau.linear();
  const Eigen::Vector2d t = tau.translation();
  const double cx = w.cx();
  const double cy = w.cy();
  GrayImage out(w.height, w.width);
  for (int j = 0; j < w.width; ++j) {
    const double ux = w.x0 + j - cx;
    for (int i = 0; i < w.height; ++i) {
      const double uy = w.y0 + i - cy;
      const double px = a(0, 0) * ux + a(0, 1) * uy + t(0) + cx;
      const double py = a(1, 0) * ux + a(1, 1) * uy + t(1) + cy;
      out(i, j) = detail::sample_bilinear(scene, px, py).value;
    }
  }
  return out;
}

// Scale to unit Frobenius norm; returns the original norm for records.
inline std::pair<GrayImage, double> normalize(const GrayImage& d) {
  const double norm = d.norm();
  if (norm == 0.0)
    throw DegenerateInputError("normalize: window is identically zero");
  return {d / norm, norm};
}

// Center-fixing constraint A_t dtau = 0. In window-centered coordinates the
// center is u = 0, so A_t picks out the translation components and its null
// space is spanned by the four dA directions.
inline std::pair<Eigen::Matrix<double, 2, 6>, Eigen::Matrix<double, 6, 4>>
center_constraint(const Window&) {
  Eigen::Matrix<double, 2, 6> a_t = Eigen::Matrix<double, 2, 6>::Zero();
  a_t(0, 4) = 1.0;
  a_t(1, 5) = 1.0;
  Eigen::Matrix<double, 6, 4> z = Eigen::Matrix<double, 6, 4>::Zero();
  for (int k = 0; k < 4; ++k) z(k, k) = 1.0;
  return {a_t, z};
}

// Linear map from the reduced increment space to window-sized matrices:
// apply = J, adjoint = J*, gram_solve = (J*J)^{-1}. Immutable once built.
class JacobianOperator {
 public:
  JacobianOperator() = default;

  JacobianOperator(Matrix basis, Eigen::MatrixXd null_basis, int rows,
                   int cols, bool data_in_range)
      : basis_(std::move(basis)),
        null_basis_(std::move(null_basis)),
        rows_(rows),
        cols_(cols),
        data_in_range_(data_in_range) {
    gram_ = basis_.transpose() * basis_;
    llt_.compute(gram_);
    if (llt_.info() != Eigen::Success) {
      const double ridge =
          1e-12 * gram_.trace() / static_cast<double>(gram_.rows());
      gram_ += ridge * Matrix::Identity(gram_.rows(), gram_.cols());
      llt_.compute(gram_);
      if (llt_.info() != Eigen::Success)
        throw DegenerateInputError(
            "jacobian: gram matrix is not positive definite");
    }
  }

  int q() const { return static_cast<int>(basis_.cols()); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Matrix& basis() const { return basis_; }
  const Eigen::MatrixXd& null_basis() const { return null_basis_; }
  bool data_in_range() const { return data_in_range_; }
  double frobenius_norm() const { return basis_.norm(); }

  // J beta as a window-sized matrix (column-major stacking)
  Matrix apply(const Vector& beta) const {
    Vector v = basis_ * beta;
    return Eigen::Map<const Matrix>(v.data(), rows_, cols_);
  }

  // J* M
  Vector adjoint(const Matrix& m) const {
    return basis_.transpose() *
           Eigen::Map<const Vector>(m.data(), rows_ * cols_);
  }

  Vector gram_solve(const Vector& r) const { return llt_.solve(r); }

  // T = J (J*J)^{-1} J*, the orthogonal projector onto range(J)
  Matrix project_onto_range(const Matrix& m) const {
    return apply(gram_solve(adjoint(m)));
  }

  // full 6-parameter increment for a reduced increment beta
  Eigen::Matrix<double, 6, 1> lift(const Vector& beta) const {
    return null_basis_ * beta;
  }

 private:
  Matrix basis_;            // mn x q
  Matrix gram_;             // q x q
  Eigen::LLT<Matrix> llt_;
  Eigen::MatrixXd null_basis_;  // 6 x q
  int rows_ = 0;
  int cols_ = 0;
  bool data_in_range_ = false;
};

// Jacobian of the normalized warp with respect to the reduced transform
// parameters, at tau. Columns are restricted to increment directions in the
// span of null_basis. Gradients of the bilinear interpolant are composed
// with the affine coordinate derivative, then the quotient rule
// (I - v v^T / ||v||^2) / ||v|| maps raw derivatives to the unit sphere.
inline JacobianOperator jacobian(
    const GrayImage& scene, const AffineParams& tau, const Window& w,
    const Eigen::Matrix<double, 6, Eigen::Dynamic>& null_basis) {
  validate_window(w);
  detail::check_corners(scene, tau, w, -0.5);  // interior margin
  const int q = static_cast<int>(null_basis.cols());
  const int mn = w.width * w.height;
  const Eigen::Matrix2d a = tau.linear();
  const Eigen::Vector2d t = tau.translation();
  const double cx = w.cx();
  const double cy = w.cy();

  Vector values(mn);
  Matrix raw(mn, q);
  for (int j = 0; j < w.width; ++j) {
    const double ux = w.x0 + j - cx;
    for (int i = 0; i < w.height; ++i) {
      const double uy = w.y0 + i - cy;
      const double px = a(0, 0) * ux + a(0, 1) * uy + t(0) + cx;
      const double py = a(1, 0) * ux + a(1, 1) * uy + t(1) + cy;
      const auto s = detail::sample_bilinear(scene, px, py);
      const int row = i + j * w.height;
      values(row) = s.value;
      for (int k = 0; k < q; ++k) {
        const auto& z = null_basis.col(k);
        const double dpx = ux * z(0) + uy * z(1) + z(4);
        const double dpy = ux * z(2) + uy * z(3) + z(5);
        raw(row, k) = s.gx * dpx + s.gy * dpy;
      }
    }
  }

  const double nv = values.norm();
  if (nv == 0.0)
    throw DegenerateInputError("jacobian: warped window is identically zero");

  // rank-deficiency warning: raw window content inside the raw column span
  bool data_in_range = false;
  if (raw.norm() > 0.0) {
    const Vector coeffs = raw.colPivHouseholderQr().solve(values);
    data_in_range = (values - raw * coeffs).norm() <= 1e-8 * nv;
  }

  const Vector unit = values / nv;
  Matrix basis(mn, q);
  for (int k = 0; k < q; ++k)
    basis.col(k) = (raw.col(k) - unit * unit.dot(raw.col(k))) / nv;

  if (basis.norm() < 1e-10)
    throw DegenerateInputError(
        "jacobian: window content makes the Jacobian numerically zero");

  return JacobianOperator(std::move(basis), null_basis, w.height, w.width,
                          data_in_range);
}

}  // namespace lrt
