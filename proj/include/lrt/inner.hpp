#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "lrt/core.hpp"
#include "lrt/geometry.hpp"
#include "lrt/prox.hpp"
#include "lrt/svd.hpp"

namespace lrt {

constexpr double kGoldenRatio = 1.6180339887498949;  // (1 + sqrt 5) / 2

// Linearized subproblem data:
//   min ||X||_* + lambda ||E||_1  s.t.  D + J dtau = X + E
// with D the unit-Frobenius-norm warped window.
struct InnerProblem {
  Matrix d_tau;
  JacobianOperator jac;
  double lambda = 0.0;
  Eigen::Matrix<double, 2, 6> a_t = default_center_matrix();

  static Eigen::Matrix<double, 2, 6> default_center_matrix() {
    Eigen::Matrix<double, 2, 6> a = Eigen::Matrix<double, 2, 6>::Zero();
    a(0, 4) = 1.0;
    a(1, 5) = 1.0;
    return a;
  }
};

struct SolverState {
  Matrix X, E, Y;
  Vector dtau;
  double sigma = 1.0;
  // relaxation shadow copies, used only by the generalized variant
  Matrix X_shadow, E_shadow, Y_shadow;
  Vector dtau_shadow;

  static SolverState zeros(int rows, int cols, int q, double sigma0,
                           bool with_shadow = false) {
    SolverState s;
    s.X = Matrix::Zero(rows, cols);
    s.E = Matrix::Zero(rows, cols);
    s.Y = Matrix::Zero(rows, cols);
    s.dtau = Vector::Zero(q);
    s.sigma = sigma0;
    if (with_shadow) {
      s.X_shadow = s.X;
      s.E_shadow = s.E;
      s.Y_shadow = s.Y;
      s.dtau_shadow = s.dtau;
    }
    return s;
  }
};

struct KktResiduals {
  double eta_P = 0.0;
  double eta_D = 0.0;
  double eta_X = 0.0;
  double eta_E = 0.0;
  double eta = 0.0;
};

struct InnerConfig {
  double tol = 1e-3;
  int max_iter = 1000;
  double xi = 1.618;    // multiplier step length, in (0, (1+sqrt5)/2)
  double rho = 1.8;     // relaxation factor for the generalized variant
  double sigma0 = 0.0;  // 0 selects 1 / ||D||_F
  int check_every = 10;
  bool adapt_penalty = true;
};

struct InnerResult {
  SolverState state;
  int iterations = 0;
  double objective = 0.0;
  KktResiduals residuals;
  double wall_time = 0.0;
  bool converged = false;
};

// X = D_{1/sigma}(D + J dtau - E + Y / sigma)
inline Matrix step_X(const SolverState& s, const InnerProblem& p) {
  return svt(p.d_tau + p.jac.apply(s.dtau) - s.E + s.Y / s.sigma,
             1.0 / s.sigma);
}

// dtau = -(J*J)^{-1} [ J*(D - X - E_used) + J* Y / sigma ]
inline Vector step_dtau(const SolverState& s, const InnerProblem& p,
                        const Matrix& e_used) {
  const Vector rhs = p.jac.adjoint(p.d_tau - s.X - e_used) +
                     p.jac.adjoint(s.Y) / s.sigma;
  return p.jac.gram_solve(-rhs);
}

// E = S_{lambda/sigma}(D + J dtau_used - X + Y / sigma)
inline Matrix step_E(const SolverState& s, const InnerProblem& p,
                     const Vector& dtau_used) {
  return soft_threshold(
      p.d_tau + p.jac.apply(dtau_used) - s.X + s.Y / s.sigma,
      p.lambda / s.sigma);
}

inline KktResiduals kkt_residuals(const SolverState& s,
                                  const InnerProblem& p,
                                  const Eigen::Matrix<double, 2, 6>& a_t,
                                  const Eigen::Matrix<double, 6, 1>& dtau_full) {
  KktResiduals r;
  const Matrix primal = p.d_tau + p.jac.apply(s.dtau) - s.X - s.E;
  const double dnorm = p.d_tau.norm();
  const double rel = primal.norm() / (dnorm > 0.0 ? dnorm : 1.0);
  const double center = (a_t * dtau_full).cwiseAbs().maxCoeff();
  r.eta_P = std::max(rel, center);
  r.eta_D = p.jac.adjoint(s.Y).norm();
  r.eta_X = (s.Y - project_spectral_ball(s.Y + s.X, 1.0)).norm() /
            (1.0 + s.Y.norm() + s.X.norm());
  r.eta_E = (s.Y - project_inf_ball(s.Y + s.E, p.lambda)).norm() /
            (1.0 + s.Y.norm() + s.E.norm());
  r.eta = std::max(std::max(r.eta_P, r.eta_D), std::max(r.eta_X, r.eta_E));
  return r;
}

// sigma <- 1.25 sigma if eta_P / eta_D >= 5, 0.8 sigma if <= 1/5.
// eta_D = 0 counts as an infinite ratio.
inline double adapt_sigma(double sigma, double eta_P, double eta_D) {
  const double ratio = eta_D > 0.0
                           ? eta_P / eta_D
                           : std::numeric_limits<double>::infinity();
  if (ratio >= 5.0) return 1.25 * sigma;
  if (ratio <= 0.2) return 0.8 * sigma;
  return sigma;
}

namespace detail {

inline void ensure_finite(const SolverState& s, int iteration) {
  const double cap = 1e12;
  const bool bad = !s.X.allFinite() || !s.E.allFinite() ||
                   !s.Y.allFinite() || !s.dtau.allFinite() ||
                   s.X.cwiseAbs().maxCoeff() > cap ||
                   s.E.cwiseAbs().maxCoeff() > cap ||
                   s.Y.cwiseAbs().maxCoeff() > cap ||
                   s.dtau.cwiseAbs().maxCoeff() > cap ||
                   !std::isfinite(s.sigma);
  if (bad)
    throw DivergenceError("inner solver diverged at iteration " +
                          std::to_string(iteration));
}

}  // namespace detail

// one directly-extended sweep: X -> dtau -> E -> Y
inline void direct_admm_iteration(SolverState& s, const InnerProblem& p,
                                  double xi) {
  s.X = step_X(s, p);
  s.dtau = step_dtau(s, p, s.E);
  s.E = step_E(s, p, s.dtau);
  const Matrix primal = p.d_tau + p.jac.apply(s.dtau) - s.X - s.E;
  s.Y += (xi * s.sigma) * primal;
}

// one symmetric Gauss-Seidel sweep: X -> dtau half-step -> E -> dtau -> Y
inline void sgs_admm_iteration(SolverState& s, const InnerProblem& p,
                               double xi) {
  s.X = step_X(s, p);
  const Vector half = step_dtau(s, p, s.E);
  s.E = step_E(s, p, half);
  s.dtau = step_dtau(s, p, s.E);
  const Matrix primal = p.d_tau + p.jac.apply(s.dtau) - s.X - s.E;
  s.Y += (xi * s.sigma) * primal;
}

// One iteration of the equivalent two-block semi-proximal form. The joint
// (E, dtau) step minimizes L_sigma plus (sigma/2) ||(E,dtau)-(E^k,dtau^k)||_T^2
// with T acting as J (J*J)^{-1} J* on the E block and zero on dtau.
// Eliminating dtau turns the E subproblem into a plain prox with argument
// (I - T) C + T E^k, C = D - X + Y/sigma; dtau then solves the normal
// equations against the fresh E.
inline SolverState sgs_proximal_form_step(const SolverState& s,
                                          const InnerProblem& p,
                                          const InnerConfig& cfg) {
  SolverState next = s;
  next.X = step_X(s, p);
  const Matrix c = p.d_tau - next.X + s.Y / s.sigma;
  const Matrix w = c + p.jac.project_onto_range(s.E - c);
  next.E = soft_threshold(w, p.lambda / s.sigma);
  next.dtau = p.jac.gram_solve(p.jac.adjoint(next.E - c));
  const Matrix primal = p.d_tau + p.jac.apply(next.dtau) - next.X - next.E;
  next.Y = s.Y + (cfg.xi * s.sigma) * primal;
  return next;
}

// one generalized sweep with relaxation of the shadow tuple; the multiplier
// uses the shadow base with unit step length (compact form)
inline void sgs_admm_g_iteration(SolverState& s, const InnerProblem& p,
                                 double rho) {
  SolverState shadow;
  shadow.X = s.X_shadow;
  shadow.E = s.E_shadow;
  shadow.Y = s.Y_shadow;
  shadow.dtau = s.dtau_shadow;
  shadow.sigma = s.sigma;

  const Vector half = step_dtau(shadow, p, s.E_shadow);
  s.E = step_E(shadow, p, half);
  s.dtau = step_dtau(shadow, p, s.E);
  const Matrix primal = p.d_tau + p.jac.apply(s.dtau) - shadow.X - s.E;
  s.Y = shadow.Y + s.sigma * primal;
  s.X = step_X(s, p);  // uses the fresh dtau, E, Y

  s.X_shadow += rho * (s.X - s.X_shadow);
  s.E_shadow += rho * (s.E - s.E_shadow);
  s.Y_shadow += rho * (s.Y - s.Y_shadow);
  s.dtau_shadow += rho * (s.dtau - s.dtau_shadow);
}

namespace detail {

enum class Variant { direct, sgs, sgs_g };

inline InnerResult solve_inner_loop(const InnerProblem& p,
                                    const InnerConfig& cfg, Variant variant) {
  const auto start = std::chrono::steady_clock::now();
  const int rows = static_cast<int>(p.d_tau.rows());
  const int cols = static_cast<int>(p.d_tau.cols());
  const double dnorm = p.d_tau.norm();
  const double sigma0 =
      cfg.sigma0 > 0.0 ? cfg.sigma0 : (dnorm > 0.0 ? 1.0 / dnorm : 1.0);

  InnerResult result;
  SolverState s = SolverState::zeros(rows, cols, p.jac.q(), sigma0,
                                     variant == Variant::sgs_g);

  bool have_residuals = false;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    switch (variant) {
      case Variant::direct:
        direct_admm_iteration(s, p, cfg.xi);
        break;
      case Variant::sgs:
        sgs_admm_iteration(s, p, cfg.xi);
        break;
      case Variant::sgs_g:
        sgs_admm_g_iteration(s, p, cfg.rho);
        break;
    }
    ensure_finite(s, k);
    result.iterations = k;

    // cheap feasibility check every iteration; eta_P < tol is necessary for
    // eta < tol, so it doubles as an early trigger for the full residuals
    const double cheap =
        (p.d_tau + p.jac.apply(s.dtau) - s.X - s.E).norm() /
        (dnorm > 0.0 ? dnorm : 1.0);
    const bool at_cadence = (k % cfg.check_every == 0);
    if (at_cadence || cheap < cfg.tol || k == cfg.max_iter) {
      result.residuals =
          kkt_residuals(s, p, p.a_t, p.jac.lift(s.dtau));
      have_residuals = true;
      if (result.residuals.eta < cfg.tol) {
        result.converged = true;
        break;
      }
      if (at_cadence && cfg.adapt_penalty)
        s.sigma = adapt_sigma(s.sigma, result.residuals.eta_P,
                              result.residuals.eta_D);
    }
  }
  if (!have_residuals)
    result.residuals = kkt_residuals(s, p, p.a_t, p.jac.lift(s.dtau));

  result.state = std::move(s);
  result.objective =
      nuclear_norm(result.state.X) + p.lambda * l1_norm(result.state.E);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

inline void require_xi(double xi) {
  if (!(xi > 0.0 && xi < kGoldenRatio))
    throw InvalidInputError("xi must lie in (0, (1+sqrt(5))/2)");
}

inline void require_rho(double rho) {
  if (!(rho > 0.0 && rho < 2.0))
    throw InvalidInputError("rho must lie in (0, 2)");
}

}  // namespace detail

inline InnerResult solve_direct_admm(const InnerProblem& p,
                                     const InnerConfig& cfg) {
  detail::require_xi(cfg.xi);
  return detail::solve_inner_loop(p, cfg, detail::Variant::direct);
}

inline InnerResult solve_sgs_admm(const InnerProblem& p,
                                  const InnerConfig& cfg) {
  detail::require_xi(cfg.xi);
  return detail::solve_inner_loop(p, cfg, detail::Variant::sgs);
}

inline InnerResult solve_sgs_admm_g(const InnerProblem& p,
                                    const InnerConfig& cfg) {
  detail::require_rho(cfg.rho);
  return detail::solve_inner_loop(p, cfg, detail::Variant::sgs_g);
}

}  // namespace lrt
