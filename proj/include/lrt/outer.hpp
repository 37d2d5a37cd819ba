#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lrt/core.hpp"
#include "lrt/geometry.hpp"
#include "lrt/inner.hpp"

namespace lrt {

enum class InnerSolverKind { direct, sgs, sgs_g };

inline const char* solver_name(InnerSolverKind kind) {
  switch (kind) {
    case InnerSolverKind::direct:
      return "direct";
    case InnerSolverKind::sgs:
      return "sgs";
    case InnerSolverKind::sgs_g:
      return "sgs-g";
  }
  return "?";
}

inline InnerResult solve_inner(const InnerProblem& p, InnerSolverKind kind,
                               const InnerConfig& cfg) {
  switch (kind) {
    case InnerSolverKind::direct:
      return solve_direct_admm(p, cfg);
    case InnerSolverKind::sgs:
      return solve_sgs_admm(p, cfg);
    case InnerSolverKind::sgs_g:
      return solve_sgs_admm_g(p, cfg);
  }
  throw InvalidInputError("unknown solver");
}

inline std::vector<double> default_init_angles() {
  // 11 points over +-25 degrees
  std::vector<double> angles;
  const double span = 25.0 * M_PI / 180.0;
  for (int k = 0; k < 11; ++k)
    angles.push_back(-span + 2.0 * span * k / 10.0);
  return angles;
}

struct OuterConfig {
  InnerSolverKind solver = InnerSolverKind::sgs;
  InnerConfig inner;
  double outer_tol = 1e-4;
  int max_outer = 30;
  double lambda_override = 0.0;  // 0 selects 1 / sqrt(window width)
  bool use_init_search = false;
  std::vector<double> init_angles = default_init_angles();
  int init_max_iter = 100;
  AffineParams tau0;
};

struct RoundRecord {
  int round = 0;
  int iterations = 0;
  double time_s = 0.0;
  int rank = 0;
  double e_l1 = 0.0;
  double eta = 0.0;
  double objective = 0.0;
  bool converged = false;
  Vector dtau;  // reduced increment applied after this round
};

struct RectifyResult {
  AffineParams tau_final;
  Matrix X_final, E_final;
  std::vector<RoundRecord> per_round;
  double total_time = 0.0;
  int rounds = 0;
  bool stagnated = false;
};

// Pure-rotation grid initialization: evaluate a capped inner solve at each
// feasible angle and keep the smallest objective. Ties go to the earlier
// angle in the list.
inline AffineParams init_search(const GrayImage& scene, const Window& w,
                                const std::vector<double>& angles,
                                const OuterConfig& cfg) {
  if (angles.empty())
    throw InvalidInputError("init_search: empty angle list");
  const double lambda = cfg.lambda_override > 0.0
                            ? cfg.lambda_override
                            : 1.0 / std::sqrt(static_cast<double>(w.width));
  const auto [a_t, z] = center_constraint(w);
  InnerConfig icfg = cfg.inner;
  icfg.max_iter = cfg.init_max_iter;

  double best_f = std::numeric_limits<double>::infinity();
  bool any_feasible = false;
  AffineParams best;
  for (const double angle : angles) {
    const AffineParams tau = AffineParams::rotation(angle);
    InnerResult result;
    try {
      InnerProblem p;
      p.d_tau = normalize(warp(scene, tau, w)).first;
      p.jac = jacobian(scene, tau, w, z);
      p.lambda = lambda;
      p.a_t = a_t;
      result = solve_inner(p, cfg.solver, icfg);
    } catch (const Error&) {
      continue;  // infeasible angle
    }
    any_feasible = true;
    if (result.objective < best_f) {
      best_f = result.objective;
      best = tau;
    }
  }
  if (!any_feasible)
    throw OutOfBoundsError(
        "init_search: no angle in the grid admits a feasible warp "
        "(feasible subset is empty)");
  return best;
}

// Linearize-and-solve iteration: warp, normalize, build the Jacobian, solve
// the inner problem, accumulate tau, and stop when the objective stagnates.
inline RectifyResult rectify(const GrayImage& scene, const Window& w,
                             const OuterConfig& cfg) {
  validate_window(w);
  if (cfg.max_outer < 1)
    throw InvalidInputError("rectify: max_outer must be at least 1");
  if (!(cfg.outer_tol > 0.0))
    throw InvalidInputError("rectify: outer_tol must be positive");
  const auto start = std::chrono::steady_clock::now();
  const double lambda = cfg.lambda_override > 0.0
                            ? cfg.lambda_override
                            : 1.0 / std::sqrt(static_cast<double>(w.width));
  const auto [a_t, z] = center_constraint(w);

  RectifyResult out;
  AffineParams tau =
      cfg.use_init_search ? init_search(scene, w, cfg.init_angles, cfg)
                          : cfg.tau0;

  double f_prev = std::numeric_limits<double>::quiet_NaN();
  for (int round = 1; round <= cfg.max_outer; ++round) {
    InnerResult inner;
    try {
      InnerProblem p;
      p.d_tau = normalize(warp(scene, tau, w)).first;
      p.jac = jacobian(scene, tau, w, z);
      p.lambda = lambda;
      p.a_t = a_t;
      inner = solve_inner(p, cfg.solver, cfg.inner);
    } catch (const DivergenceError& e) {
      throw DivergenceError("rectify: round " + std::to_string(round) +
                            ": " + e.what());
    } catch (const Error& e) {
      throw Error("rectify: round " + std::to_string(round) + ": " +
                  e.what());
    }

    tau += Eigen::Matrix<double, 6, 1>(z * inner.state.dtau);

    RoundRecord rec;
    rec.round = round;
    rec.iterations = inner.iterations;
    rec.time_s = inner.wall_time;
    rec.rank = numerical_rank(inner.state.X);
    rec.e_l1 = l1_norm(inner.state.E);
    rec.eta = inner.residuals.eta;
    rec.objective = inner.objective;
    rec.converged = inner.converged;
    rec.dtau = inner.state.dtau;
    out.per_round.push_back(rec);
    out.X_final = inner.state.X;
    out.E_final = inner.state.E;
    out.rounds = round;

    if (round > 1 && std::abs(inner.objective - f_prev) <= cfg.outer_tol) {
      out.stagnated = true;
      break;
    }
    f_prev = inner.objective;
  }

  out.tau_final = tau;
  out.total_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

}  // namespace lrt
