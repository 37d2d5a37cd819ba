#include <catch2/catch.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "lrt/inner.hpp"

using lrt::AffineParams;
using lrt::GrayImage;
using lrt::InnerConfig;
using lrt::InnerProblem;
using lrt::Matrix;
using lrt::Rng;
using lrt::SolverState;
using lrt::Vector;
using lrt::Window;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// smooth scene with a dominant linear ramp; gives a well-conditioned J
GrayImage ramp_scene(int size) {
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      img(y, x) = 0.2 + 0.4 * x / size + 0.25 * y / size +
                  0.08 * std::sin(0.5 * x) * std::sin(0.43 * y + 0.3);
  return img;
}

lrt::JacobianOperator make_jacobian(int window_size) {
  const int scene_size = window_size + 8;
  const GrayImage scene = ramp_scene(scene_size);
  const Window w{4.5, 4.5, window_size, window_size};
  const auto [a_t, z] = lrt::center_constraint(w);
  return lrt::jacobian(scene, AffineParams::identity(), w, z);
}

// rank-2 soft checkerboard, unit phases fixed
GrayImage rank2_texture(int size) {
  GrayImage img(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      img(i, j) = 0.5 + 0.4 * std::sin(2.0 * M_PI * (i + 0.37) / 8.0) *
                            std::sin(2.0 * M_PI * (j + 0.81) / 8.0);
  return img;
}

GrayImage rank1_texture(int size) {
  GrayImage img(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      img(i, j) = 0.55 + 0.35 * std::sin(2.0 * M_PI * (j + 0.2) / 4.0);
  return img;
}

// aligned texture with a given corrupted-pixel fraction, normalized
InnerProblem make_problem(int size, int rank, double corruption_frac,
                          std::uint64_t seed) {
  GrayImage d = rank == 1 ? rank1_texture(size) : rank2_texture(size);
  if (corruption_frac > 0.0) {
    Rng rng(seed);
    const int count = static_cast<int>(
        std::lround(corruption_frac * size * size));
    std::vector<int> idx(size * size);
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < count; ++k) {
      const int pick = k + rng.uniform_int(size * size - k);
      std::swap(idx[k], idx[pick]);
      d(idx[k] % size, idx[k] / size) = rng.uniform(0.0, 1.0);
    }
  }
  InnerProblem p;
  p.d_tau = lrt::normalize(d).first;
  p.jac = make_jacobian(size);
  p.lambda = 1.0 / std::sqrt(static_cast<double>(size));
  return p;
}

InnerProblem zero_problem(int size) {
  InnerProblem p;
  p.d_tau = Matrix::Zero(size, size);
  p.jac = make_jacobian(size);
  p.lambda = 1.0 / std::sqrt(static_cast<double>(size));
  return p;
}

SolverState random_state(const InnerProblem& p, std::uint64_t seed) {
  Rng rng(seed);
  const int n = static_cast<int>(p.d_tau.rows());
  SolverState s;
  s.X = rng.uniform_matrix(n, n, -0.5, 0.5);
  s.E = rng.uniform_matrix(n, n, -0.5, 0.5);
  s.Y = rng.uniform_matrix(n, n, -0.2, 0.2);
  s.dtau = Vector(p.jac.q());
  for (int k = 0; k < p.jac.q(); ++k) s.dtau(k) = rng.uniform(-0.1, 0.1);
  s.sigma = rng.uniform(0.5, 2.0);
  return s;
}

}  // namespace

TEST_CASE("step_X") {
  InnerProblem p = make_problem(8, 1, 0.0, 1);
  const int n = 8;

  SECTION("rank-1 data shrinks by 1/(s sigma)") {
    Rng rng(2);
    Vector u = rng.uniform_matrix(n, 1, 0.1, 1.0);
    Vector v = rng.uniform_matrix(n, 1, 0.1, 1.0);
    u /= u.norm();
    v /= v.norm();
    p.d_tau = u * v.transpose();  // single singular value 1
    SolverState s = SolverState::zeros(n, n, p.jac.q(), 4.0);
    const Matrix x = lrt::step_X(s, p);
    REQUIRE(max_abs_diff(x, 0.75 * p.d_tau) < 1e-12);
  }
  SECTION("zero argument gives zero") {
    p.d_tau = Matrix::Zero(n, n);
    SolverState s = SolverState::zeros(n, n, p.jac.q(), 1.0);
    REQUIRE(lrt::step_X(s, p).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("matches the svt oracle on a random state") {
    const SolverState s = random_state(p, 11);
    const Matrix arg =
        p.d_tau + p.jac.apply(s.dtau) - s.E + s.Y / s.sigma;
    REQUIRE(max_abs_diff(lrt::step_X(s, p), lrt::svt(arg, 1.0 / s.sigma)) ==
            0.0);
  }
}

TEST_CASE("step_dtau") {
  InnerProblem p = make_problem(8, 2, 0.0, 1);

  SECTION("right-hand side orthogonal to range gives zero") {
    SolverState s = SolverState::zeros(8, 8, p.jac.q(), 1.0);
    // leave only the component of D orthogonal to range(J)
    s.X = p.d_tau - (p.d_tau - p.jac.project_onto_range(p.d_tau));
    const Vector beta = lrt::step_dtau(s, p, s.E);
    REQUIRE(beta.cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("orthonormal columns reduce to the negative adjoint") {
    const int mn = 64;
    Rng rng(3);
    Matrix b = rng.uniform_matrix(mn, 4, -1.0, 1.0);
    const Eigen::HouseholderQR<Matrix> qr(b);
    const Matrix qbasis =
        qr.householderQ() * Matrix::Identity(mn, 4);
    InnerProblem q = p;
    q.jac = lrt::JacobianOperator(qbasis, p.jac.null_basis(), 8, 8, false);
    const SolverState s = random_state(q, 5);
    const Vector beta = lrt::step_dtau(s, q, s.E);
    const Vector want =
        -q.jac.adjoint(q.d_tau - s.X - s.E + s.Y / s.sigma);
    REQUIRE((beta - want).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("normal equations residual on a random instance") {
    const SolverState s = random_state(p, 13);
    const Vector beta = lrt::step_dtau(s, p, s.E);
    const Matrix gram = p.jac.basis().transpose() * p.jac.basis();
    const Vector rhs = p.jac.adjoint(p.d_tau - s.X - s.E) +
                       p.jac.adjoint(s.Y) / s.sigma;
    REQUIRE((gram * beta + rhs).norm() < 1e-10);
  }
}

TEST_CASE("step_E") {
  InnerProblem p = make_problem(8, 2, 0.0, 1);

  SECTION("argument below the threshold vanishes") {
    SolverState s = SolverState::zeros(8, 8, p.jac.q(), 1.0);
    s.X = p.d_tau;  // argument becomes Y/sigma = 0
    REQUIRE(lrt::step_E(s, p, s.dtau).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("vanishing threshold returns the argument") {
    InnerProblem q = p;
    q.lambda = 1e-15;
    const SolverState s = random_state(q, 4);
    const Matrix arg =
        q.d_tau + q.jac.apply(s.dtau) - s.X + s.Y / s.sigma;
    REQUIRE(max_abs_diff(lrt::step_E(s, q, s.dtau), arg) < 1e-13);
  }
  SECTION("matches the soft threshold oracle on a random state") {
    const SolverState s = random_state(p, 17);
    const Matrix arg =
        p.d_tau + p.jac.apply(s.dtau) - s.X + s.Y / s.sigma;
    REQUIRE(max_abs_diff(lrt::step_E(s, p, s.dtau),
                         lrt::soft_threshold(arg, p.lambda / s.sigma)) ==
            0.0);
  }
}

TEST_CASE("kkt_residuals") {
  InnerProblem p = make_problem(8, 2, 0.0, 1);
  const auto a_t = InnerProblem::default_center_matrix();

  SECTION("all-zero state on an all-zero problem") {
    InnerProblem z = zero_problem(8);
    SolverState s = SolverState::zeros(8, 8, z.jac.q(), 1.0);
    const auto r = lrt::kkt_residuals(
        s, z, a_t, Eigen::Matrix<double, 6, 1>::Zero());
    REQUIRE(r.eta == 0.0);
  }
  SECTION("multiplier in the null space of the adjoint") {
    Rng rng(6);
    SolverState s = SolverState::zeros(8, 8, p.jac.q(), 1.0);
    const Matrix m = rng.uniform_matrix(8, 8, -1.0, 1.0);
    s.Y = m - p.jac.project_onto_range(m);
    const auto r = lrt::kkt_residuals(
        s, p, a_t, Eigen::Matrix<double, 6, 1>::Zero());
    REQUIRE(r.eta_D < 1e-10);
  }
  SECTION("duplicate-formula oracle on a random state") {
    const SolverState s = random_state(p, 19);
    Eigen::Matrix<double, 6, 1> full = p.jac.lift(s.dtau);
    const auto r = lrt::kkt_residuals(s, p, a_t, full);

    // independent re-evaluation, assembled from scratch
    const Matrix residual = p.d_tau + p.jac.apply(s.dtau) - s.X - s.E;
    const double eta_p = std::max(residual.norm() / p.d_tau.norm(),
                                  (a_t * full).cwiseAbs().maxCoeff());
    const double eta_d = (p.jac.basis().transpose() *
                          Eigen::Map<const Vector>(s.Y.data(), s.Y.size()))
                             .norm();
    const Matrix yx = s.Y + s.X;
    const double eta_x =
        (s.Y - lrt::project_spectral_ball(yx, 1.0)).norm() /
        (1.0 + s.Y.norm() + s.X.norm());
    const double eta_e =
        (s.Y - (s.Y + s.E).cwiseMax(-p.lambda).cwiseMin(p.lambda)).norm() /
        (1.0 + s.Y.norm() + s.E.norm());
    REQUIRE(r.eta_P == Approx(eta_p).margin(1e-14));
    REQUIRE(r.eta_D == Approx(eta_d).margin(1e-14));
    REQUIRE(r.eta_X == Approx(eta_x).margin(1e-14));
    REQUIRE(r.eta_E == Approx(eta_e).margin(1e-14));
    REQUIRE(r.eta ==
            std::max({r.eta_P, r.eta_D, r.eta_X, r.eta_E}));
  }
}

TEST_CASE("adapt_sigma follows the ratio rule") {
  REQUIRE(lrt::adapt_sigma(1.0, 6.0, 1.0) == 1.25);
  REQUIRE(lrt::adapt_sigma(1.0, 1.0, 1.0) == 1.0);
  REQUIRE(lrt::adapt_sigma(1.0, 0.1, 1.0) == 0.8);
  REQUIRE(lrt::adapt_sigma(2.0, 1.0, 0.0) == 2.5);  // eta_D = 0 => increase

  SECTION("positivity under arbitrary sequences") {
    Rng rng(8);
    double sigma = 1.0;
    for (int k = 0; k < 200; ++k) {
      sigma = lrt::adapt_sigma(sigma, rng.uniform(0.0, 10.0),
                               rng.uniform(0.0, 10.0));
      REQUIRE(sigma > 0.0);
    }
  }
}

TEST_CASE("solvers converge immediately on zero data") {
  InnerProblem p = zero_problem(8);
  InnerConfig cfg;
  for (auto solve : {lrt::solve_direct_admm, lrt::solve_sgs_admm,
                     lrt::solve_sgs_admm_g}) {
    const auto r = solve(p, cfg);
    REQUIRE(r.converged);
    REQUIRE(r.iterations == 1);
    REQUIRE(r.state.X.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(r.state.E.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(r.state.dtau.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("solver parameter validation") {
  InnerProblem p = zero_problem(8);
  InnerConfig cfg;
  cfg.xi = 1.62;  // above the golden ratio
  REQUIRE_THROWS_AS(lrt::solve_direct_admm(p, cfg), lrt::InvalidInputError);
  REQUIRE_THROWS_AS(lrt::solve_sgs_admm(p, cfg), lrt::InvalidInputError);
  cfg.xi = 1.618;
  cfg.rho = 2.0;
  REQUIRE_THROWS_AS(lrt::solve_sgs_admm_g(p, cfg), lrt::InvalidInputError);
}

TEST_CASE("direct ADMM on an uncorrupted rank-1 instance") {
  InnerProblem p = make_problem(8, 1, 0.0, 1);
  InnerConfig cfg;
  const auto direct = lrt::solve_direct_admm(p, cfg);
  REQUIRE(direct.converged);
  REQUIRE(direct.residuals.eta < 1e-3);
  const auto sgs = lrt::solve_sgs_admm(p, cfg);
  REQUIRE(sgs.converged);
  REQUIRE(std::abs(direct.objective - sgs.objective) <=
          1e-3 * std::max(direct.objective, sgs.objective));
}

TEST_CASE("feasibility of the converged direct iterate") {
  InnerProblem p = make_problem(16, 2, 0.05, 99);
  InnerConfig cfg;
  const auto r = lrt::solve_direct_admm(p, cfg);
  REQUIRE(r.converged);
  const double feas =
      (p.d_tau + p.jac.apply(r.state.dtau) - r.state.X - r.state.E).norm() /
      p.d_tau.norm();
  REQUIRE(feas < 2e-3);
}

TEST_CASE("sGS-ADMM recovers the rank of a corrupted instance") {
  InnerProblem p = make_problem(16, 2, 0.05, 42);
  InnerConfig cfg;
  const auto r = lrt::solve_sgs_admm(p, cfg);
  REQUIRE(r.converged);
  REQUIRE(r.residuals.eta < 1e-3);
  REQUIRE(lrt::numerical_rank(r.state.X) == 2);
}

TEST_CASE("all three solvers agree on the objective") {
  InnerProblem p = make_problem(16, 2, 0.05, 7);
  InnerConfig cfg;
  const double f1 = lrt::solve_direct_admm(p, cfg).objective;
  const double f2 = lrt::solve_sgs_admm(p, cfg).objective;
  const double f3 = lrt::solve_sgs_admm_g(p, cfg).objective;
  const double fmax = std::max({f1, f2, f3});
  const double fmin = std::min({f1, f2, f3});
  REQUIRE(fmax - fmin <= 1e-3 * fmax);
}

TEST_CASE("multiplier update identity") {
  InnerProblem p = make_problem(12, 2, 0.05, 21);
  InnerConfig cfg;
  cfg.tol = 1e-14;  // keep the solver running through iteration k

  SECTION("direct and sGS") {
    for (auto solve : {lrt::solve_direct_admm, lrt::solve_sgs_admm}) {
      InnerConfig a = cfg;
      a.max_iter = 6;
      InnerConfig b = cfg;
      b.max_iter = 7;
      const auto ra = solve(p, a);
      const auto rb = solve(p, b);
      const Matrix residual =
          p.d_tau + p.jac.apply(rb.state.dtau) - rb.state.X - rb.state.E;
      const Matrix want = ra.state.Y + (cfg.xi * rb.state.sigma) * residual;
      REQUIRE(max_abs_diff(rb.state.Y, want) == 0.0);
    }
  }
  SECTION("generalized variant, unit internal step from the shadow base") {
    InnerConfig a = cfg;
    a.max_iter = 6;
    InnerConfig b = cfg;
    b.max_iter = 7;
    const auto ra = lrt::solve_sgs_admm_g(p, a);
    const auto rb = lrt::solve_sgs_admm_g(p, b);
    const Matrix residual = p.d_tau + p.jac.apply(rb.state.dtau) -
                            ra.state.X_shadow - rb.state.E;
    const Matrix want = ra.state.Y_shadow + rb.state.sigma * residual;
    REQUIRE(max_abs_diff(rb.state.Y, want) == 0.0);
  }
}

TEST_CASE("solves are bit-deterministic") {
  InnerProblem p = make_problem(16, 2, 0.05, 5);
  InnerConfig cfg;
  for (auto solve : {lrt::solve_direct_admm, lrt::solve_sgs_admm,
                     lrt::solve_sgs_admm_g}) {
    const auto a = solve(p, cfg);
    const auto b = solve(p, cfg);
    REQUIRE(a.iterations == b.iterations);
    REQUIRE(a.converged == b.converged);
    REQUIRE(max_abs_diff(a.state.X, b.state.X) == 0.0);
    REQUIRE(max_abs_diff(a.state.E, b.state.E) == 0.0);
    REQUIRE(max_abs_diff(a.state.Y, b.state.Y) == 0.0);
    REQUIRE((a.state.dtau - b.state.dtau).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.objective == b.objective);
  }
}

TEST_CASE("divergence guard trips on poisoned state") {
  InnerProblem p = make_problem(8, 2, 0.0, 1);
  SolverState s = SolverState::zeros(8, 8, p.jac.q(), 1.0);
  REQUIRE_NOTHROW(lrt::detail::ensure_finite(s, 1));
  s.Y(3, 3) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(lrt::detail::ensure_finite(s, 1), lrt::DivergenceError);
  s.Y(3, 3) = 2e12;
  REQUIRE_THROWS_AS(lrt::detail::ensure_finite(s, 1), lrt::DivergenceError);
}
