// One time step of the conserved system
//   psi_t = Lap mu,  mu = -Lap psi + Phi'(psi) - lambda'(psi) theta,
//   (b(theta) + lambda(psi))_t = Lap theta,
// with homogeneous Neumann conditions inherited from the grid operator.
#pragma once

#include "cpf/errors.hpp"
#include "cpf/state.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace cpf {

enum class Scheme { fully_implicit, imex };

struct StepperConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::fully_implicit;
  double newton_tol = 1e-10;  // max-norm of the coupled residual
  int max_newton_iters = 25;
  int max_damping_halvings = 8;
  double linear_tol = 1e-12;  // iterative solves only
  std::size_t direct_solver_limit = 50000;  // unknowns; above this use ILUT-preconditioned BiCGSTAB

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(newton_tol > 0.0) || !(linear_tol > 0.0)) throw std::invalid_argument("tolerances must be positive");
    if (max_newton_iters < 1) throw std::invalid_argument("max_newton_iters must be at least 1");
    if (max_damping_halvings < 0) throw std::invalid_argument("max_damping_halvings must be nonnegative");
  }
};

struct StepResult {
  State state;
  Field mu;  // chemical potential at the new time level
  double dt = 0.0;
  int newton_iters = 0;
  double residual_norm = 0.0;
  double dissipation_increment = 0.0;  // dt (|grad mu|^2 + |grad theta|^2) at the new level
};

namespace detail {

inline Eigen::VectorXd to_eigen(const Field& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size()));
}

inline void from_eigen(const Eigen::VectorXd& v, Eigen::Index offset, Field& f) {
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = v[offset + static_cast<Eigen::Index>(i)];
}

/// Sparse solve with a direct factorization for small systems and
/// ILUT-preconditioned BiCGSTAB for large ones. The sparsity pattern is
/// analyzed once and reused across refactorizations.
class LinearSolver {
 public:
  LinearSolver(std::size_t direct_limit, double tol) : direct_limit_(direct_limit), tol_(tol) {}

  Eigen::VectorXd solve(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& rhs) {
    if (static_cast<std::size_t>(a.rows()) <= direct_limit_) {
      if (!analyzed_ || a.rows() != rows_ || a.nonZeros() != nnz_) {
        lu_.analyzePattern(a);
        analyzed_ = true;
        rows_ = a.rows();
        nnz_ = a.nonZeros();
      }
      lu_.factorize(a);
      if (lu_.info() != Eigen::Success) throw std::runtime_error("sparse LU factorization failed");
      return lu_.solve(rhs);
    }
    iterative_.setTolerance(tol_);
    iterative_.compute(a);
    Eigen::VectorXd x = iterative_.solve(rhs);
    if (iterative_.info() != Eigen::Success) throw std::runtime_error("iterative linear solve did not converge");
    return x;
  }

 private:
  std::size_t direct_limit_;
  double tol_;
  bool analyzed_ = false;
  Eigen::Index rows_ = 0, nnz_ = 0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> iterative_;
};

/// Appends block (r0, c0) of a sparse matrix, keeping explicit zeros so the pattern is fixed.
inline void append_block(std::vector<Eigen::Triplet<double>>& t, const Eigen::SparseMatrix<double>& blk,
                         Eigen::Index r0, Eigen::Index c0) {
  for (int k = 0; k < blk.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(blk, k); it; ++it)
      t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
}

}  // namespace detail

/// Time stepper bound to one grid and model. Caches the Laplacian, its
/// square and the solver's symbolic analysis across steps.
class Stepper {
 public:
  Stepper(const Grid& grid, StepperConfig cfg, ModelFunctions model)
      : grid_(grid),
        cfg_(cfg),
        model_(std::move(model)),
        lap_(laplacian_matrix(grid)),
        bilap_(lap_ * lap_),
        solver_(cfg.direct_solver_limit, cfg.linear_tol) {
    cfg_.validate();
  }

  const StepperConfig& config() const { return cfg_; }
  const ModelFunctions& model() const { return model_; }
  const Grid& grid() const { return grid_; }

  StepResult step(const State& s) { return step(s, cfg_.dt); }

  StepResult step(const State& s, double dt) {
    if (!(s.grid() == grid_)) throw std::invalid_argument("state lives on a different grid than the stepper");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    for (std::size_t i = 0; i < s.theta.size(); ++i)
      if (!(s.theta[i] > 0.0)) throw SolverError(SolverFailure::positivity_lost, "theta <= 0 in the input state");
    return cfg_.scheme == Scheme::fully_implicit ? implicit_step(s, dt) : imex_step(s, dt);
  }

  /// Coupled backward-Euler residual [R1; R2] at the candidate (psi, theta).
  Eigen::VectorXd residual(const State& old, const Field& psi, const Field& theta, double dt) const {
    const auto n = static_cast<Eigen::Index>(grid_.size());
    Field mu = -neumann_laplacian(psi);
    for (std::size_t i = 0; i < mu.size(); ++i)
      mu[i] += model_.phi.d1(psi[i]) - model_.lambda.d1(psi[i]) * theta[i];
    const Field lap_mu = neumann_laplacian(mu);
    const Field lap_theta = neumann_laplacian(theta);
    Eigen::VectorXd r(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(i);
      r[i] = (psi[c] - old.psi[c]) / dt - lap_mu[c];
      const double enthalpy_change = (model_.b.f(theta[c]) - model_.b.f(old.theta[c])) +
                                     (model_.lambda.f(psi[c]) - model_.lambda.f(old.psi[c]));
      r[n + i] = enthalpy_change / dt - lap_theta[c];
    }
    return r;
  }

  /// Analytic Jacobian of residual() with respect to (psi, theta).
  Eigen::SparseMatrix<double> jacobian(const Field& psi, const Field& theta, double dt) const {
    const auto n = static_cast<Eigen::Index>(grid_.size());
    Eigen::VectorXd curv(n), dlam(n), dlam_over_dt(n), db_over_dt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(i);
      curv[i] = model_.phi.d2(psi[c]) - model_.lambda.d2(psi[c]) * theta[c];
      dlam[i] = model_.lambda.d1(psi[c]);
      dlam_over_dt[i] = dlam[i] / dt;
      db_over_dt[i] = model_.b.d1(theta[c]) / dt;
    }
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    // J11 = I/dt + A^2 - A diag(Phi'' - lambda'' theta); J12 = A diag(lambda')
    Eigen::SparseMatrix<double> j11 = eye / dt + bilap_ - lap_ * curv.asDiagonal();
    Eigen::SparseMatrix<double> j12 = lap_ * dlam.asDiagonal();
    // J21 = diag(lambda')/dt; J22 = diag(b')/dt - A
    Eigen::SparseMatrix<double> j21 = eye * dlam_over_dt.asDiagonal();
    Eigen::SparseMatrix<double> j22 = Eigen::SparseMatrix<double>(eye * db_over_dt.asDiagonal()) - lap_;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(j11.nonZeros() + j12.nonZeros() + j21.nonZeros() + j22.nonZeros()));
    detail::append_block(t, j11, 0, 0);
    detail::append_block(t, j12, 0, n);
    detail::append_block(t, j21, n, 0);
    detail::append_block(t, j22, n, n);
    Eigen::SparseMatrix<double> j(2 * n, 2 * n);
    j.setFromTriplets(t.begin(), t.end());
    return j;
  }

 private:
  StepResult finish(State next, double dt, int iters, double res) const {
    StepResult out;
    out.mu = chemical_potential(next, model_);
    out.dissipation_increment = dt * (grad_sq_norm(out.mu) + grad_sq_norm(next.theta));
    out.state = std::move(next);
    out.dt = dt;
    out.newton_iters = iters;
    out.residual_norm = res;
    return out;
  }

  // Newton from the previous state, at least one iteration, halving the
  // update while it raises the residual or drives theta nonpositive.
  StepResult implicit_step(const State& old, double dt) {
    const auto n = static_cast<Eigen::Index>(grid_.size());
    Field psi = old.psi, theta = old.theta;
    Eigen::VectorXd r = residual(old, psi, theta, dt);
    double rnorm = r.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(rnorm)) throw SolverError(SolverFailure::non_finite, "non-finite residual");
    int iters = 0;
    while (rnorm > cfg_.newton_tol || iters == 0) {
      if (iters == cfg_.max_newton_iters)
        throw SolverError(SolverFailure::newton_diverged,
                          "residual " + brief(rnorm) + " after " + std::to_string(iters) + " iterations");
      const Eigen::VectorXd delta = solver_.solve(jacobian(psi, theta, dt), -r);
      ++iters;
      if (!delta.allFinite()) throw SolverError(SolverFailure::non_finite, "non-finite Newton update");
      double alpha = 1.0;
      Field psi_try(grid_), theta_try(grid_);
      Eigen::VectorXd r_try;
      double try_norm = 0.0;
      bool positive = false;
      for (int h = 0; h <= cfg_.max_damping_halvings; ++h, alpha *= 0.5) {
        positive = true;
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto c = static_cast<std::size_t>(i);
          psi_try[c] = psi[c] + alpha * delta[i];
          theta_try[c] = theta[c] + alpha * delta[n + i];
          if (!(theta_try[c] > 0.0)) positive = false;
        }
        if (!positive) continue;
        r_try = residual(old, psi_try, theta_try, dt);
        try_norm = r_try.lpNorm<Eigen::Infinity>();
        if (std::isfinite(try_norm) && try_norm <= rnorm) break;
      }
      if (!positive) throw SolverError(SolverFailure::positivity_lost, "theta <= 0 in every damped Newton iterate");
      if (!std::isfinite(try_norm)) throw SolverError(SolverFailure::non_finite, "non-finite residual");
      psi = std::move(psi_try);
      theta = std::move(theta_try);
      r = std::move(r_try);
      rnorm = try_norm;
    }
    return finish(State(std::move(psi), std::move(theta)), dt, iters, rnorm);
  }

  // Implicit in the biharmonic and heat-diffusion parts, explicit in Phi' and
  // the lambda coupling. The enthalpy update is written in flux form and
  // inverted through b, so both conserved integrals change only by round-off.
  StepResult imex_step(const State& old, double dt) {
    const auto n = static_cast<Eigen::Index>(grid_.size());
    if (!psi_factor_ || psi_factor_dt_ != dt) {
      Eigen::SparseMatrix<double> eye(n, n);
      eye.setIdentity();
      psi_matrix_ = eye / dt + bilap_;
      psi_factor_.emplace();
      psi_factor_->compute(psi_matrix_);
      if (psi_factor_->info() != Eigen::Success) throw std::runtime_error("IMEX factorization failed");
      psi_factor_dt_ = dt;
    }
    Field explicit_part(grid_);
    for (std::size_t i = 0; i < explicit_part.size(); ++i)
      explicit_part[i] = model_.phi.d1(old.psi[i]) - model_.lambda.d1(old.psi[i]) * old.theta[i];
    const Field lap_explicit = neumann_laplacian(explicit_part);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(i);
      rhs[i] = old.psi[c] / dt + lap_explicit[c];
    }
    Eigen::VectorXd psi_new = psi_factor_->solve(rhs);
    const double psi_res = (psi_matrix_ * psi_new - rhs).lpNorm<Eigen::Infinity>();
    Field psi(grid_);
    detail::from_eigen(psi_new, 0, psi);

    // Linearized heat solve: b'(theta)(th - theta)/dt - A th = -(lambda(psi+) - lambda(psi))/dt.
    Eigen::VectorXd db(n), rhs_t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(i);
      db[i] = model_.b.d1(old.theta[c]) / dt;
      rhs_t[i] = db[i] * old.theta[c] - (model_.lambda.f(psi[c]) - model_.lambda.f(old.psi[c])) / dt;
    }
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    Eigen::SparseMatrix<double> heat = Eigen::SparseMatrix<double>(eye * db.asDiagonal()) - lap_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> heat_factor(heat);
    if (heat_factor.info() != Eigen::Success) throw std::runtime_error("IMEX heat factorization failed");
    const Eigen::VectorXd th = heat_factor.solve(rhs_t);
    const double heat_res = (heat * th - rhs_t).lpNorm<Eigen::Infinity>();
    Field th_field(grid_);
    detail::from_eigen(th, 0, th_field);
    const Field lap_th = neumann_laplacian(th_field);

    Field theta(grid_);
    for (std::size_t c = 0; c < theta.size(); ++c) {
      const double w = model_.b.f(old.theta[c]) + model_.lambda.f(old.psi[c]) + dt * lap_th[c];
      const auto inv = model_.invert_b(w - model_.lambda.f(psi[c]), th_field[c] > 0.0 ? th_field[c] : old.theta[c]);
      if (!inv || !(*inv > 0.0))
        throw SolverError(SolverFailure::positivity_lost, "enthalpy outside the range of b at cell " + std::to_string(c));
      theta[c] = *inv;
    }
    if (!psi.all_finite() || !theta.all_finite()) throw SolverError(SolverFailure::non_finite, "non-finite IMEX update");
    return finish(State(std::move(psi), std::move(theta)), dt, 0, std::max(psi_res, heat_res));
  }

  Grid grid_;
  StepperConfig cfg_;
  ModelFunctions model_;
  Eigen::SparseMatrix<double> lap_;
  Eigen::SparseMatrix<double> bilap_;
  detail::LinearSolver solver_;
  Eigen::SparseMatrix<double> psi_matrix_;
  std::optional<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> psi_factor_;
  double psi_factor_dt_ = 0.0;
};

/// Single step without a persistent workspace.
inline StepResult step(const State& s, const StepperConfig& cfg, const ModelFunctions& m) {
  Stepper stepper(s.grid(), cfg, m);
  return stepper.step(s);
}

}  // namespace cpf
