// Stationary states: -Lap psi + Phi'(psi) - lambda'(psi) theta_inf = mu_inf with
// constant theta_inf, mu_inf fixed by the mass and enthalpy constraints.
#pragma once

#include "cpf/errors.hpp"
#include "cpf/state.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace cpf {

struct SteadyProblem {
  double m0 = 0.0;  // prescribed mean of psi
  double h0 = 0.0;  // prescribed F = int (lambda(psi) + b(theta))
  Grid grid;
  ModelFunctions model;
};

struct SteadyState {
  Field psi_inf;
  double theta_inf = 1.0;
  double mu_inf = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;

  State as_state() const { return State(psi_inf, Field(psi_inf.grid(), theta_inf)); }
};

struct SteadyOptions {
  double tol = 1e-11;
  int max_iters = 60;
  int max_damping_halvings = 8;
};

/// mu_inf implied by averaging the field equation.
inline double mean_value_mu(const Field& psi, double theta_inf, const ModelFunctions& m) {
  return mean(psi.map([&](double u) { return m.phi.d1(u) - m.lambda.d1(u) * theta_inf; }));
}

/// Constraint-respecting constant solution psi = m0.
inline SteadyState constant_branch(const SteadyProblem& p, double theta_guess = 1.0) {
  const ModelFunctions& m = p.model;
  const auto theta = m.invert_b(p.h0 / p.grid.volume() - m.lambda.f(p.m0), theta_guess);
  if (!theta || !(*theta > 0.0))
    throw SolverError(SolverFailure::constraint_infeasible, "no theta_inf > 0 with b(theta_inf) = h0/|Omega| - lambda(m0)");
  SteadyState s;
  s.psi_inf = Field(p.grid, p.m0);
  s.theta_inf = *theta;
  s.mu_inf = m.phi.d1(p.m0) - m.lambda.d1(p.m0) * *theta;
  return s;
}

namespace detail {

struct SteadyResidual {
  Eigen::VectorXd r;
  double norm = 0.0;
};

inline SteadyResidual steady_residual(const SteadyProblem& p, const Field& psi, double theta, double mu) {
  const ModelFunctions& m = p.model;
  const auto n = static_cast<Eigen::Index>(psi.size());
  const Field lap = neumann_laplacian(psi);
  SteadyResidual out;
  out.r.resize(n + 2);
  double lam = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = psi[static_cast<std::size_t>(i)];
    out.r[i] = -lap[static_cast<std::size_t>(i)] + m.phi.d1(u) - m.lambda.d1(u) * theta - mu;
    lam += m.lambda.f(u);
  }
  out.r[n] = mean(psi) - p.m0;
  out.r[n + 1] = lam / static_cast<double>(n) + m.b.f(theta) - p.h0 / p.grid.volume();
  out.norm = out.r.lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace detail

/// Bordered Newton for (psi, theta_inf, mu_inf). Returns the branch reached from `guess`.
inline SteadyState solve_steady(const SteadyProblem& p, const SteadyState& guess, const SteadyOptions& opt = {}) {
  require_on(guess.psi_inf, p.grid);
  if (!(guess.theta_inf > 0.0)) throw std::invalid_argument("guess must have theta_inf > 0");
  const ModelFunctions& m = p.model;
  const auto n = static_cast<Eigen::Index>(p.grid.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  {
    const double lam_bar = mean(guess.psi_inf.map([&](double u) { return m.lambda.f(u); }));
    if (!m.invert_b(p.h0 / p.grid.volume() - lam_bar, guess.theta_inf))
      throw SolverError(SolverFailure::constraint_infeasible,
                        "b(theta_inf) = h0/|Omega| - mean(lambda(psi)) has no positive root near the guess");
  }

  const Eigen::SparseMatrix<double> lap = laplacian_matrix(p.grid);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;

  Field psi = guess.psi_inf;
  double theta = guess.theta_inf, mu = guess.mu_inf;
  auto res = detail::steady_residual(p, psi, theta, mu);
  int iters = 0;
  bool polished = false;
  while (true) {
    if (!std::isfinite(res.norm)) throw SolverError(SolverFailure::non_finite, "non-finite steady residual");
    if (res.norm <= opt.tol) {
      // One extra iteration drives the residual to round-off so the averaged
      // field equation reproduces mu_inf to machine precision.
      if (polished) break;
      polished = true;
    }
    if (iters == opt.max_iters) {
      if (res.norm <= opt.tol) break;
      throw SolverError(SolverFailure::newton_diverged, "steady residual " + brief(res.norm));
    }

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(lap.nonZeros() + 4 * n + 2));
    for (int k = 0; k < lap.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(lap, k); it; ++it) t.emplace_back(it.row(), it.col(), -it.value());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = psi[static_cast<std::size_t>(i)];
      t.emplace_back(i, i, m.phi.d2(u) - m.lambda.d2(u) * theta);
      t.emplace_back(i, n, -m.lambda.d1(u));
      t.emplace_back(i, n + 1, -1.0);
      t.emplace_back(n, i, inv_n);
      t.emplace_back(n + 1, i, m.lambda.d1(u) * inv_n);
    }
    t.emplace_back(n + 1, n, m.b.d1(theta));
    Eigen::SparseMatrix<double> jac(n + 2, n + 2);
    jac.setFromTriplets(t.begin(), t.end());
    if (!analyzed) {
      lu.analyzePattern(jac);
      analyzed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success)
      throw SolverError(SolverFailure::newton_diverged, "singular bordered Jacobian");
    const Eigen::VectorXd delta = lu.solve(-res.r);
    ++iters;

    double alpha = 1.0;
    Field psi_try(p.grid);
    double theta_try = theta, mu_try = mu;
    detail::SteadyResidual trial;
    bool positive = false;
    for (int h = 0; h <= opt.max_damping_halvings; ++h, alpha *= 0.5) {
      theta_try = theta + alpha * delta[n];
      positive = theta_try > 0.0;
      if (!positive) continue;
      for (Eigen::Index i = 0; i < n; ++i)
        psi_try[static_cast<std::size_t>(i)] = psi[static_cast<std::size_t>(i)] + alpha * delta[i];
      mu_try = mu + alpha * delta[n + 1];
      trial = detail::steady_residual(p, psi_try, theta_try, mu_try);
      if (std::isfinite(trial.norm) && trial.norm <= res.norm) break;
    }
    if (!positive)
      throw SolverError(SolverFailure::constraint_infeasible, "Newton iterates leave theta_inf > 0");
    if (polished && trial.norm > res.norm) break;  // polishing cannot improve further
    psi = std::move(psi_try);
    theta = theta_try;
    mu = mu_try;
    res = std::move(trial);
  }

  SteadyState out;
  out.psi_inf = std::move(psi);
  out.theta_inf = theta;
  out.mu_inf = mu;
  out.residual_norm = res.norm;
  out.iterations = iters;
  return out;
}

// ---------------------------------------------------------------------------
// Stability indicator.

enum class ProbeSet { fourier, full };

struct StabilityOptions {
  ProbeSet probes = ProbeSet::fourier;
  int modes = 8;               // cosine modes per axis for ProbeSet::fourier
  std::size_t full_limit = 256;  // ProbeSet::full is refused above this many cells
};

/// Smallest Rayleigh quotient of L'' over the span of constraint-compatible
/// probe directions (mean-free h, <F',(h,k)> = 0), by Rayleigh-Ritz on that span.
/// Negative values flag a descent direction; this is a heuristic, not a proof.
inline double stability_indicator(const SteadyState& s, const ModelFunctions& m, const StabilityOptions& opt = {}) {
  const State st = s.as_state();
  const Grid& g = st.grid();
  const std::size_t n = g.size();

  std::vector<Field> raw_h, raw_k;
  if (opt.probes == ProbeSet::full) {
    if (n > opt.full_limit) throw std::invalid_argument("full probe set requested on a grid that is too large");
    for (std::size_t i = 0; i < n; ++i) {
      Field e(g);
      e[i] = 1.0;
      raw_h.push_back(e);
      raw_k.push_back(e);
    }
  } else {
    const int my = g.dim() == 2 ? opt.modes : 0;
    for (int j = 0; j <= my; ++j)
      for (int i = 0; i <= opt.modes; ++i) {
        Field c = Field::sample(g, [&](double x, double y) {
          return std::cos(i * std::numbers::pi * x / g.length(0)) *
                 (g.dim() == 2 ? std::cos(j * std::numbers::pi * y / g.length(1)) : 1.0);
        });
        if (i != 0 || j != 0) raw_h.push_back(c);
        raw_k.push_back(c);
      }
  }

  const double b_mass = integrate(st.theta.map([&](double v) { return m.b.d1(v); }));
  const Field zero(g);
  auto project = [&](Field h, Field k) {
    h += -mean(h);
    const double c = enthalpy_derivative(st, h, k, m) / b_mass;
    k += -c;
    return std::pair<Field, Field>{std::move(h), std::move(k)};
  };

  std::vector<std::pair<Field, Field>> basis;
  auto add = [&](std::pair<Field, Field> v) {
    const double n0 = std::sqrt(inner(v.first, v.first) + inner(v.second, v.second));
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) {
        const double c = inner(v.first, q.first) + inner(v.second, q.second);
        v.first -= c * q.first;
        v.second -= c * q.second;
      }
    const double nv = std::sqrt(inner(v.first, v.first) + inner(v.second, v.second));
    if (!(nv > 1e-10 * n0) || nv == 0.0) return;
    v.first *= 1.0 / nv;
    v.second *= 1.0 / nv;
    basis.push_back(std::move(v));
  };
  for (const auto& h : raw_h) add(project(h, zero));
  for (const auto& k : raw_k) add(project(zero, k));
  if (basis.empty()) return 0.0;

  const auto dim = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd q(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = a; b < dim; ++b) {
      const auto& pa = basis[static_cast<std::size_t>(a)];
      const auto& pb = basis[static_cast<std::size_t>(b)];
      q(a, b) = q(b, a) = lagrangian_hessian_action(st, pa.first, pa.second, pb.first, pb.second, m);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[0];
}

}  // namespace cpf
