// Simulated state (psi, theta) and the functionals built on it: chemical
// potential, energy E, enthalpy F, Lagrangian L = E - mean(theta) F, and the
// first and second variations of L.
#pragma once

#include "cpf/constitutive.hpp"
#include "cpf/grid.hpp"

#include <stdexcept>
#include <string>

namespace cpf {

/// Order parameter psi and inverse temperature theta (> 0) on one grid.
struct State {
  Field psi;
  Field theta;

  State() = default;
  State(Field psi_in, Field theta_in) : psi(std::move(psi_in)), theta(std::move(theta_in)) { validate(); }

  static State constant(const Grid& g, double psi_value, double theta_value) {
    return State(Field(g, psi_value), Field(g, theta_value));
  }

  const Grid& grid() const { return psi.grid(); }

  void validate() const {
    psi.check_same(theta);
    if (!psi.all_finite() || !theta.all_finite()) throw std::invalid_argument("state contains non-finite values");
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (!(theta[i] > 0.0))
        throw std::invalid_argument("theta must be strictly positive (cell " + std::to_string(i) + ")");
  }
};

/// Riesz representative of a first variation in the quadrature inner product.
struct FunctionalGradient {
  Field d_psi;
  Field d_theta;

  /// <gradient, (h, k)>.
  double apply(const Field& h, const Field& k) const { return inner(d_psi, h) + inner(d_theta, k); }
};

/// mu = -Lap psi + Phi'(psi) - lambda'(psi) theta.
inline Field chemical_potential(const State& s, const ModelFunctions& m) {
  Field mu = -neumann_laplacian(s.psi);
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += m.phi.d1(s.psi[i]) - m.lambda.d1(s.psi[i]) * s.theta[i];
  return mu;
}

/// E = 1/2 |grad psi|^2 + int Phi(psi) + int beta(theta).
inline double energy(const State& s, const ModelFunctions& m) {
  double bulk = 0.0;
  for (std::size_t i = 0; i < s.psi.size(); ++i) bulk += m.phi.f(s.psi[i]) + m.beta(s.theta[i]);
  return 0.5 * grad_sq_norm(s.psi) + bulk * s.grid().cell_volume();
}

/// F = int (lambda(psi) + b(theta)), the conserved enthalpy.
inline double conserved_f(const State& s, const ModelFunctions& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.psi.size(); ++i) acc += m.lambda.f(s.psi[i]) + m.b.f(s.theta[i]);
  return acc * s.grid().cell_volume();
}

inline double lagrangian(const State& s, const ModelFunctions& m) {
  return energy(s, m) - mean(s.theta) * conserved_f(s, m);
}

/// d_psi = -Lap psi + Phi'(psi) - mean(theta) lambda'(psi)
/// d_theta = beta'(theta) - F/|Omega| - mean(theta) b'(theta)
inline FunctionalGradient lagrangian_gradient(const State& s, const ModelFunctions& m) {
  const double tbar = mean(s.theta);
  const double f_per_volume = conserved_f(s, m) / s.grid().volume();
  FunctionalGradient g{-neumann_laplacian(s.psi), Field(s.grid())};
  for (std::size_t i = 0; i < s.psi.size(); ++i) {
    g.d_psi[i] += m.phi.d1(s.psi[i]) - tbar * m.lambda.d1(s.psi[i]);
    g.d_theta[i] = m.dbeta(s.theta[i]) - f_per_volume - tbar * m.b.d1(s.theta[i]);
  }
  return g;
}

/// <F'(s), (h, k)>.
inline double enthalpy_derivative(const State& s, const Field& h, const Field& k, const ModelFunctions& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) acc += m.lambda.d1(s.psi[i]) * h[i] + m.b.d1(s.theta[i]) * k[i];
  return acc * s.grid().cell_volume();
}

/// <L''(s)(h1, k1), (h2, k2)> =
///   <E''(h1,k1),(h2,k2)> - mean(k1) <F',(h2,k2)> - mean(k2) <F',(h1,k1)> - mean(theta) <F''(h1,k1),(h2,k2)>.
inline double lagrangian_hessian_action(const State& s, const Field& h1, const Field& k1, const Field& h2,
                                        const Field& k2, const ModelFunctions& m) {
  s.psi.check_same(h1);
  h1.check_same(k1);
  h1.check_same(h2);
  h1.check_same(k2);
  const double tbar = mean(s.theta);
  double e2 = 0.0, f2 = 0.0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    const double u = s.psi[i], v = s.theta[i];
    e2 += m.phi.d2(u) * h1[i] * h2[i] + m.d2beta(v) * k1[i] * k2[i];
    f2 += m.lambda.d2(u) * h1[i] * h2[i] + m.b.d2(v) * k1[i] * k2[i];
  }
  const double vol = s.grid().cell_volume();
  e2 = e2 * vol + grad_inner(h1, h2);
  f2 *= vol;
  return e2 - mean(k1) * enthalpy_derivative(s, h2, k2, m) - mean(k2) * enthalpy_derivative(s, h1, k1, m) -
         tbar * f2;
}

}  // namespace cpf
