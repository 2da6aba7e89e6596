// Test-only reference implementations. Everything here is written against
// dense matrices and explicit loops so it shares no code path with the
// library's face-based operators or sparse solvers.
#pragma once

#include "cpf/constitutive.hpp"
#include "cpf/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace cpf::oracle {

/// Dense Neumann Laplacian from the textbook stencil with mirror ghosts.
inline Eigen::MatrixXd dense_laplacian(const Grid& g) {
  const int nx = g.cells(0);
  const int ny = g.dim() == 2 ? g.cells(1) : 1;
  const int n = nx * ny;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const double ix2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double iy2 = g.dim() == 2 ? 1.0 / (g.spacing(1) * g.spacing(1)) : 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int c = j * nx + i;
      // Ghost value equals the interior neighbour, so a missing neighbour is replaced by the cell itself.
      const int w = i > 0 ? c - 1 : c, e = i < nx - 1 ? c + 1 : c;
      a(c, w) += ix2;
      a(c, e) += ix2;
      a(c, c) -= 2 * ix2;
      if (g.dim() == 2) {
        const int s = j > 0 ? c - nx : c, nn = j < ny - 1 ? c + nx : c;
        a(c, s) += iy2;
        a(c, nn) += iy2;
        a(c, c) -= 2 * iy2;
      }
    }
  return a;
}

inline Eigen::VectorXd vec(const Field& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) v[static_cast<Eigen::Index>(i)] = f[i];
  return v;
}

inline Field field(const Grid& g, const Eigen::VectorXd& v) {
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = v[static_cast<Eigen::Index>(i)];
  return f;
}

struct DenseStep {
  Eigen::VectorXd psi, theta;
  int iterations = 0;
  double residual = 0.0;
};

/// Backward-Euler step by undamped dense Newton with a dense analytic Jacobian
/// and full-pivoting LU, iterated to round-off.
inline DenseStep dense_newton_step(const Grid& g, const Eigen::VectorXd& psi0, const Eigen::VectorXd& theta0,
                                   double dt, const ModelFunctions& m) {
  const Eigen::MatrixXd a = dense_laplacian(g);
  const Eigen::Index n = psi0.size();
  auto apply = [](const ScalarFn& f, const Eigen::VectorXd& x) {
    Eigen::VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return y;
  };
  auto residual = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& t) {
    const Eigen::VectorXd mu = -a * p + apply(m.phi.d1, p) - apply(m.lambda.d1, p).cwiseProduct(t);
    Eigen::VectorXd r(2 * n);
    r.head(n) = (p - psi0) / dt - a * mu;
    r.tail(n) = (apply(m.b.f, t) - apply(m.b.f, theta0) + apply(m.lambda.f, p) - apply(m.lambda.f, psi0)) / dt - a * t;
    return r;
  };
  DenseStep out{psi0, theta0, 0, 0.0};
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd r = residual(out.psi, out.theta);
    out.residual = r.lpNorm<Eigen::Infinity>();
    if (out.residual < 1e-13 && it > 0) break;
    const Eigen::VectorXd curv = apply(m.phi.d2, out.psi) - apply(m.lambda.d2, out.psi).cwiseProduct(out.theta);
    const Eigen::VectorXd dl = apply(m.lambda.d1, out.psi);
    Eigen::MatrixXd j(2 * n, 2 * n);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    j.topLeftCorner(n, n) = eye / dt - a * (-a + Eigen::MatrixXd(curv.asDiagonal()));
    j.topRightCorner(n, n) = a * Eigen::MatrixXd(dl.asDiagonal());
    j.bottomLeftCorner(n, n) = Eigen::MatrixXd(dl.asDiagonal()) / dt;
    j.bottomRightCorner(n, n) = Eigen::MatrixXd(apply(m.b.d1, out.theta).asDiagonal()) / dt - a;
    const Eigen::VectorXd d = j.fullPivLu().solve(-r);
    out.psi += d.head(n);
    out.theta += d.tail(n);
    out.iterations = it + 1;
  }
  return out;
}

/// Root of an increasing function on [lo, hi] by bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline Field random_field(const Grid& g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u(rng);
  return f;
}

/// Sum of a few low cosine modes around `offset`.
inline Field smooth_random_field(const Grid& g, std::mt19937_64& rng, double offset, double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double c[3];
  for (double& x : c) x = amplitude * u(rng) / 3.0;
  const double pi = 3.14159265358979323846;
  return Field::sample(g, [&](double x, double y) {
    double v = offset;
    for (int k = 0; k < 3; ++k)
      v += c[k] * std::cos((k + 1) * pi * x / g.length(0)) * (g.dim() == 2 ? std::cos(k * pi * y / g.length(1)) : 1.0);
    return v;
  });
}

}  // namespace cpf::oracle
