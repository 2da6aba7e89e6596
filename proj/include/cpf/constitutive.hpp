// Model functions Phi (bulk potential), lambda (phase/heat coupling) and
// b (enthalpy in terms of inverse temperature), plus the induced beta and a.
#pragma once

#include "cpf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpf {

using ScalarFn = std::function<double(double)>;

/// A scalar function together with its derivatives. d3 may be empty.
struct Smooth {
  ScalarFn f, d1, d2, d3;
};

/// Dense polynomial c[0] + c[1] s + c[2] s^2 + ...
struct Polynomial {
  std::vector<double> coeffs;

  int degree() const {
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k)
      if (coeffs[k] != 0.0) return k;
    return 0;
  }

  double derivative(double s, int order) const {
    double acc = 0.0;
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= order; --k) {
      double c = coeffs[k];
      for (int j = 0; j < order; ++j) c *= (k - j);
      acc = acc * s + c;
    }
    return acc;
  }

  double operator()(double s) const { return derivative(s, 0); }

  Smooth as_smooth() const {
    Polynomial p = *this;
    return {[p](double s) { return p.derivative(s, 0); }, [p](double s) { return p.derivative(s, 1); },
            [p](double s) { return p.derivative(s, 2); }, [p](double s) { return p.derivative(s, 3); }};
  }
};

/// The constitutive triple with the derived quantities beta' = s b'(s) and a = 1/b'.
struct ModelFunctions {
  Smooth phi;
  Smooth lambda;
  Smooth b;  // defined on (0, inf); b.d3 unused
  ScalarFn beta;
  /// Exact inverse of b when known; nullopt for values outside the range of b on (0, inf).
  std::function<std::optional<double>(double)> b_inverse;

  double dbeta(double s) const { return s * b.d1(s); }
  double d2beta(double s) const { return b.d1(s) + s * b.d2(s); }
  double a(double s) const { return 1.0 / b.d1(s); }

  /// Solves b(s) = target for s > 0, starting from guess.
  std::optional<double> invert_b(double target, double guess = 1.0) const {
    if (b_inverse) return b_inverse(target);
    // b is strictly increasing: safeguarded Newton in log s keeps iterates positive.
    double s = guess > 0.0 ? guess : 1.0;
    for (int it = 0; it < 200; ++it) {
      const double r = b.f(s) - target;
      if (std::abs(r) <= 1e-15 * (1.0 + std::abs(target))) return s;
      double step = -r / (s * b.d1(s));
      step = std::clamp(step, -2.0, 2.0);
      s *= std::exp(step);
      if (!std::isfinite(s) || s <= 0.0 || s > 1e300) return std::nullopt;
    }
    const double r = b.f(s) - target;
    if (std::abs(r) <= 1e-12 * (1.0 + std::abs(target))) return s;
    return std::nullopt;
  }
};

enum class PhiKind { double_well, polynomial };
enum class BKind { inverse, log };

/// Selection of model functions by name and coefficients.
struct ModelConfig {
  PhiKind phi = PhiKind::double_well;
  std::vector<double> phi_coeffs;             // used for PhiKind::polynomial
  std::vector<double> lambda_coeffs{0.0, 0.0, 1.0};  // lambda(s) = s^2
  BKind b = BKind::inverse;
};

/// Phi(s) = (s^2 - 1)^2.
inline Smooth double_well() {
  return {[](double s) { const double q = s * s - 1.0; return q * q; },
          [](double s) { return 4.0 * s * (s * s - 1.0); },
          [](double s) { return 12.0 * s * s - 4.0; },
          [](double s) { return 24.0 * s; }};
}

/// b(s) = -1/s, so beta(s) = ln s and a(s) = s^2.
inline void set_inverse_b(ModelFunctions& m) {
  m.b = {[](double s) { return -1.0 / s; }, [](double s) { return 1.0 / (s * s); },
         [](double s) { return -2.0 / (s * s * s); }, {}};
  m.beta = [](double s) { return std::log(s); };
  m.b_inverse = [](double w) -> std::optional<double> {
    if (!(w < 0.0)) return std::nullopt;
    return -1.0 / w;
  };
}

/// b(s) = ln s, so beta(s) = s - 1 and a(s) = s.
inline void set_log_b(ModelFunctions& m) {
  m.b = {[](double s) { return std::log(s); }, [](double s) { return 1.0 / s; },
         [](double s) { return -1.0 / (s * s); }, {}};
  m.beta = [](double s) { return s - 1.0; };
  m.b_inverse = [](double w) -> std::optional<double> { return std::exp(w); };
}

/// Double well, quadratic lambda with the given coefficients, b(s) = -1/s.
inline ModelFunctions make_default_model(std::vector<double> lambda_coeffs = {0.0, 0.0, 1.0}) {
  ModelFunctions m;
  m.phi = double_well();
  m.lambda = Polynomial{std::move(lambda_coeffs)}.as_smooth();
  set_inverse_b(m);
  return m;
}

inline ModelFunctions make_model(const ModelConfig& cfg) {
  if (Polynomial{cfg.lambda_coeffs}.degree() > 2 || cfg.lambda_coeffs.size() > 3)
    throw std::invalid_argument("lambda must be a polynomial of degree at most 2");
  ModelFunctions m;
  switch (cfg.phi) {
    case PhiKind::double_well: m.phi = double_well(); break;
    case PhiKind::polynomial: {
      const Polynomial p{cfg.phi_coeffs};
      const int deg = p.degree();
      // Even degree at most 4 with positive leading coefficient: bounded below, Phi''' grows at most linearly.
      if (deg > 4 || deg % 2 != 0 || (deg > 0 && p.coeffs[deg] <= 0.0))
        throw std::invalid_argument("polynomial Phi must have even degree <= 4 and positive leading coefficient");
      m.phi = p.as_smooth();
      break;
    }
  }
  m.lambda = Polynomial{cfg.lambda_coeffs}.as_smooth();
  if (cfg.b == BKind::inverse)
    set_inverse_b(m);
  else
    set_log_b(m);
  return m;
}

/// lambda - shift. Trajectories are unchanged; shift = F/|Omega| of a state
/// makes F vanish along its run.
inline ModelFunctions with_lambda_shift(ModelFunctions m, double shift) {
  ScalarFn f = m.lambda.f;
  m.lambda.f = [f, shift](double s) { return f(s) - shift; };
  return m;
}

// ---------------------------------------------------------------------------
// Hypothesis checks (sampling based).

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct HypothesisCheck {
  std::string name;
  bool passed = false;
  double worst_margin = 0.0;  // min over samples of the quantity that must be >= 0
  double witness = 0.0;       // sample point attaining worst_margin
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;

  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
  const HypothesisCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct HypothesisParams {
  double eta = 0.0;       // Phi(s) >= -eta/2 s^2 - c1
  double c1 = 0.0;
  int samples = 2001;
  double growth_tol = 0.01;  // relative growth of sup|lambda''| on doubled ranges flagged as unbounded
};

/// Sampled checks of the structural hypotheses on Phi, lambda and b. eta is
/// compared against the first nonzero Neumann eigenvalue of the grid's domain.
inline HypothesisReport check_hypotheses(const ModelFunctions& m, Interval psi, Interval theta, const Grid& grid,
                                         const HypothesisParams& p = {}) {
  if (!(psi.hi > psi.lo) || !(theta.hi > theta.lo)) throw std::invalid_argument("empty sampling range");
  if (!(theta.lo > 0.0)) throw std::invalid_argument("theta range must lie in (0, inf)");
  if (p.samples < 2) throw std::invalid_argument("need at least two samples");

  auto sweep = [&](Interval r, auto&& margin) {
    HypothesisCheck c;
    c.worst_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < p.samples; ++k) {
      const double s = r.lo + (r.hi - r.lo) * k / (p.samples - 1);
      const double v = margin(s);
      if (!(v >= c.worst_margin)) {
        c.worst_margin = v;
        c.witness = s;
      }
    }
    c.passed = c.worst_margin >= 0.0;
    return c;
  };

  HypothesisReport rep;

  auto h1 = sweep(psi, [&](double s) { return m.phi.f(s) + 0.5 * p.eta * s * s + p.c1; });
  h1.name = "H1.phi_lower_bound";
  rep.checks.push_back(h1);

  const double lambda1 = grid.first_neumann_eigenvalue();
  HypothesisCheck eta{"H1.eta_below_lambda1", p.eta < lambda1, lambda1 - p.eta, p.eta};
  rep.checks.push_back(eta);

  // H2: sup|lambda''| and sup|lambda'''| must not keep growing as the range expands.
  auto growth_check = [&](const std::string& name, const ScalarFn& fn) {
    const double mid = 0.5 * (psi.lo + psi.hi);
    const double half = 0.5 * (psi.hi - psi.lo);
    double prev = 0.0;
    HypothesisCheck c{name, true, std::numeric_limits<double>::infinity(), mid};
    for (int level = 0; level < 4; ++level) {
      const double w = half * std::ldexp(1.0, level);
      double sup = 0.0, arg = mid;
      for (int k = 0; k < p.samples; ++k) {
        const double s = mid - w + 2.0 * w * k / (p.samples - 1);
        const double v = std::abs(fn(s));
        if (v > sup) {
          sup = v;
          arg = s;
        }
      }
      if (level > 0) {
        const double margin = (1.0 + p.growth_tol) * prev + 1e-12 - sup;
        if (margin < c.worst_margin) {
          c.worst_margin = margin;
          c.witness = arg;
        }
      }
      prev = sup;
    }
    c.passed = c.worst_margin >= 0.0;
    return c;
  };
  rep.checks.push_back(growth_check("H2.lambda2_bounded", m.lambda.d2));
  if (m.lambda.d3) rep.checks.push_back(growth_check("H2.lambda3_bounded", m.lambda.d3));

  auto h3 = sweep(theta, [&](double s) { return m.b.d1(s); });
  h3.name = "H3.b_prime_positive";
  h3.passed = h3.worst_margin > 0.0;
  rep.checks.push_back(h3);

  return rep;
}

}  // namespace cpf
