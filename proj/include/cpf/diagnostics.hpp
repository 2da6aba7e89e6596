// Per-step ledger of conserved quantities and the energy balance, the
// equilibration detector, and decay fitting of L(t) - L_inf.
#pragma once

#include "cpf/state.hpp"
#include "cpf/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cpf {

struct LedgerRow {
  double t = 0.0;
  double mass = 0.0;       // mean psi
  double enthalpy = 0.0;   // F
  double energy = 0.0;     // E
  double lagrangian = 0.0; // L
  double dissipation = 0.0;        // cumulative sum of increments
  double identity_residual = 0.0;  // E(t) + D(t) - E(0)
  double theta_min = 0.0;
  double theta_max = 0.0;
  double grad_mu = 0.0;     // |grad mu|_2
  double grad_theta = 0.0;  // |grad theta|_2
  int newton_iters = 0;
  // Not part of the CSV: spatial spreads used by the equilibration detector.
  double mu_spread = 0.0;
  double theta_spread = 0.0;
};

class Ledger {
 public:
  const std::vector<LedgerRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }
  const LedgerRow& back() const { return rows_.back(); }
  const LedgerRow& operator[](std::size_t i) const { return rows_[i]; }

  /// H3 monitor: max(max theta, 1/min theta) over all recorded rows.
  double kappa() const {
    double k = 1.0;
    for (const auto& r : rows_) k = std::max({k, r.theta_max, 1.0 / r.theta_min});
    return k;
  }
  /// True iff theta left [1/kappa_star, kappa_star] at some recorded row.
  bool violates_band(double kappa_star) const { return kappa() > kappa_star; }

  void push(LedgerRow row) { rows_.push_back(row); }

 private:
  std::vector<LedgerRow> rows_;
};

namespace detail {

inline LedgerRow measure(double t, const State& s, const Field& mu, const ModelFunctions& m) {
  LedgerRow r;
  r.t = t;
  r.mass = mean(s.psi);
  r.enthalpy = conserved_f(s, m);
  r.energy = energy(s, m);
  r.lagrangian = r.energy - mean(s.theta) * r.enthalpy;
  r.theta_min = s.theta.min();
  r.theta_max = s.theta.max();
  r.grad_mu = std::sqrt(grad_sq_norm(mu));
  r.grad_theta = std::sqrt(grad_sq_norm(s.theta));
  r.mu_spread = mu.max() - mu.min();
  r.theta_spread = r.theta_max - r.theta_min;
  return r;
}

}  // namespace detail

/// Records the initial state: zero dissipation and identically zero residual.
inline void record_initial(Ledger& ledger, double t, const State& s, const ModelFunctions& m) {
  if (!ledger.empty()) throw std::invalid_argument("initial row must be the first ledger row");
  LedgerRow r = detail::measure(t, s, chemical_potential(s, m), m);
  r.dissipation = 0.0;
  r.identity_residual = 0.0;
  ledger.push(r);
}

/// Appends the row for an accepted step ending at time t.
inline void record(Ledger& ledger, double t, const StepResult& result, const ModelFunctions& m) {
  if (ledger.empty()) throw std::invalid_argument("record_initial must precede record");
  const LedgerRow& prev = ledger.back();
  if (!(t > prev.t)) throw std::invalid_argument("ledger time must increase strictly");
  LedgerRow r = detail::measure(t, result.state, result.mu, m);
  r.dissipation = prev.dissipation + result.dissipation_increment;
  r.identity_residual = r.energy + r.dissipation - ledger[0].energy;
  r.newton_iters = result.newton_iters;
  ledger.push(r);
}

struct ConvergenceDecision {
  bool fired = false;
  std::size_t row = 0;  // first row of the qualifying window's end, when fired
  double t = 0.0;
  double mu_spread = 0.0;     // at that row (or the last row if not fired)
  double theta_spread = 0.0;
};

/// Fires when |grad mu| + |grad theta| < tol on `window` consecutive rows.
inline ConvergenceDecision convergence_detector(const Ledger& ledger, double tol, int window = 1) {
  if (ledger.empty()) throw std::invalid_argument("convergence_detector needs a nonempty ledger");
  if (window < 1) window = 1;
  ConvergenceDecision d;
  int run = 0;
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const auto& r = ledger[i];
    run = (r.grad_mu + r.grad_theta < tol) ? run + 1 : 0;
    if (run >= window) {
      d.fired = true;
      d.row = i;
      break;
    }
  }
  const auto& at = ledger[d.fired ? d.row : ledger.size() - 1];
  d.t = at.t;
  d.mu_spread = at.mu_spread;
  d.theta_spread = at.theta_spread;
  return d;
}

// ---------------------------------------------------------------------------
// Decay fitting.

enum class DecayModel { exponential, algebraic };

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rss = 0.0;  // residual sum of squares
};

inline LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    f.rss += e * e;
  }
  return f;
}

struct MonotonicityCheck {
  double exponent = 0.0;
  bool nonincreasing = false;
  double worst_increase = 0.0;  // max over steps of H(t_{i+1}) - H(t_i)
};

struct DecayFitReport {
  std::vector<MonotonicityCheck> monotonicity;  // s = 0.05, 0.10, ..., 0.50
  LineFit exponential;  // log(L - L_inf) against t: slope = -rate
  LineFit algebraic;    // log(L - L_inf) against log t: slope = -exponent
  double exponential_rate = 0.0;
  double algebraic_exponent = 0.0;
  DecayModel best = DecayModel::exponential;

  const MonotonicityCheck* at_exponent(double s) const {
    for (const auto& m : monotonicity)
      if (std::abs(m.exponent - s) < 1e-12) return &m;
    return nullptr;
  }
};

struct DecayFitOptions {
  double step_tol = 1e-10;   // allowed per-step increase of H
  std::size_t min_rows = 3;
};

/// Fits the decay of L(t) - e_inf over the given ledger rows.
inline DecayFitReport decay_fit(const std::vector<LedgerRow>& tail, double e_inf, const DecayFitOptions& opt = {}) {
  if (tail.size() < std::max<std::size_t>(opt.min_rows, 3)) throw std::invalid_argument("ledger tail too short for a decay fit");
  std::vector<double> t, logt, gap;
  for (const auto& r : tail) {
    const double g = r.lagrangian - e_inf;
    if (!(g > 0.0)) throw std::invalid_argument("L(t) - L_inf <= 0 on the tail: L_inf is overestimated");
    if (!(r.t > 0.0)) throw std::invalid_argument("decay fit requires t > 0 on the tail");
    t.push_back(r.t);
    logt.push_back(std::log(r.t));
    gap.push_back(g);
  }
  DecayFitReport rep;
  for (int k = 1; k <= 10; ++k) {
    MonotonicityCheck c;
    c.exponent = 0.05 * k;
    c.worst_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < gap.size(); ++i)
      c.worst_increase = std::max(c.worst_increase, std::pow(gap[i + 1], c.exponent) - std::pow(gap[i], c.exponent));
    c.nonincreasing = c.worst_increase <= opt.step_tol;
    rep.monotonicity.push_back(c);
  }
  std::vector<double> loggap(gap.size());
  std::transform(gap.begin(), gap.end(), loggap.begin(), [](double g) { return std::log(g); });
  rep.exponential = least_squares_line(t, loggap);
  rep.algebraic = least_squares_line(logt, loggap);
  rep.exponential_rate = -rep.exponential.slope;
  rep.algebraic_exponent = -rep.algebraic.slope;
  rep.best = rep.exponential.rss <= rep.algebraic.rss ? DecayModel::exponential : DecayModel::algebraic;
  return rep;
}

inline DecayFitReport decay_fit(const Ledger& ledger, double e_inf, const DecayFitOptions& opt = {}) {
  return decay_fit(ledger.rows(), e_inf, opt);
}

}  // namespace cpf
