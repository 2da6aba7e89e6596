// Time integration loop: repeated steps with ledger recording and optional
// early stop on equilibration.
#pragma once

#include "cpf/diagnostics.hpp"
#include "cpf/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

namespace cpf {

struct RunOptions {
  double t0 = 0.0;
  std::optional<double> convergence_tol;  // stop once the detector fires
  int convergence_window = 1;
  int max_dt_halvings = 3;  // split a step whose Newton solve fails, at most this deep
};

struct RunSummary {
  State final_state;
  Ledger ledger;
  double t = 0.0;
  std::size_t steps = 0;
  bool converged = false;
};

/// Observer sees (time at the new level, step result); returning false stops the run.
using StepObserver = std::function<bool(double, const StepResult&)>;

namespace detail {

inline StepResult step_with_halving(Stepper& stepper, const State& s, double dt, int depth) {
  try {
    return stepper.step(s, dt);
  } catch (const SolverError& e) {
    if (e.kind() != SolverFailure::newton_diverged || depth <= 0) throw;
  }
  StepResult a = step_with_halving(stepper, s, 0.5 * dt, depth - 1);
  StepResult b = step_with_halving(stepper, a.state, 0.5 * dt, depth - 1);
  b.dt = dt;
  b.newton_iters += a.newton_iters;
  b.dissipation_increment += a.dissipation_increment;
  return b;
}

}  // namespace detail

inline RunSummary run(const State& s0, double t_end, Stepper& stepper, const StepObserver& observer = {},
                      const RunOptions& opt = {}) {
  if (!(t_end >= opt.t0)) throw std::invalid_argument("t_end must not precede the start time");
  const ModelFunctions& m = stepper.model();
  RunSummary out;
  out.final_state = s0;
  out.t = opt.t0;
  record_initial(out.ledger, opt.t0, s0, m);

  // Same rule as convergence_detector, tracked incrementally on the newest row.
  int streak = 0;
  auto check_converged = [&] {
    if (!opt.convergence_tol) return false;
    const LedgerRow& r = out.ledger.back();
    streak = (r.grad_mu + r.grad_theta < *opt.convergence_tol) ? streak + 1 : 0;
    return streak >= std::max(1, opt.convergence_window);
  };
  if (check_converged()) {
    out.converged = true;
    return out;
  }

  const double dt = stepper.config().dt;
  const double span = t_end - opt.t0;
  const auto n_steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const double t_new = k == n_steps ? t_end : opt.t0 + static_cast<double>(k) * dt;
    StepResult r;
    try {
      r = detail::step_with_halving(stepper, out.final_state, t_new - out.t, opt.max_dt_halvings);
    } catch (const SolverError& e) {
      throw e.at_time(out.t);
    }
    record(out.ledger, t_new, r, m);
    out.final_state = r.state;
    out.t = t_new;
    out.steps = k;
    const bool keep_going = observer ? observer(t_new, r) : true;
    if (check_converged()) {
      out.converged = true;
      break;
    }
    if (!keep_going) break;
  }
  return out;
}

inline RunSummary run(const State& s0, double t_end, const StepperConfig& cfg, const ModelFunctions& m,
                      const StepObserver& observer = {}, const RunOptions& opt = {}) {
  Stepper stepper(s0.grid(), cfg, m);
  return run(s0, t_end, stepper, observer, opt);
}

}  // namespace cpf
