// Self-check suite behind `cpf verify`: operator algebra, derivative and
// variational consistency, conservation, energy-balance refinement and the
// steady solver, each reported with its measured value and threshold.
#pragma once

#include "cpf/run.hpp"
#include "cpf/steady.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace cpf {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured worst case
  double threshold = 0.0;
  int samples = 0;
};

struct VerifyReport {
  int samples = 0;
  std::vector<VerifyCheck> checks;
  std::vector<std::string> warnings;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
  const VerifyCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["samples"] = samples;
    j["passed"] = passed();
    j["warnings"] = warnings;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
      j["checks"].push_back(
          {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}, {"samples", c.samples}});
    return j;
  }
};

struct VerifyOptions {
  int samples = 20;
  std::uint64_t seed = 0;
};

namespace detail {

inline Field random_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u(rng);
  return f;
}

/// Few-mode cosine series; smooth enough for finite-difference checks.
inline Field smooth_field(const Grid& g, std::mt19937_64& rng, double offset, double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<double, 4> a{};
  for (auto& x : a) x = amplitude * u(rng) / 2.0;
  return Field::sample(g, [&](double x, double y) {
    double v = offset;
    for (int k = 0; k < 4; ++k)
      v += a[k] * std::cos((k + 1) * std::numbers::pi * x / g.length(0)) *
           (g.dim() == 2 ? std::cos(k * std::numbers::pi * y / g.length(1)) : 1.0);
    return v;
  });
}

inline State shifted(const State& s, const Field& h, const Field& k, double eps) {
  State out = s;
  out.psi += eps * h;
  out.theta += eps * k;
  return out;
}

/// Root of the increasing function b - target by bisection in log s.
inline double bisect_b(const ModelFunctions& m, double target) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (m.b.f(std::exp(mid)) < target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace detail

inline VerifyReport run_verify(const ModelFunctions& m, const VerifyOptions& opt = {}) {
  VerifyReport rep;
  rep.samples = opt.samples;
  if (opt.samples <= 0) {
    rep.warnings.push_back("0 samples: every check is vacuous");
    return rep;
  }
  const int n = opt.samples;
  std::mt19937_64 rng(opt.seed);
  auto add = [&](std::string name, double value, double threshold, int samples, bool lower_is_better = true) {
    rep.checks.push_back({std::move(name), lower_is_better ? value <= threshold : value >= threshold, value, threshold, samples});
  };

  // Grid operator algebra.
  {
    double zero_sum = 0.0, symmetry = 0.0, sbp = 0.0;
    // Unit spacing, so the stencil weights are O(1) and the bounds are plain relative ones.
    for (const Grid& g : {Grid::line(64, 64.0), Grid::rect(32, 32, 32.0, 32.0)}) {
      for (int s = 0; s < n; ++s) {
        const Field f = detail::random_field(g, rng), h = detail::random_field(g, rng);
        const Field lf = neumann_laplacian(f);
        zero_sum = std::max(zero_sum, std::abs(integrate(lf)) / norm(f));
        symmetry = std::max(symmetry, std::abs(inner(lf, h) - inner(f, neumann_laplacian(h))) / (norm(f) * norm(h)));
        const double q = inner(-lf, f);
        sbp = std::max(sbp, std::abs(grad_sq_norm(f) - q) / std::abs(q));
      }
    }
    add("grid.zero_sum", zero_sum, 1e-12, 2 * n);
    add("grid.symmetry", symmetry, 1e-12, 2 * n);
    add("grid.summation_by_parts", sbp, 1e-12, 2 * n);
  }

  // Supplied derivatives against central differences.
  {
    std::uniform_real_distribution<double> us(-1.5, 1.5), ut(0.3, 3.0);
    double worst = 0.0;
    auto cmp = [&](const ScalarFn& f, const ScalarFn& df, double x) {
      if (!f || !df) return;
      const double h = 1e-5 * std::max(1.0, std::abs(x));
      const double fd = (f(x + h) - f(x - h)) / (2 * h);
      worst = std::max(worst, std::abs(fd - df(x)) / std::max(1.0, std::abs(df(x))));
    };
    for (int s = 0; s < n; ++s) {
      const double x = us(rng), v = ut(rng);
      cmp(m.phi.f, m.phi.d1, x);
      cmp(m.phi.d1, m.phi.d2, x);
      cmp(m.phi.d2, m.phi.d3, x);
      cmp(m.lambda.f, m.lambda.d1, x);
      cmp(m.lambda.d1, m.lambda.d2, x);
      cmp(m.lambda.d2, m.lambda.d3, x);
      cmp(m.b.f, m.b.d1, v);
      cmp(m.b.d1, m.b.d2, v);
      cmp(m.beta, [&](double t) { return m.dbeta(t); }, v);
    }
    add("model.derivative_consistency", worst, 1e-6, n);
  }

  // Variations of the Lagrangian.
  {
    const Grid g = Grid::line(32, 2.0);
    double grad_err = 0.0, hess_err = 0.0, sym_err = 0.0;
    for (int s = 0; s < n; ++s) {
      const State st(detail::smooth_field(g, rng, 0.1, 1.0), detail::smooth_field(g, rng, 1.2, 0.6));
      const Field h1 = detail::smooth_field(g, rng, 0.3, 1.0), k1 = detail::smooth_field(g, rng, 0.2, 0.5);
      const Field h2 = detail::smooth_field(g, rng, -0.2, 1.0), k2 = detail::smooth_field(g, rng, 0.1, 0.5);
      const double eps = 1e-5;
      const double fd = (lagrangian(detail::shifted(st, h1, k1, eps), m) - lagrangian(detail::shifted(st, h1, k1, -eps), m)) /
                        (2 * eps);
      grad_err = std::max(grad_err, std::abs(fd - lagrangian_gradient(st, m).apply(h1, k1)) / (1.0 + std::abs(fd)));
      const double hfd = (lagrangian_gradient(detail::shifted(st, h2, k2, eps), m).apply(h1, k1) -
                          lagrangian_gradient(detail::shifted(st, h2, k2, -eps), m).apply(h1, k1)) /
                         (2 * eps);
      const double h12 = lagrangian_hessian_action(st, h1, k1, h2, k2, m);
      const double h21 = lagrangian_hessian_action(st, h2, k2, h1, k1, m);
      hess_err = std::max(hess_err, std::abs(hfd - h12) / (1.0 + std::abs(hfd)));
      sym_err = std::max(sym_err, std::abs(h12 - h21) / (1.0 + std::abs(h12)));
    }
    add("state.gradient_fd", grad_err, 1e-6, n);
    add("state.hessian_fd", hess_err, 1e-4, n);
    add("state.hessian_symmetry", sym_err, 1e-12, n);
  }

  // Conservation along an implicit run.
  {
    const Grid g = Grid::line(64, 8.0);
    Field psi = detail::random_field(g, rng);
    psi *= 0.05;
    const State s0(std::move(psi), Field(g, 1.0));
    StepperConfig cfg;
    cfg.dt = 1e-3;
    try {
      const RunSummary r = run(s0, 50 * cfg.dt, cfg, m);
      double dm = 0.0, df = 0.0;
      for (const auto& row : r.ledger.rows()) {
        dm = std::max(dm, std::abs(row.mass - r.ledger[0].mass));
        df = std::max(df, std::abs(row.enthalpy - r.ledger[0].enthalpy));
      }
      add("stepper.mass_conservation", dm, 1e-11, 1);
      add("stepper.enthalpy_conservation", df, 1e-9, 1);
    } catch (const SolverError& e) {
      rep.warnings.push_back(std::string("conservation run failed: ") + e.what());
      add("stepper.mass_conservation", INFINITY, 1e-11, 1);
      add("stepper.enthalpy_conservation", INFINITY, 1e-9, 1);
    }
  }

  // Energy balance converges at first order in dt.
  {
    const Grid g = Grid::line(64, 4.0);
    const State s0(Field::sample(g, [](double x, double) { return 0.2 * std::cos(std::numbers::pi * x / 4.0); }),
                   Field(g, 1.0));
    std::vector<double> res;
    try {
      for (double dt : {4e-3, 2e-3, 1e-3}) {
        StepperConfig cfg;
        cfg.dt = dt;
        res.push_back(std::abs(run(s0, 0.1, cfg, m).ledger.back().identity_residual));
      }
      const double order = std::min(std::log2(res[0] / res[1]), std::log2(res[1] / res[2]));
      add("stepper.dissipation_identity_order", std::isfinite(order) ? order : 0.0, 0.9, 3, false);
    } catch (const SolverError& e) {
      rep.warnings.push_back(std::string("refinement run failed: ") + e.what());
      add("stepper.dissipation_identity_order", 0.0, 0.9, 3, false);
    }
  }

  // Steady solver: constant branch against bisection, fixed point of the stepper.
  {
    const Grid g = Grid::line(16, 1.0);
    std::uniform_real_distribution<double> um(-0.9, 0.9), ut(0.3, 3.0);
    double branch_err = 0.0, relation = 0.0;
    for (int s = 0; s < n; ++s) {
      const double m0 = um(rng), theta = ut(rng);
      const double h0 = g.volume() * (m.lambda.f(m0) + m.b.f(theta));
      const SteadyProblem p{m0, h0, g, m};
      try {
        SteadyState guess;
        guess.psi_inf = Field(g, m0);
        guess.theta_inf = 1.0;
        const SteadyState sol = solve_steady(p, guess);
        const double th = detail::bisect_b(m, h0 / g.volume() - m.lambda.f(m0));
        const double mu = m.phi.d1(m0) - m.lambda.d1(m0) * th;
        branch_err = std::max({branch_err, std::abs(sol.theta_inf - th) / std::max(1.0, th),
                               std::abs(sol.mu_inf - mu) / std::max(1.0, std::abs(mu)), max_abs(sol.psi_inf - Field(g, m0))});
        const double rel = mean_value_mu(sol.psi_inf, sol.theta_inf, m);
        relation = std::max(relation, std::abs(sol.mu_inf - rel) / std::max(1.0, std::abs(sol.mu_inf)));
      } catch (const SolverError& e) {
        branch_err = INFINITY;
        rep.warnings.push_back(std::string("steady solve failed: ") + e.what());
      }
    }
    add("steady.constant_branch", branch_err, 1e-12, n);
    add("steady.mean_value_relation", relation, 1e-12, n);

    try {
      const SteadyProblem p{0.3, g.volume() * (m.lambda.f(0.3) + m.b.f(1.5)), g, m};
      const SteadyState sol = solve_steady(p, constant_branch(p));
      StepperConfig cfg;
      const StepResult r = step(sol.as_state(), cfg, m);
      const double drift = std::max(max_abs(r.state.psi - sol.psi_inf), max_abs(r.state.theta - Field(g, sol.theta_inf)));
      add("steady.fixed_point", drift, cfg.newton_tol, 1);
    } catch (const SolverError& e) {
      rep.warnings.push_back(std::string("fixed-point check failed: ") + e.what());
      add("steady.fixed_point", INFINITY, 1e-10, 1);
    }
  }
  return rep;
}

}  // namespace cpf
