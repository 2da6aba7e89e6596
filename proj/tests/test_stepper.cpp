#include "cpf/run.hpp"
#include "cpf/steady.hpp"
#include "cpf/stepper.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

namespace cpf {
namespace {

State smooth_state(const Grid& g, double length) {
  const double k = std::numbers::pi / length;
  return State(Field::sample(g, [&](double x, double) { return 0.2 * std::cos(k * x) + 0.1 * std::cos(2 * k * x); }),
               Field(g, 1.0));
}

State noisy_state(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Field psi = oracle::random_field(g, rng, -0.05, 0.05);
  Field theta = oracle::random_field(g, rng, 0.9, 1.1);
  return State(std::move(psi), std::move(theta));
}

TEST(Stepper, ConfigValidation) {
  StepperConfig c;
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.newton_tol = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  const Grid g = Grid::line(4, 1.0);
  Stepper st(g, c, make_default_model());
  EXPECT_THROW(st.step(State::constant(Grid::line(5, 1.0), 0.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(st.step(State::constant(g, 0.0, 1.0), -1e-3), std::invalid_argument);
}

TEST(Stepper, ConstantStateIsFixedPoint) {
  const Grid g = Grid::rect(6, 5, 1.0, 1.0);
  for (Scheme scheme : {Scheme::fully_implicit, Scheme::imex}) {
    StepperConfig c;
    c.scheme = scheme;
    c.dt = 0.01;
    const State s0 = State::constant(g, 0.3, 1.7);
    const StepResult r = step(s0, c, make_default_model());
    EXPECT_LT(max_abs(r.state.psi - s0.psi), 1e-13);
    EXPECT_LT(max_abs(r.state.theta - s0.theta), 1e-13);
    EXPECT_LT(r.dissipation_increment, 1e-20);
  }
}

TEST(Stepper, AgreesWithDenseNewtonOracle) {
  const Grid g = Grid::line(4, 2.0);
  const ModelFunctions m = make_default_model({0.1, 0.3, 1.0});
  const Field psi0(g, {0.4, -0.2, 0.7, -0.5});
  const Field theta0(g, {1.2, 0.8, 1.0, 1.5});
  for (double dt : {1e-3, 1e-2, 0.1}) {
    StepperConfig c;
    c.dt = dt;
    c.newton_tol = 1e-13;
    const StepResult r = step(State(psi0, theta0), c, m);
    const oracle::DenseStep ref = oracle::dense_newton_step(g, oracle::vec(psi0), oracle::vec(theta0), dt, m);
    ASSERT_LT(ref.residual, 1e-12);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(r.state.psi[i], ref.psi[static_cast<Eigen::Index>(i)], 1e-12) << "dt " << dt;
      EXPECT_NEAR(r.state.theta[i], ref.theta[static_cast<Eigen::Index>(i)], 1e-12) << "dt " << dt;
    }
  }
}

TEST(Stepper, JacobianMatchesResidualDifferences) {
  const Grid g = Grid::rect(4, 3, 1.0, 0.8);
  const ModelFunctions m = make_default_model({0.0, 0.5, 1.0});
  const State old = noisy_state(g, 9);
  const State cur = noisy_state(g, 10);
  StepperConfig c;
  Stepper st(g, c, m);
  const double dt = 0.05;
  const Eigen::MatrixXd j = Eigen::MatrixXd(st.jacobian(cur.psi, cur.theta, dt));
  const auto n = static_cast<Eigen::Index>(g.size());
  const double eps = 1e-6;
  for (Eigen::Index col = 0; col < 2 * n; ++col) {
    Field pp = cur.psi, pm = cur.psi, tp = cur.theta, tm = cur.theta;
    const auto c0 = static_cast<std::size_t>(col % n);
    if (col < n) {
      pp[c0] += eps;
      pm[c0] -= eps;
    } else {
      tp[c0] += eps;
      tm[c0] -= eps;
    }
    const Eigen::VectorXd fd = (st.residual(old, pp, tp, dt) - st.residual(old, pm, tm, dt)) / (2 * eps);
    EXPECT_LT((fd - j.col(col)).lpNorm<Eigen::Infinity>(), 1e-5 * std::max(1.0, j.col(col).lpNorm<Eigen::Infinity>()))
        << "column " << col;
  }
}

TEST(Stepper, ConservesMassAndEnthalpy) {
  const ModelFunctions m = make_default_model();
  for (const Grid& g : {Grid::line(64, 8.0), Grid::rect(12, 10, 3.0, 2.5)}) {
    for (Scheme scheme : {Scheme::fully_implicit, Scheme::imex}) {
      StepperConfig c;
      c.scheme = scheme;
      c.dt = 1e-3;
      Stepper st(g, c, m);
      State s = noisy_state(g, 77);
      const double mass0 = mean(s.psi), f0 = conserved_f(s, m);
      for (int k = 0; k < 50; ++k) s = st.step(s).state;
      EXPECT_LE(std::abs(mean(s.psi) - mass0), 1e-11);
      EXPECT_LE(std::abs(conserved_f(s, m) - f0), 1e-9);
    }
  }
}

TEST(Stepper, FirstOrderInTime) {
  const double length = 4.0, t_end = 0.2;
  const Grid g = Grid::line(32, length);
  const ModelFunctions m = make_default_model();
  const State s0 = smooth_state(g, length);
  auto solve = [&](double dt) {
    StepperConfig c;
    c.dt = dt;
    return run(s0, t_end, c, m).final_state;
  };
  const std::vector<double> dts{0.02, 0.01, 0.005};
  const State ref = solve(dts.front() / 64);
  std::vector<double> err;
  for (double dt : dts) {
    const State s = solve(dt);
    err.push_back(std::max(max_abs(s.psi - ref.psi), max_abs(s.theta - ref.theta)));
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_GT(std::log2(err[i - 1] / err[i]), 0.8);
}

TEST(Stepper, ImexAndImplicitConvergeTogether) {
  const double length = 4.0;
  const Grid g = Grid::line(32, length);
  const ModelFunctions m = make_default_model();
  const State s0 = smooth_state(g, length);
  auto gap = [&](double dt) {
    StepperConfig ci, ce;
    ci.dt = ce.dt = dt;
    ce.scheme = Scheme::imex;
    const State a = run(s0, 0.1, ci, m).final_state;
    const State b = run(s0, 0.1, ce, m).final_state;
    return std::max(max_abs(a.psi - b.psi), max_abs(a.theta - b.theta));
  };
  const double coarse = gap(2e-3), fine = gap(1e-3);
  EXPECT_LT(fine, 1e-2);
  EXPECT_GT(coarse / fine, 1.6);
}

TEST(Stepper, NewtonBudgetExhaustionIsReported) {
  const Grid g = Grid::line(16, 2.0);
  StepperConfig c;
  c.dt = 0.5;
  c.max_newton_iters = 1;
  c.newton_tol = 1e-14;
  try {
    step(noisy_state(g, 3), c, make_default_model());
    FAIL() << "expected a solver error";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverFailure::newton_diverged);
  }
}

TEST(Run, StepCountAndShortenedFinalStep) {
  const Grid g = Grid::line(16, 2.0);
  StepperConfig c;
  c.dt = 0.03;
  std::vector<double> seen;
  const auto obs = [&](double t, const StepResult&) {
    seen.push_back(t);
    return true;
  };
  const RunSummary s = run(smooth_state(g, 2.0), 0.1, c, make_default_model(), obs);
  ASSERT_EQ(s.steps, 4u);
  EXPECT_EQ(s.ledger.size(), 5u);
  EXPECT_EQ(s.t, 0.1);
  EXPECT_EQ(seen.back(), 0.1);
  EXPECT_NEAR(seen[2], 0.09, 1e-15);
  // Observer may stop the run.
  const RunSummary early =
      run(smooth_state(g, 2.0), 0.1, c, make_default_model(), [](double, const StepResult&) { return false; });
  EXPECT_EQ(early.steps, 1u);
}

TEST(Run, StopsWhenEquilibrated) {
  const Grid g = Grid::line(16, 2.0);
  StepperConfig c;
  c.dt = 0.01;
  RunOptions opt;
  opt.convergence_tol = 1e-6;
  // Already at rest: detector fires on the initial row.
  const RunSummary rest = run(State::constant(g, 0.2, 1.0), 1.0, c, make_default_model(), {}, opt);
  EXPECT_TRUE(rest.converged);
  EXPECT_EQ(rest.steps, 0u);
  opt.convergence_tol = 1e-3;
  const RunSummary relax = run(smooth_state(g, 2.0), 50.0, c, make_default_model(), {}, opt);
  EXPECT_TRUE(relax.converged);
  EXPECT_LT(relax.t, 50.0);
  EXPECT_LT(relax.ledger.back().grad_mu + relax.ledger.back().grad_theta, 1e-3);
}

TEST(Run, FailureCarriesTime) {
  const Grid g = Grid::line(16, 2.0);
  StepperConfig c;
  c.dt = 0.5;
  c.max_newton_iters = 1;
  c.newton_tol = 1e-14;
  RunOptions opt;
  opt.max_dt_halvings = 0;
  try {
    run(noisy_state(g, 3), 1.0, c, make_default_model(), {}, opt);
    FAIL() << "expected a solver error";
  } catch (const SolverError& e) {
    ASSERT_TRUE(e.time().has_value());
    EXPECT_EQ(*e.time(), 0.0);
  }
}

TEST(Run, ZeroDurationTakesNoSteps) {
  const Grid g = Grid::line(16, 2.0);
  const State s0 = noisy_state(g, 1);
  const RunSummary s = run(s0, 0.0, StepperConfig{}, make_default_model());
  EXPECT_EQ(s.steps, 0u);
  EXPECT_EQ(s.ledger.size(), 1u);
  EXPECT_EQ(max_abs(s.final_state.psi - s0.psi), 0.0);
  EXPECT_EQ(max_abs(s.final_state.theta - s0.theta), 0.0);
  EXPECT_THROW(run(s0, -1.0, StepperConfig{}, make_default_model()), std::invalid_argument);
}

TEST(Run, MassDriftAfterHundredSteps) {
  const ModelFunctions m = make_default_model({0.3, 0.5, 1.0});
  for (const Grid& g : {Grid::line(64, 8.0), Grid::line(32, 4.0), Grid::rect(10, 12, 2.0, 2.4)}) {
    for (Scheme scheme : {Scheme::fully_implicit, Scheme::imex}) {
      StepperConfig c;
      c.scheme = scheme;
      c.dt = 2e-3;
      State s0 = noisy_state(g, 31);
      Field shifted = s0.psi;
      shifted += 0.2;
      s0 = State(shifted, s0.theta);
      const RunSummary r = run(s0, 100 * c.dt, c, m);
      EXPECT_EQ(r.steps, 100u);
      EXPECT_LE(std::abs(mean(r.final_state.psi) - mean(s0.psi)), 1e-12);
    }
  }
}

TEST(Run, SpinodalEnergyIsNonincreasing) {
  const ModelFunctions m = make_default_model();
  for (double dt : {1e-3, 4e-3}) {
    const Grid g = Grid::line(64, 8.0);
    StepperConfig c;
    c.dt = dt;
    const RunSummary r = run(noisy_state(g, 12), 500 * dt, c, m);
    double worst = -1.0;
    for (std::size_t i = 1; i < r.ledger.size(); ++i) worst = std::max(worst, r.ledger[i].energy - r.ledger[i - 1].energy);
    EXPECT_LE(worst, 1e-9) << "dt " << dt;
  }
}

TEST(Stepper, SteadyStateIsFixedPoint) {
  const Grid g = Grid::line(64, 8.0);
  const ModelFunctions m = make_default_model();
  SteadyProblem p{0.0, g.volume() * -0.5, g, m};
  SteadyState guess;
  guess.psi_inf = Field::sample(g, [](double x, double) { return std::tanh(2.0 * (x - 4.0)); });
  const SteadyState s = solve_steady(p, guess);
  StepperConfig c;
  c.dt = 0.01;
  const StepResult r = step(s.as_state(), c, m);
  EXPECT_LE(r.residual_norm, c.newton_tol);
  EXPECT_LE(max_abs(r.state.psi - s.psi_inf), c.newton_tol);
  EXPECT_LE(max_abs(r.state.theta - Field(g, s.theta_inf)), c.newton_tol);
}

}  // namespace
}  // namespace cpf
