#include "cpf/constitutive.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace cpf {
namespace {

TEST(DefaultModel, DoubleWellValues) {
  const ModelFunctions m = make_default_model();
  EXPECT_EQ(m.phi.f(1.0), 0.0);
  EXPECT_EQ(m.phi.f(-1.0), 0.0);
  EXPECT_EQ(m.phi.d1(1.0), 0.0);
  EXPECT_EQ(m.phi.d1(-1.0), 0.0);
  EXPECT_EQ(m.phi.f(0.0), 1.0);
  EXPECT_EQ(m.phi.d2(0.0), -4.0);
  EXPECT_EQ(m.phi.d2(1.0), 8.0);
}

TEST(DefaultModel, InverseTemperatureEnthalpy) {
  const ModelFunctions m = make_default_model();
  EXPECT_DOUBLE_EQ(m.b.f(2.0), -0.5);
  EXPECT_DOUBLE_EQ(m.b.d1(2.0), 0.25);
  EXPECT_DOUBLE_EQ(m.b.d2(2.0), -0.25);
  EXPECT_NEAR(m.beta(2.0), 0.693147180559945, 1e-15);
  EXPECT_EQ(m.beta(1.0), 0.0);
  EXPECT_DOUBLE_EQ(m.a(3.0), 9.0);
  EXPECT_DOUBLE_EQ(m.dbeta(4.0), 0.25);
}

TEST(DefaultModel, LambdaCoefficients) {
  const ModelFunctions m = make_default_model({0.5, -1.0, 2.0});
  EXPECT_DOUBLE_EQ(m.lambda.f(2.0), 0.5 - 2.0 + 8.0);
  EXPECT_DOUBLE_EQ(m.lambda.d1(2.0), -1.0 + 8.0);
  EXPECT_DOUBLE_EQ(m.lambda.d2(2.0), 4.0);
  EXPECT_DOUBLE_EQ(m.lambda.d3(2.0), 0.0);
}

TEST(ModelConfig, RejectsDisallowedSelections) {
  ModelConfig c;
  c.lambda_coeffs = {0.0, 0.0, 0.0, 1.0};
  EXPECT_THROW(make_model(c), std::invalid_argument);
  c.lambda_coeffs = {0.0, 1.0};
  c.phi = PhiKind::polynomial;
  c.phi_coeffs = {0.0, 0.0, 0.0, 1.0};  // odd degree: unbounded below
  EXPECT_THROW(make_model(c), std::invalid_argument);
  c.phi_coeffs = {1.0, 0.0, -2.0, 0.0, 1.0};  // (s^2-1)^2 expanded
  const ModelFunctions m = make_model(c);
  EXPECT_DOUBLE_EQ(m.phi.f(0.5), std::pow(0.25 - 1.0, 2));
}

// Every supplied derivative agrees with central differences of its parent.
TEST(ModelFunctions, DerivativeConsistency) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> us(-2.0, 2.0), ut(0.2, 5.0);
  ModelConfig log_cfg;
  log_cfg.b = BKind::log;
  for (const ModelFunctions& m : {make_default_model({0.3, -0.7, 1.5}), make_model(log_cfg)}) {
    auto check = [](const ScalarFn& f, const ScalarFn& df, double x) {
      const double h = 1e-5 * std::max(1.0, std::abs(x));
      const double fd = (f(x + h) - f(x - h)) / (2 * h);
      EXPECT_LE(std::abs(fd - df(x)), 1e-6 * std::max(1.0, std::abs(df(x)))) << "at " << x;
    };
    for (int s = 0; s < 200; ++s) {
      const double x = us(rng), v = ut(rng);
      check(m.phi.f, m.phi.d1, x);
      check(m.phi.d1, m.phi.d2, x);
      check(m.phi.d2, m.phi.d3, x);
      check(m.lambda.f, m.lambda.d1, x);
      check(m.lambda.d1, m.lambda.d2, x);
      check(m.b.f, m.b.d1, v);
      check(m.b.d1, m.b.d2, v);
      check(m.beta, [&](double t) { return t * m.b.d1(t); }, v);
      EXPECT_NEAR(m.a(v) * m.b.d1(v), 1.0, 1e-15);
      EXPECT_NEAR(m.d2beta(v), m.b.d1(v) + v * m.b.d2(v), 1e-15);
    }
  }
}

TEST(ModelFunctions, InvertB) {
  const ModelFunctions m = make_default_model();
  EXPECT_DOUBLE_EQ(*m.invert_b(-0.5), 2.0);
  EXPECT_FALSE(m.invert_b(0.0).has_value());
  EXPECT_FALSE(m.invert_b(0.3).has_value());
  // Generic path (no closed-form inverse) agrees with bisection.
  ModelFunctions generic = m;
  generic.b_inverse = nullptr;
  for (double w : {-10.0, -1.0, -0.1, -0.003}) {
    const double ref = oracle::bisect([&](double s) { return m.b.f(s) - w; }, 1e-6, 1e6);
    EXPECT_NEAR(*generic.invert_b(w, 1.0), ref, 1e-10 * ref);
  }
  EXPECT_FALSE(generic.invert_b(0.5, 1.0).has_value());
}

TEST(Hypotheses, DefaultModelPasses) {
  const Grid g = Grid::line(64, 8.0);
  const auto rep = check_hypotheses(make_default_model(), {-2.0, 2.0}, {0.5, 2.0}, g);
  EXPECT_TRUE(rep.all_passed());
  const auto* h3 = rep.find("H3.b_prime_positive");
  ASSERT_NE(h3, nullptr);
  EXPECT_DOUBLE_EQ(h3->worst_margin, 0.25);
  EXPECT_DOUBLE_EQ(h3->witness, 2.0);
}

TEST(Hypotheses, CubicLambdaFailsBoundedness) {
  ModelFunctions m = make_default_model();
  m.lambda = Polynomial{{0.0, 0.0, 0.0, 1.0}}.as_smooth();
  const auto rep = check_hypotheses(m, {-2.0, 2.0}, {0.5, 2.0}, Grid::line(16, 1.0));
  EXPECT_FALSE(rep.all_passed());
  EXPECT_FALSE(rep.find("H2.lambda2_bounded")->passed);
  EXPECT_TRUE(rep.find("H2.lambda3_bounded")->passed);  // lambda''' = 6 is bounded
}

TEST(Hypotheses, EtaAndLowerBound) {
  const Grid g = Grid::line(64, 2.0);  // lambda_1 = (pi/2)^2 ~ 2.47
  HypothesisParams p;
  p.eta = 3.0;
  auto rep = check_hypotheses(make_default_model(), {-2.0, 2.0}, {0.5, 2.0}, g, p);
  EXPECT_FALSE(rep.find("H1.eta_below_lambda1")->passed);
  // A potential unbounded below on the range violates the lower bound.
  ModelFunctions m = make_default_model();
  m.phi = Polynomial{{0.0, 0.0, -5.0}}.as_smooth();
  p.eta = 1.0;
  rep = check_hypotheses(m, {-2.0, 2.0}, {0.5, 2.0}, g, p);
  const auto* lb = rep.find("H1.phi_lower_bound");
  EXPECT_FALSE(lb->passed);
  EXPECT_DOUBLE_EQ(std::abs(lb->witness), 2.0);
}

TEST(Hypotheses, RejectsEmptyRanges) {
  const Grid g = Grid::line(4, 1.0);
  const ModelFunctions m = make_default_model();
  EXPECT_THROW(check_hypotheses(m, {1.0, 1.0}, {0.5, 2.0}, g), std::invalid_argument);
  EXPECT_THROW(check_hypotheses(m, {-1.0, 1.0}, {2.0, 0.5}, g), std::invalid_argument);
  EXPECT_THROW(check_hypotheses(m, {-1.0, 1.0}, {-1.0, 2.0}, g), std::invalid_argument);
}

}  // namespace
}  // namespace cpf
