#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lharg/model.hpp"
#include "lharg/simulator.hpp"

using namespace lharg;

namespace {

// Hand-rolled HAR lag weights: day 1 daily, days 2-5 weekly/4, days 6-22 monthly/17.
double har_weight(int lag, double d, double w, double m) {
  if (lag == 1) return d;
  if (lag <= 5) return w / 4.0;
  return m / 17.0;
}

// Direct noncentrality from native parameters and a lag history (index 0 = lag 1).
double theta_by_hand(const ModelParams& p, const std::vector<double>& rv,
                     const std::vector<double>& lev) {
  double s = p.d;
  for (int l = 1; l <= 22; ++l) {
    s += har_weight(l, p.beta_d, p.beta_w, p.beta_m) * rv[l - 1] +
         har_weight(l, p.alpha_d, p.alpha_w, p.alpha_m) * lev[l - 1];
  }
  return s;
}

}  // namespace

TEST(ModelParams, TabulatedPersistence) {
  EXPECT_NEAR(stationarity_margin(table1::harg()), 0.8532, 5e-4);
  EXPECT_NEAR(stationarity_margin(table1::plharg()), 0.8391, 5e-4);
  EXPECT_NEAR(stationarity_margin(table1::zmlharg()), 0.8116, 5e-4);
}

TEST(ModelParams, PersistenceFormula) {
  const ModelParams p = table1::plharg();
  const double expected =
      p.theta * (p.beta_d + p.beta_w + p.beta_m +
                 p.gamma * p.gamma * (p.alpha_d + p.alpha_w + p.alpha_m));
  EXPECT_NEAR(stationarity_margin(p), expected, 1e-14);
}

TEST(ModelParams, ValidationRejectsBadValues) {
  ModelParams p = table1::plharg();
  p.theta = 0.0;
  EXPECT_THROW(p.validate(), DomainError);
  p = table1::plharg();
  p.delta = -1.0;
  EXPECT_THROW(p.validate(), DomainError);
  p = table1::plharg();
  p.alpha_w = -0.1;
  EXPECT_THROW(p.validate(), DomainError);
  p = table1::harg();
  p.alpha_d = 0.1;
  EXPECT_THROW(p.validate(), DomainError);
  p = table1::zmlharg();
  p.beta_m = std::nan("");
  EXPECT_THROW(p.validate(), DomainError);
  // Zero-mean loadings carry no sign restriction.
  p = table1::zmlharg();
  p.alpha_m = -0.2;
  EXPECT_NO_THROW(p.validate());
}

TEST(ModelParams, VariantNames) {
  EXPECT_EQ(parse_variant("zm-lharg"), Variant::ZMLHARG);
  EXPECT_EQ(parse_variant("P_LHARG"), Variant::PLHARG);
  EXPECT_EQ(parse_variant(to_string(Variant::HARG)), Variant::HARG);
  EXPECT_THROW(parse_variant("garch"), DomainError);
  EXPECT_EQ(parse_measure("Q"), Measure::RiskNeutral);
}

TEST(LagWeights, HeterogeneousExpansion) {
  const ModelParams p = table1::zmlharg();
  const LagWeights w = expand_weights(p);
  for (int l = 1; l <= 22; ++l) {
    EXPECT_DOUBLE_EQ(w.beta(l - 1), har_weight(l, p.beta_d, p.beta_w, p.beta_m));
    EXPECT_DOUBLE_EQ(w.alpha(l - 1), har_weight(l, p.alpha_d, p.alpha_w, p.alpha_m));
  }
  EXPECT_NEAR(w.beta.sum(), p.beta_d + p.beta_w + p.beta_m, 1e-9);
}

TEST(Leverage, ParabolicAndZeroMeanValues) {
  EXPECT_DOUBLE_EQ(leverage(0.5, 4e-4, 100.0, LeverageForm::Parabolic), std::pow(0.5 - 2.0, 2));
  EXPECT_DOUBLE_EQ(leverage(0.5, 4e-4, 100.0, LeverageForm::ZeroMean),
                   0.25 - 1.0 - 2.0 * 0.5 * 100.0 * 0.02);
  EXPECT_THROW(leverage(0.1, -1e-4, 1.0, LeverageForm::Parabolic), DomainError);
}

TEST(MarketStateTest, RejectsInvalidHistories) {
  LagArray rv = LagArray::Constant(1e-4), lev = LagArray::Constant(1.0);
  EXPECT_NO_THROW(MarketState(rv, lev));
  rv(3) = -1e-6;
  EXPECT_THROW(MarketState(rv, lev), DomainError);
  rv(3) = std::nan("");
  EXPECT_THROW(MarketState(rv, lev), DomainError);
  const std::vector<double> short_rv(21, 1e-4), short_lev(21, 1.0);
  EXPECT_THROW(MarketState::from_spans(short_rv, short_lev), DomainError);
}

TEST(Noncentrality, MatchesDirectSum) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.5e-4, 2e-4), e(-2.0, 2.0);
  const ModelParams p = table1::plharg();
  std::vector<double> rv(22), lev(22);
  for (int i = 0; i < 22; ++i) {
    rv[i] = u(rng);
    lev[i] = leverage(e(rng), rv[i], p.gamma, LeverageForm::Parabolic);
  }
  const MarketState s = MarketState::from_spans(rv, lev);
  EXPECT_NEAR(theta_noncentrality(p, s), theta_by_hand(p, rv, lev), 1e-10);
}

TEST(ParabolicReduction, ZeroMeanNoncentralityPreserved) {
  // Theta from native zero-mean leverage equals Theta from the reduced form
  // with parabolic leverage of the same shocks.
  const ModelParams zm = table1::zmlharg();
  const ModelParams red = parabolic_reduction(zm);
  EXPECT_EQ(red.variant, Variant::LHARG);
  EXPECT_NEAR(red.d, -(zm.alpha_d + zm.alpha_w + zm.alpha_m), 1e-15);
  EXPECT_NEAR(red.beta_d, zm.beta_d - zm.alpha_d * zm.gamma * zm.gamma, 1e-9);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.3e-4, 3e-4);
  std::vector<double> rv(22), lbar(22), lpar(22);
  for (int i = 0; i < 22; ++i) {
    rv[i] = u(rng);
    const double eps = n(rng);
    lbar[i] = eps * eps - 1.0 - 2.0 * eps * zm.gamma * std::sqrt(rv[i]);
    lpar[i] = std::pow(eps - zm.gamma * std::sqrt(rv[i]), 2);
  }
  EXPECT_NEAR(theta_by_hand(zm, rv, lbar), theta_by_hand(red, rv, lpar), 1e-9);
  const MarketState native = MarketState::from_spans(rv, lbar);
  const MarketState converted = parabolic_state(zm, native);
  for (int i = 0; i < 22; ++i) EXPECT_NEAR(converted.lev()(i), lpar[i], 1e-12);
}

TEST(StationaryMean, FixedPointIdentity) {
  for (const ModelParams& p : {table1::harg(), table1::plharg(), table1::zmlharg()}) {
    const double m = stationary_mean_rv(p);
    const MarketState s = stationary_state(p);
    EXPECT_NEAR(p.theta * (p.delta + theta_noncentrality(p, s)), m, 1e-16);
  }
  const ModelParams zm = table1::zmlharg();
  EXPECT_NEAR(theta_noncentrality(zm, stationary_state(zm)), 7.646, 5e-3);
  ModelParams explosive = table1::harg();
  explosive.beta_d *= 3.0;
  EXPECT_THROW(stationary_mean_rv(explosive), DomainError);
}

TEST(RiskNeutralMap, IdentityPointAndShift) {
  const ModelParams p = table1::plharg();
  const double nu1 = 0.125 - 0.5 * p.lambda * p.lambda;  // Y* = 0
  const ModelParams q = risk_neutral_map(p, nu1);
  EXPECT_NEAR(q.theta, p.theta, 1e-18);
  EXPECT_NEAR(q.beta_d, p.beta_d, 1e-9);
  EXPECT_NEAR(q.gamma, p.gamma + p.lambda + 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(q.lambda, -0.5);

  const double nu1b = table1::kNu1Plharg;
  const double y_star = -0.5 * p.lambda * p.lambda - nu1b + 0.125;
  const double f = 1.0 - p.theta * y_star;
  const ModelParams qb = risk_neutral_map(p, nu1b);
  EXPECT_NEAR(qb.theta, p.theta / f, 1e-18);
  EXPECT_NEAR(qb.alpha_w, p.alpha_w / f, 1e-14);
  EXPECT_NEAR(qb.delta, p.delta, 1e-15);
}

TEST(RiskNeutralMap, RejectsSingularScale) {
  const ModelParams p = table1::harg();
  EXPECT_THROW(risk_neutral_map(p, -1.0 / p.theta - 10.0), NumericalError);
  EXPECT_THROW(risk_neutral_map(p, RiskPremia::general(p.lambda, -100.0, 0.0)), DomainError);
}

TEST(RiskPremiaTest, NoArbitrageFlag) {
  EXPECT_TRUE(RiskPremia::no_arbitrage(2.005, -3000.0).arbitrage_free);
  EXPECT_FALSE(RiskPremia::general(2.005, -3000.0, 1.0).arbitrage_free);
  EXPECT_DOUBLE_EQ(RiskPremia::no_arbitrage(2.005, -3000.0).nu2, 2.505);
}

TEST(Positivity, ParabolicFormsOnly) {
  EXPECT_TRUE(check_positivity(table1::plharg()));
  EXPECT_TRUE(check_positivity(table1::harg()));
  // The reduced zero-mean model has d = -sum(alpha) < 0.
  EXPECT_FALSE(check_positivity(table1::zmlharg()));
}

TEST(Returns, FilterInvertsBuild) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> eps(50), rv(50);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    eps[i] = n(rng);
    rv[i] = 1e-4 * (1.0 + 0.5 * std::sin(static_cast<double>(i)));
  }
  const auto y = build_returns(eps, rv, 1e-4, 2.005);
  const auto back = filter_innovations(y, rv, 1e-4, 2.005);
  for (std::size_t i = 0; i < eps.size(); ++i) EXPECT_NEAR(back[i], eps[i], 1e-10);
  rv[17] = 0.0;
  try {
    filter_innovations(y, rv, 1e-4, 2.005);
    FAIL() << "expected a degenerate-variance error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
}

TEST(ConditionalCovariance, NegativeWithLeverage) {
  const ModelParams p = table1::zmlharg();
  const MarketState s = stationary_state(p);
  EXPECT_LT(conditional_covariance(p, s), 0.0);
  EXPECT_DOUBLE_EQ(conditional_covariance(table1::harg(), stationary_state(table1::harg())), 0.0);
}

// Monte Carlo oracle: with lambda = 0 the one-step covariance between the
// return and the next conditional RV mean is exactly -2 theta^2 alpha_d gamma (delta + Theta).
TEST(ConditionalCovariance, MatchesSimulationWithoutRiskPremium) {
  ModelParams p = table1::plharg();
  p.lambda = 0.0;
  const MarketState s = stationary_state(p);
  const double big_theta = theta_noncentrality(p, s);
  Rng rng(2024);
  std::normal_distribution<double> normal;
  RunningStat product;  // E[y] = 0 here, so Cov = E[y * next_mean]
  for (int i = 0; i < 400000; ++i) {
    const double rv = sample_noncentral_gamma(p.delta, big_theta, p.theta, rng);
    const double eps = normal(rng);
    const double y = std::sqrt(rv) * eps;
    // E[RV_{t+2} | F_{t+1}] moves with the new observation through the lag-one terms only.
    const double lev = std::pow(eps - p.gamma * std::sqrt(rv), 2);
    product.add(y * p.theta * (p.beta_d * rv + p.alpha_d * lev));
  }
  const double expected = conditional_covariance(p, s);
  EXPECT_NEAR(product.mean, expected, 4.0 * product.std_error());
}

// With lambda != 0 the return also loads on RV itself, which adds
// lambda theta (beta_d + alpha_d gamma^2) Var(RV) to the closed form above.
TEST(ConditionalCovariance, RiskPremiumAddsVarianceTerm) {
  const ModelParams p = table1::plharg();
  const MarketState s = stationary_state(p);
  const double big_theta = theta_noncentrality(p, s);
  const double mean_rv = p.theta * (p.delta + big_theta);
  const double var_rv = p.theta * p.theta * (p.delta + 2.0 * big_theta);
  const double mean_y = p.lambda * mean_rv;
  const double mean_next =
      p.theta * (p.beta_d * mean_rv + p.alpha_d * (1.0 + p.gamma * p.gamma * mean_rv));
  Rng rng(77);
  std::normal_distribution<double> normal;
  RunningStat product;
  for (int i = 0; i < 400000; ++i) {
    const double rv = sample_noncentral_gamma(p.delta, big_theta, p.theta, rng);
    const double eps = normal(rng);
    const double y = p.lambda * rv + std::sqrt(rv) * eps;
    const double lev = std::pow(eps - p.gamma * std::sqrt(rv), 2);
    product.add((y - mean_y) * (p.theta * (p.beta_d * rv + p.alpha_d * lev) - mean_next));
  }
  const double corrected = conditional_covariance(p, s) +
                           p.lambda * p.theta * (p.beta_d + p.alpha_d * p.gamma * p.gamma) * var_rv;
  EXPECT_NEAR(product.mean, corrected, 4.0 * product.std_error());
}
