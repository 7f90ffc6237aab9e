#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>

#include "lharg/pricing.hpp"

namespace lharg {

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

}  // namespace

double bs_price(double spot, double strike, double r, double sigma, double tau, OptionType type) {
  if (!(spot > 0.0) || !(strike > 0.0) || !(sigma > 0.0) || !(tau > 0.0)) {
    throw DomainError("Black-Scholes needs positive spot, strike, volatility and maturity");
  }
  const double sd = sigma * std::sqrt(tau);
  const double d1 = (std::log(spot / strike) + (r + 0.5 * sigma * sigma) * tau) / sd;
  const double d2 = d1 - sd;
  const double df = std::exp(-r * tau);
  if (type == OptionType::Call) return spot * norm_cdf(d1) - strike * df * norm_cdf(d2);
  return strike * df * norm_cdf(-d2) - spot * norm_cdf(-d1);
}

double bs_vega(double spot, double strike, double r, double sigma, double tau) {
  const double sd = sigma * std::sqrt(tau);
  const double d1 = (std::log(spot / strike) + (r + 0.5 * sigma * sigma) * tau) / sd;
  return spot * norm_pdf(d1) * std::sqrt(tau);
}

double implied_vol(double price, double spot, double strike, double r, double tau, OptionType type) {
  if (!(spot > 0.0) || !(strike > 0.0) || !(tau > 0.0) || !std::isfinite(price)) {
    throw DomainError("implied volatility needs positive spot, strike and maturity");
  }
  const double df = std::exp(-r * tau);
  const double lower = type == OptionType::Call ? std::max(spot - strike * df, 0.0)
                                                : std::max(strike * df - spot, 0.0);
  const double upper = type == OptionType::Call ? spot : strike * df;
  if (!(price > lower) || !(price < upper)) {
    throw DomainError("option price outside no-arbitrage bounds; no implied volatility");
  }

  auto f = [&](double sigma) { return bs_price(spot, strike, r, sigma, tau, type) - price; };
  double lo = 1e-4, hi = 1.0;
  while (f(lo) > 0.0 && lo > 1e-12) lo *= 0.1;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e3) throw DomainError("implied volatility above 1000%");
  }

  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(40), max_iter);
  double sigma = 0.5 * (bracket.first + bracket.second);
  if (!(bracket.first < bracket.second)) return sigma;

  // Newton polish inside the bracket.
  auto fdf = [&](double s) {
    return std::make_pair(f(s), bs_vega(spot, strike, r, s, tau));
  };
  max_iter = 50;
  sigma = boost::math::tools::newton_raphson_iterate(fdf, sigma, bracket.first, bracket.second,
                                                     std::numeric_limits<double>::digits - 4,
                                                     max_iter);
  return sigma;
}

}  // namespace lharg
