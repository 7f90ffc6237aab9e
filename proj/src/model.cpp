#include "lharg/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace lharg {

namespace {

LagArray heterogeneous(double daily, double weekly, double monthly) {
  LagArray out;
  out(0) = daily;
  out.segment<kWeeklyLags>(1).setConstant(weekly / kWeeklyLags);
  out.segment<kMonthlyLags>(1 + kWeeklyLags).setConstant(monthly / kMonthlyLags);
  return out;
}

void require(bool ok, const char* message) {
  if (!ok) throw DomainError(message);
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::HARG: return "HARG";
    case Variant::PLHARG: return "P-LHARG";
    case Variant::ZMLHARG: return "ZM-LHARG";
    case Variant::LHARG: return "LHARG";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (key == "HARG") return Variant::HARG;
  if (key == "PLHARG") return Variant::PLHARG;
  if (key == "ZMLHARG") return Variant::ZMLHARG;
  if (key == "LHARG") return Variant::LHARG;
  throw DomainError("unknown model variant '" + std::string(name) + "'");
}

std::string_view to_string(Measure m) { return m == Measure::Physical ? "P" : "Q"; }

Measure parse_measure(std::string_view name) {
  if (name == "P" || name == "p" || name == "physical") return Measure::Physical;
  if (name == "Q" || name == "q" || name == "risk-neutral") return Measure::RiskNeutral;
  throw DomainError("unknown measure '" + std::string(name) + "'");
}

void ModelParams::validate() const {
  const double all[] = {theta, delta, d, beta_d, beta_w, beta_m, alpha_d, alpha_w, alpha_m, gamma, lambda, r};
  require(std::all_of(std::begin(all), std::end(all), [](double x) { return std::isfinite(x); }),
          "model parameters must be finite");
  require(theta > 0.0, "theta must be positive");
  require(delta > 0.0, "delta must be positive");
  const bool no_leverage = alpha_d == 0.0 && alpha_w == 0.0 && alpha_m == 0.0;
  switch (variant) {
    case Variant::HARG:
      require(no_leverage && d == 0.0, "HARG requires zero leverage loadings and d = 0");
      break;
    case Variant::PLHARG:
      require(d == 0.0, "P-LHARG requires d = 0");
      require(std::min({beta_d, beta_w, beta_m, alpha_d, alpha_w, alpha_m}) >= 0.0,
              "P-LHARG requires non-negative loadings");
      break;
    case Variant::ZMLHARG:
      require(d == 0.0, "ZM-LHARG has no free constant; d must be 0 in native form");
      break;
    case Variant::LHARG:
      break;
  }
}

namespace table1 {

ModelParams harg(double r) {
  ModelParams p;
  p.variant = Variant::HARG;
  p.theta = 1.149e-5;
  p.delta = 1.358;
  p.beta_d = 3.959e4;
  p.beta_w = 2.451e4;
  p.beta_m = 1.012e4;
  p.lambda = kLambda;
  p.r = r;
  return p;
}

ModelParams plharg(double r) {
  ModelParams p;
  p.variant = Variant::PLHARG;
  p.theta = 1.068e-5;
  p.delta = 1.243;
  p.beta_d = 2.429e4;
  p.beta_w = 2.317e4;
  p.beta_m = 1.322e4;
  p.alpha_d = 0.2376;
  p.alpha_w = 0.1194;
  p.alpha_m = 3.85e-6;
  p.gamma = 223.7;
  p.lambda = kLambda;
  p.r = r;
  return p;
}

ModelParams zmlharg(double r) {
  ModelParams p;
  p.variant = Variant::ZMLHARG;
  p.theta = 1.117e-5;
  p.delta = 1.78;
  p.beta_d = 3.382e4;
  p.beta_w = 2.542e4;
  p.beta_m = 1.338e4;
  p.alpha_d = 0.3991;
  p.alpha_w = 0.3446;
  p.alpha_m = 0.4034;
  p.gamma = 134.8;
  p.lambda = kLambda;
  p.r = r;
  return p;
}

}  // namespace table1

MarketState::MarketState(const LagArray& rv, const LagArray& lev) : rv_(rv), lev_(lev) {
  if (!rv_.allFinite() || !lev_.allFinite()) throw DomainError("market state must be finite");
  if ((rv_ < 0.0).any()) throw DomainError("market state realized variances must be non-negative");
}

MarketState MarketState::from_spans(std::span<const double> rv, std::span<const double> lev) {
  if (rv.size() != kLags || lev.size() != kLags) {
    throw DomainError("market state needs exactly 22 lags of rv and leverage, got " +
                      std::to_string(rv.size()) + " and " + std::to_string(lev.size()));
  }
  return MarketState(Eigen::Map<const LagArray>(rv.data()), Eigen::Map<const LagArray>(lev.data()));
}

MarketState MarketState::constant(double rv, double lev) {
  return MarketState(LagArray::Constant(rv), LagArray::Constant(lev));
}

RiskPremia RiskPremia::no_arbitrage(double lambda, double nu1) {
  RiskPremia p = general(lambda, nu1, no_arbitrage_nu2(lambda));
  p.arbitrage_free = true;
  return p;
}

RiskPremia RiskPremia::general(double lambda, double nu1, double nu2) {
  RiskPremia p;
  p.nu1 = nu1;
  p.nu2 = nu2;
  p.lambda = lambda;
  p.y_star = -nu2 * lambda - nu1 + 0.5 * nu2 * nu2;
  p.arbitrage_free = nu2 == no_arbitrage_nu2(lambda);
  return p;
}

LagWeights expand_weights(const ModelParams& params) {
  return {heterogeneous(params.beta_d, params.beta_w, params.beta_m),
          heterogeneous(params.alpha_d, params.alpha_w, params.alpha_m)};
}

double leverage(double eps, double rv, double gamma, LeverageForm form) {
  if (!(rv >= 0.0)) throw DomainError("leverage needs a non-negative realized variance");
  const double vol = std::sqrt(rv);
  if (form == LeverageForm::Parabolic) {
    const double shock = eps - gamma * vol;
    return shock * shock;
  }
  return eps * eps - 1.0 - 2.0 * eps * gamma * vol;
}

double theta_noncentrality(const ModelParams& params, const LagWeights& weights,
                           const MarketState& state) {
  return params.d + (weights.beta * state.rv()).sum() + (weights.alpha * state.lev()).sum();
}

double theta_noncentrality(const ModelParams& params, const MarketState& state) {
  return theta_noncentrality(params, expand_weights(params), state);
}

ModelParams parabolic_reduction(const ModelParams& params) {
  if (params.variant != Variant::ZMLHARG) return params;
  ModelParams out = params;
  const double g2 = params.gamma * params.gamma;
  out.variant = Variant::LHARG;
  out.d = params.d - (params.alpha_d + params.alpha_w + params.alpha_m);
  out.beta_d = params.beta_d - params.alpha_d * g2;
  out.beta_w = params.beta_w - params.alpha_w * g2;
  out.beta_m = params.beta_m - params.alpha_m * g2;
  return out;
}

MarketState parabolic_state(const ModelParams& params, const MarketState& state) {
  if (params.variant != Variant::ZMLHARG) return state;
  const LagArray lev = state.lev() + 1.0 + params.gamma * params.gamma * state.rv();
  return MarketState(state.rv(), lev);
}

AffineModel to_affine(const ModelParams& params) {
  const ModelParams p = parabolic_reduction(params);
  const LagWeights w = expand_weights(p);
  AffineModel m;
  m.theta = p.theta;
  m.delta = p.delta;
  m.d = p.d;
  m.gamma = p.gamma;
  m.lambda = p.lambda;
  m.r = p.r;
  m.beta = w.beta;
  m.alpha = w.alpha;
  return m;
}

ModelParams risk_neutral_map(const ModelParams& params, const RiskPremia& premia) {
  if (!premia.arbitrage_free) throw DomainError("risk-neutral map needs arbitrage-free premia");
  if (std::abs(premia.lambda - params.lambda) > 1e-12 * std::max(1.0, std::abs(params.lambda))) {
    throw DomainError("risk premia were built for a different lambda");
  }
  const ModelParams p = parabolic_reduction(params);
  const double denom = 1.0 - p.theta * premia.y_star;
  if (!(denom > 0.0)) {
    throw NumericalError("risk-neutral map singular: theta*Y* = " +
                         std::to_string(p.theta * premia.y_star) + " >= 1");
  }
  const double scale = 1.0 / denom;
  ModelParams q = p;
  q.theta = p.theta * scale;
  q.d = p.d * scale;
  q.beta_d = p.beta_d * scale;
  q.beta_w = p.beta_w * scale;
  q.beta_m = p.beta_m * scale;
  q.alpha_d = p.alpha_d * scale;
  q.alpha_w = p.alpha_w * scale;
  q.alpha_m = p.alpha_m * scale;
  q.gamma = p.gamma + p.lambda + 0.5;
  q.lambda = -0.5;
  return q;
}

ModelParams risk_neutral_map(const ModelParams& params, double nu1) {
  return risk_neutral_map(params, RiskPremia::no_arbitrage(params.lambda, nu1));
}

double stationarity_margin(const ModelParams& params) {
  const ModelParams p = parabolic_reduction(params);
  const double beta = p.beta_d + p.beta_w + p.beta_m;
  const double alpha = p.alpha_d + p.alpha_w + p.alpha_m;
  return p.theta * (beta + p.gamma * p.gamma * alpha);
}

bool check_positivity(const ModelParams& params) {
  const AffineModel m = to_affine(params);
  return m.d >= 0.0 && (m.beta >= 0.0).all() && (m.alpha >= 0.0).all();
}

std::vector<double> filter_innovations(std::span<const double> returns, std::span<const double> rv,
                                       double r, double lambda) {
  if (returns.size() != rv.size()) throw DomainError("returns and rv series must be aligned");
  std::vector<double> eps(returns.size());
  for (std::size_t t = 0; t < returns.size(); ++t) {
    if (!(rv[t] > 0.0)) {
      throw DomainError("degenerate realized variance at index " + std::to_string(t));
    }
    eps[t] = (returns[t] - r - lambda * rv[t]) / std::sqrt(rv[t]);
  }
  return eps;
}

std::vector<double> build_returns(std::span<const double> eps, std::span<const double> rv, double r,
                                  double lambda) {
  if (eps.size() != rv.size()) throw DomainError("innovations and rv series must be aligned");
  std::vector<double> y(eps.size());
  for (std::size_t t = 0; t < eps.size(); ++t) y[t] = r + lambda * rv[t] + std::sqrt(rv[t]) * eps[t];
  return y;
}

double conditional_covariance(const ModelParams& params, const MarketState& state) {
  const double big_theta = theta_noncentrality(params, state);
  return -2.0 * params.theta * params.theta * params.alpha_d * params.gamma *
         (params.delta + big_theta);
}

double stationary_mean_rv(const ModelParams& params) {
  const double persistence = stationarity_margin(params);
  if (!(persistence < 1.0)) throw DomainError("process is not stationary (persistence >= 1)");
  const ModelParams p = parabolic_reduction(params);
  const double alpha = p.alpha_d + p.alpha_w + p.alpha_m;
  return p.theta * (p.delta + p.d + alpha) / (1.0 - persistence);
}

MarketState stationary_state(const ModelParams& params) {
  const double m = stationary_mean_rv(params);
  const double lev = leverage_form(params.variant) == LeverageForm::ZeroMean
                         ? 0.0
                         : 1.0 + params.gamma * params.gamma * m;
  return MarketState::constant(m, lev);
}

std::vector<double> leverage_series(const ModelParams& params, std::span<const double> eps,
                                    std::span<const double> rv) {
  if (eps.size() != rv.size()) throw DomainError("innovations and rv series must be aligned");
  const LeverageForm form = leverage_form(params.variant);
  std::vector<double> lev(eps.size());
  for (std::size_t t = 0; t < eps.size(); ++t) lev[t] = leverage(eps[t], rv[t], params.gamma, form);
  return lev;
}

MarketState state_at(std::span<const double> rv, std::span<const double> lev, std::size_t last) {
  if (last + 1 < static_cast<std::size_t>(kLags) || last >= rv.size() || rv.size() != lev.size()) {
    throw DomainError("state needs 22 observed lags ending at index " + std::to_string(last));
  }
  LagArray r, l;
  for (int i = 0; i < kLags; ++i) {
    r(i) = rv[last - i];
    l(i) = lev[last - i];
  }
  return MarketState(r, l);
}

}  // namespace lharg
