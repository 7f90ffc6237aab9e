#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lharg/errors.hpp"

namespace lharg {

inline constexpr int kLags = 22;
inline constexpr int kWeeklyLags = 4;
inline constexpr int kMonthlyLags = 17;

using LagArray = Eigen::Array<double, kLags, 1>;

/// Model family. `LHARG` is the general parabolic form with a free constant d;
/// it is what the zero-mean reduction and the risk-neutral map produce.
enum class Variant { HARG, PLHARG, ZMLHARG, LHARG };

enum class LeverageForm { Parabolic, ZeroMean };

enum class Measure { Physical, RiskNeutral };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
std::string_view to_string(Measure m);
Measure parse_measure(std::string_view name);

constexpr LeverageForm leverage_form(Variant v) {
  return v == Variant::ZMLHARG ? LeverageForm::ZeroMean : LeverageForm::Parabolic;
}

/// The LHARG parameter set in daily decimal units.
///
/// Zero-mean models are stored in their native (beta, alpha, gamma) form;
/// `parabolic_reduction` gives the equivalent parabolic parameterization.
struct ModelParams {
  Variant variant = Variant::PLHARG;
  double theta = 0.0;  ///< gamma scale
  double delta = 0.0;  ///< gamma shape
  double d = 0.0;      ///< noncentrality constant
  double beta_d = 0.0;
  double beta_w = 0.0;
  double beta_m = 0.0;
  double alpha_d = 0.0;
  double alpha_w = 0.0;
  double alpha_m = 0.0;
  double gamma = 0.0;   ///< leverage asymmetry
  double lambda = 0.0;  ///< market price of risk
  double r = 0.0;       ///< daily risk-free rate

  /// Throws DomainError when a variant invariant is violated.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Maximum likelihood estimates reported for S&P 500 realized variance.
namespace table1 {
inline constexpr double kLambda = 2.005;
inline constexpr double kNu1Harg = -2794.0;
inline constexpr double kNu1Plharg = -3069.0;
inline constexpr double kNu1Zmlharg = -3375.0;

ModelParams harg(double r = 0.0);
ModelParams plharg(double r = 0.0);
ModelParams zmlharg(double r = 0.0);
}  // namespace table1

/// Per-lag weights of the 22-day heterogeneous expansion.
struct LagWeights {
  LagArray beta = LagArray::Zero();
  LagArray alpha = LagArray::Zero();
};

/// The last 22 daily realized variances and leverage values, index 0 = today.
/// Leverage values are parabolic or zero-mean according to the model variant.
class MarketState {
 public:
  MarketState() : rv_(LagArray::Zero()), lev_(LagArray::Zero()) {}
  MarketState(const LagArray& rv, const LagArray& lev);

  /// Rejects anything other than exactly 22 lags.
  static MarketState from_spans(std::span<const double> rv, std::span<const double> lev);
  static MarketState constant(double rv, double lev);

  const LagArray& rv() const noexcept { return rv_; }
  const LagArray& lev() const noexcept { return lev_; }

 private:
  LagArray rv_;
  LagArray lev_;
};

/// Variance (nu1) and equity (nu2) risk premia of the exponential-affine SDF.
struct RiskPremia {
  double nu1 = 0.0;
  double nu2 = 0.5;
  double lambda = 0.0;
  double y_star = 0.0;  ///< -nu2*lambda - nu1 + nu2^2/2, shared by the map and the Q recursion
  bool arbitrage_free = true;

  /// nu2 pinned to lambda + 1/2.
  static RiskPremia no_arbitrage(double lambda, double nu1);
  static RiskPremia general(double lambda, double nu1, double nu2);
};

/// Parabolic-form parameters with the lag weights expanded; the common input
/// of the MGF recursion and the simulator.
struct AffineModel {
  double theta = 0.0;
  double delta = 0.0;
  double d = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double r = 0.0;
  LagArray beta = LagArray::Zero();
  LagArray alpha = LagArray::Zero();
};

LagWeights expand_weights(const ModelParams& params);

/// Parabolic (eps - gamma*sqrt(rv))^2 or zero-mean eps^2 - 1 - 2*eps*gamma*sqrt(rv).
double leverage(double eps, double rv, double gamma, LeverageForm form);

/// d + sum beta_i rv[i-1] + sum alpha_j lev[j-1]; may be negative for zero-mean models.
double theta_noncentrality(const ModelParams& params, const LagWeights& weights,
                           const MarketState& state);
double theta_noncentrality(const ModelParams& params, const MarketState& state);

constexpr double no_arbitrage_nu2(double lambda) { return lambda + 0.5; }

/// Zero-mean models become general LHARG with d = -sum(alpha), beta_l -= alpha_l*gamma^2.
/// Other variants are returned unchanged.
ModelParams parabolic_reduction(const ModelParams& params);

/// Rewrites zero-mean leverage values as parabolic ones: lev + 1 + gamma^2 rv.
MarketState parabolic_state(const ModelParams& params, const MarketState& state);

AffineModel to_affine(const ModelParams& params);

/// Risk-neutral parameters: scale parameters divided by 1 - theta*Y*, gamma + lambda + 1/2,
/// lambda* = -1/2. Zero-mean inputs are reduced first. Throws NumericalError if theta*Y* >= 1.
ModelParams risk_neutral_map(const ModelParams& params, double nu1);
ModelParams risk_neutral_map(const ModelParams& params, const RiskPremia& premia);

/// theta*(sum beta + gamma^2 sum alpha) of the parabolic form.
double stationarity_margin(const ModelParams& params);

/// d >= 0 and all lag weights >= 0 in the form fed to the noncentral gamma.
bool check_positivity(const ModelParams& params);

/// eps_t = (y_t - r - lambda*rv_t)/sqrt(rv_t). Throws DomainError at the first rv_t <= 0.
std::vector<double> filter_innovations(std::span<const double> returns, std::span<const double> rv,
                                       double r, double lambda);

/// y_t = r + lambda*rv_t + sqrt(rv_t)*eps_t.
std::vector<double> build_returns(std::span<const double> eps, std::span<const double> rv, double r,
                                  double lambda);

/// -2 theta^2 alpha_d gamma (delta + Theta).
double conditional_covariance(const ModelParams& params, const MarketState& state);

/// Unconditional mean of RV; throws DomainError when the process is not stationary.
double stationary_mean_rv(const ModelParams& params);

/// Every rv lag at the unconditional mean and every leverage lag at its mean
/// (1 + gamma^2 E[RV] parabolic, 0 zero-mean).
MarketState stationary_state(const ModelParams& params);

/// Leverage series for a variant from aligned innovations and variances.
std::vector<double> leverage_series(const ModelParams& params, std::span<const double> eps,
                                    std::span<const double> rv);

/// State whose lag 0 is element `last` of the aligned series. Needs last >= 21.
MarketState state_at(std::span<const double> rv, std::span<const double> lev, std::size_t last);

}  // namespace lharg
