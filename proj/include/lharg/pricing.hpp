#pragma once

#include <array>
#include <chrono>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lharg/mgf.hpp"
#include "lharg/model.hpp"

namespace lharg {

inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr double kCalendarDaysPerYear = 365.0;

using Date = std::chrono::sys_days;

/// Calendar days to model (trading) days, at least one.
int trading_days(int calendar_days);

enum class OptionType { Call, Put };

std::string_view to_string(OptionType type);
OptionType parse_option_type(std::string_view text);

struct OptionQuote {
  Date quote_date{};
  Date expiry_date{};
  int maturity_days = 0;  ///< calendar days from quote to expiry
  double strike = 0.0;
  OptionType type = OptionType::Call;
  double mid_price = 0.0;
  double underlying = 0.0;
  double rate = 0.0;  ///< annual, continuously compounded
  std::optional<double> market_iv;

  double moneyness() const { return strike / underlying; }
  /// Horizon of the pricing recursion.
  int horizon_days() const { return trading_days(maturity_days); }
  /// Year fraction used for every implied-volatility inversion.
  double year_fraction() const { return horizon_days() / kTradingDaysPerYear; }
  bool out_of_the_money() const {
    return type == OptionType::Call ? moneyness() >= 1.0 : moneyness() < 1.0;
  }
};

using OptionChain = std::vector<OptionQuote>;

// Black-Scholes with annual rate r and time to expiry tau in years.
double bs_price(double spot, double strike, double r, double sigma, double tau, OptionType type);
double bs_vega(double spot, double strike, double r, double sigma, double tau);

/// Implied volatility by bracketed root finding plus Newton refinement.
/// Throws DomainError when the price violates the no-arbitrage bounds.
double implied_vol(double price, double spot, double strike, double r, double tau, OptionType type);

struct TruncationRange {
  double a = 0.0;
  double b = 0.0;
};

/// c1 -/+ L sqrt(c2 + sqrt|c4|).
TruncationRange truncation_range(double c1, double c2, double c4, double width);

struct CosConfig {
  int n_terms = 512;
  double range_width = 10.0;
  std::optional<TruncationRange> interval;  ///< on the log-return y = ln(S_T/S_t)

  void validate() const;
};

using CharacteristicFunction = std::function<std::complex<double>(double)>;

/// Characteristic-function samples phi(u_k) e^{-i u_k a}, u_k = k pi/(b - a),
/// shared by every strike of one maturity.
class CosGrid {
 public:
  CosGrid(const CharacteristicFunction& cf, TruncationRange range, int n_terms);

  /// Discounted expected payoff; `discount` = exp(-r tau).
  double price(double spot, double strike, double discount, OptionType type) const;

  TruncationRange range() const noexcept { return range_; }
  int n_terms() const noexcept { return static_cast<int>(weights_.size()); }

 private:
  TruncationRange range_;
  std::vector<double> weights_;  // Re(phi(u_k) e^{-i u_k a}), first halved
};

/// COS price of a European option; r is the daily rate and tau_days the horizon
/// the characteristic function refers to.
double cos_price(const CharacteristicFunction& cf, double spot, double strike, double r,
                 int tau_days, OptionType type, const CosConfig& cfg);

/// COS grid of the risk-neutral log-return at `horizon`, with the truncation
/// range taken from the finite-difference cumulants of the same engine.
CosGrid lharg_cos_grid(const MgfEngine& risk_neutral, int horizon, const CosConfig& cfg);

/// Model ATM implied volatility at `maturity_days` trading days under
/// risk_neutral_map(params, nu1); r is params.r annualized.
double model_atm_iv(const ModelParams& params, double nu1, int maturity_days,
                    const MarketState& state, const CosConfig& cfg = {});

struct PricedQuote {
  OptionQuote quote;
  double model_price = 0.0;
  double model_iv = 0.0;
  std::optional<std::string> error;
};

struct ChainPricing {
  std::vector<PricedQuote> rows;
  std::size_t cf_grid_builds = 0;
};

using StateLookup = std::function<MarketState(Date)>;

/// Prices every quote; one COS grid per (quote date, horizon, rate).
/// Per-quote failures are recorded in the row, not thrown.
ChainPricing price_chain(const ModelParams& params, double nu1, const OptionChain& chain,
                         const StateLookup& state_at_date, const CosConfig& cfg = {});

/// sqrt(mean (iv_mkt - iv_mod)^2) * 100.
double rmse_iv(std::span<const double> market_ivs, std::span<const double> model_ivs);
/// Same on relative prices (p_mkt - p_mod)/p_mkt.
double rmse_p(std::span<const double> market_prices, std::span<const double> model_prices);

inline constexpr std::array<double, 6> kMoneynessEdges = {0.8, 0.9, 0.98, 1.02, 1.1, 1.2};
inline constexpr std::array<int, 3> kMaturityEdges = {50, 90, 160};

/// Moneyness bucket index 0..4 (first closed on both ends, others (lo, hi]).
std::optional<int> moneyness_bucket(double m);
/// Calendar-day bucket: <=50, (50,90], (90,160], >160.
int maturity_bucket(int maturity_days);

struct RmsePanel {
  std::array<std::array<double, 4>, 5> rmse_iv{};
  std::array<std::array<std::size_t, 4>, 5> count{};
  double rmse_iv_inner = 0.0;  ///< 0.9 < m < 1.1
  double rmse_iv_all = 0.0;    ///< 0.8 < m < 1.2
  double rmse_p_all = 0.0;
  std::size_t n_used = 0;
};

/// RMSE_IV by moneyness x maturity over quotes with a market and model IV.
RmsePanel evaluate_panel(std::span<const PricedQuote> rows);

}  // namespace lharg
