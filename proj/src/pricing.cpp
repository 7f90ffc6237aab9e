#include "lharg/pricing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <tuple>
#include <variant>

namespace lharg {

int trading_days(int calendar_days) {
  if (calendar_days <= 0) throw DomainError("maturity must be positive");
  const long days = std::lround(calendar_days * kTradingDaysPerYear / kCalendarDaysPerYear);
  return static_cast<int>(std::max(1L, days));
}

std::string_view to_string(OptionType type) { return type == OptionType::Call ? "call" : "put"; }

OptionType parse_option_type(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "c" || s == "call") return OptionType::Call;
  if (s == "p" || s == "put") return OptionType::Put;
  throw DomainError("unknown option type '" + std::string(text) + "'");
}

TruncationRange truncation_range(double c1, double c2, double c4, double width) {
  if (!(width > 0.0)) throw DomainError("truncation width must be positive");
  const double half = width * std::sqrt(c2 + std::sqrt(std::abs(c4)));
  if (!std::isfinite(c1) || !(half > 0.0) || !std::isfinite(half)) {
    throw NumericalError("degenerate cumulants for COS truncation range");
  }
  return {c1 - half, c1 + half};
}

void CosConfig::validate() const {
  if (n_terms < 64) throw DomainError("COS needs at least 64 terms");
  if (!(range_width > 0.0)) throw DomainError("COS range width must be positive");
  if (interval && !(interval->b > interval->a)) throw DomainError("COS interval needs b > a");
}

CosGrid::CosGrid(const CharacteristicFunction& cf, TruncationRange range, int n_terms)
    : range_(range), weights_(static_cast<std::size_t>(n_terms)) {
  if (n_terms < 64) throw DomainError("COS needs at least 64 terms");
  if (!(range.b > range.a)) throw DomainError("COS interval needs b > a");
  if (std::abs(cf(0.0) - 1.0) > 1e-10) {
    throw NumericalError("characteristic function at zero differs from one");
  }
  const double span = range.b - range.a;
  weights_[0] = 0.5;
  for (int k = 1; k < n_terms; ++k) {
    const double u = k * std::numbers::pi / span;
    const std::complex<double> value = cf(u) * std::polar(1.0, -u * range.a);
    if (!std::isfinite(value.real())) throw NumericalError("characteristic function is not finite");
    weights_[static_cast<std::size_t>(k)] = value.real();
  }
}

double CosGrid::price(double spot, double strike, double discount, OptionType type) const {
  if (!(spot > 0.0) || !(strike > 0.0)) throw DomainError("spot and strike must be positive");
  const double a = range_.a, b = range_.b, span = b - a;
  // Work per unit of spot: payoff (e^y - k)^+ or (k - e^y)^+.
  const double k_rel = strike / spot;
  const double kink = std::clamp(std::log(k_rel), a, b);
  const double lo = type == OptionType::Call ? kink : a;
  const double hi = type == OptionType::Call ? b : kink;

  const double e_lo = std::exp(lo), e_hi = std::exp(hi);
  double sum = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const double w = static_cast<double>(k) * std::numbers::pi / span;
    const double c_hi = std::cos(w * (hi - a)), c_lo = std::cos(w * (lo - a));
    const double s_hi = std::sin(w * (hi - a)), s_lo = std::sin(w * (lo - a));
    const double chi = (c_hi * e_hi - c_lo * e_lo + w * (s_hi * e_hi - s_lo * e_lo)) / (1.0 + w * w);
    const double psi = k == 0 ? hi - lo : (s_hi - s_lo) / w;
    const double v = type == OptionType::Call ? chi - k_rel * psi : k_rel * psi - chi;
    sum += weights_[k] * v;
  }
  const double unit = discount * 2.0 / span * sum;
  if (unit < -1e-10) throw NumericalError("COS produced a negative option price");
  return spot * std::max(unit, 0.0);
}

double cos_price(const CharacteristicFunction& cf, double spot, double strike, double r,
                 int tau_days, OptionType type, const CosConfig& cfg) {
  cfg.validate();
  if (!cfg.interval) throw DomainError("cos_price needs a truncation interval");
  if (tau_days < 1) throw DomainError("maturity must be at least one day");
  const CosGrid grid(cf, *cfg.interval, cfg.n_terms);
  return grid.price(spot, strike, std::exp(-r * tau_days), type);
}

CosGrid lharg_cos_grid(const MgfEngine& risk_neutral, int horizon, const CosConfig& cfg) {
  cfg.validate();
  TruncationRange range;
  if (cfg.interval) {
    range = *cfg.interval;
  } else {
    const Cumulants c = cumulants(risk_neutral, horizon);
    range = truncation_range(c.mean, c.variance, c.k4, cfg.range_width);
  }
  return CosGrid([&](double u) { return risk_neutral.characteristic_function(u, horizon); }, range,
                 cfg.n_terms);
}

double model_atm_iv(const ModelParams& params, double nu1, int maturity_days,
                    const MarketState& state, const CosConfig& cfg) {
  if (maturity_days < 1) throw DomainError("maturity must be at least one day");
  const MgfEngine q =
      MgfEngine::risk_neutral(params, state, RiskPremia::no_arbitrage(params.lambda, nu1));
  const CosGrid grid = lharg_cos_grid(q, maturity_days, cfg);
  const double price = grid.price(1.0, 1.0, std::exp(-params.r * maturity_days), OptionType::Call);
  return implied_vol(price, 1.0, 1.0, params.r * kTradingDaysPerYear,
                     maturity_days / kTradingDaysPerYear, OptionType::Call);
}

ChainPricing price_chain(const ModelParams& params, double nu1, const OptionChain& chain,
                         const StateLookup& state_at_date, const CosConfig& cfg) {
  cfg.validate();
  const RiskPremia premia = RiskPremia::no_arbitrage(params.lambda, nu1);
  using Key = std::tuple<long, int, double>;
  std::map<Key, std::variant<CosGrid, std::string>> grids;

  ChainPricing out;
  out.rows.reserve(chain.size());
  for (const OptionQuote& q : chain) {
    PricedQuote row{q, 0.0, 0.0, std::nullopt};
    try {
      const int horizon = q.horizon_days();
      const Key key{q.quote_date.time_since_epoch().count(), horizon, q.rate};
      auto it = grids.find(key);
      if (it == grids.end()) {
        try {
          ModelParams p = params;
          p.r = q.rate / kTradingDaysPerYear;
          const MgfEngine engine = MgfEngine::risk_neutral(p, state_at_date(q.quote_date), premia);
          it = grids.emplace(key, lharg_cos_grid(engine, horizon, cfg)).first;
          ++out.cf_grid_builds;
        } catch (const Error& e) {
          it = grids.emplace(key, std::string(e.what())).first;
        }
      }
      if (const auto* msg = std::get_if<std::string>(&it->second)) throw NumericalError(*msg);
      const CosGrid& grid = std::get<CosGrid>(it->second);
      row.model_price =
          grid.price(q.underlying, q.strike, std::exp(-q.rate * q.year_fraction()), q.type);
      row.model_iv =
          implied_vol(row.model_price, q.underlying, q.strike, q.rate, q.year_fraction(), q.type);
    } catch (const Error& e) {
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

namespace {

double rmse(std::span<const double> lhs, std::span<const double> rhs, bool relative) {
  if (lhs.empty()) throw DomainError("RMSE needs at least one value");
  if (lhs.size() != rhs.size()) throw DomainError("RMSE inputs must have equal length");
  double s = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    double e = lhs[i] - rhs[i];
    if (relative) {
      if (lhs[i] == 0.0) throw DomainError("relative RMSE needs non-zero market prices");
      e /= lhs[i];
    }
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(lhs.size())) * 100.0;
}

}  // namespace

double rmse_iv(std::span<const double> market_ivs, std::span<const double> model_ivs) {
  return rmse(market_ivs, model_ivs, false);
}

double rmse_p(std::span<const double> market_prices, std::span<const double> model_prices) {
  return rmse(market_prices, model_prices, true);
}

std::optional<int> moneyness_bucket(double m) {
  if (m < kMoneynessEdges.front() || m > kMoneynessEdges.back()) return std::nullopt;
  for (int i = 1; i < static_cast<int>(kMoneynessEdges.size()); ++i) {
    if (m <= kMoneynessEdges[static_cast<std::size_t>(i)]) return i - 1;
  }
  return std::nullopt;
}

int maturity_bucket(int maturity_days) {
  int i = 0;
  while (i < static_cast<int>(kMaturityEdges.size()) &&
         maturity_days > kMaturityEdges[static_cast<std::size_t>(i)]) {
    ++i;
  }
  return i;
}

RmsePanel evaluate_panel(std::span<const PricedQuote> rows) {
  RmsePanel panel;
  std::array<std::array<double, 4>, 5> sq{};
  double sq_inner = 0.0, sq_all = 0.0, sq_p = 0.0;
  std::size_t n_inner = 0;
  for (const PricedQuote& row : rows) {
    if (row.error || !row.quote.market_iv) continue;
    const auto mb = moneyness_bucket(row.quote.moneyness());
    if (!mb) continue;
    const auto tb = static_cast<std::size_t>(maturity_bucket(row.quote.maturity_days));
    const double e = *row.quote.market_iv - row.model_iv;
    sq[static_cast<std::size_t>(*mb)][tb] += e * e;
    ++panel.count[static_cast<std::size_t>(*mb)][tb];
    sq_all += e * e;
    const double m = row.quote.moneyness();
    if (m > 0.9 && m < 1.1) {
      sq_inner += e * e;
      ++n_inner;
    }
    const double rel = (row.quote.mid_price - row.model_price) / row.quote.mid_price;
    sq_p += rel * rel;
    ++panel.n_used;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const auto n = panel.count[i][j];
      panel.rmse_iv[i][j] = n ? std::sqrt(sq[i][j] / static_cast<double>(n)) * 100.0 : nan;
    }
  }
  const auto n = static_cast<double>(panel.n_used);
  panel.rmse_iv_all = panel.n_used ? std::sqrt(sq_all / n) * 100.0 : nan;
  panel.rmse_p_all = panel.n_used ? std::sqrt(sq_p / n) * 100.0 : nan;
  panel.rmse_iv_inner = n_inner ? std::sqrt(sq_inner / static_cast<double>(n_inner)) * 100.0 : nan;
  return panel;
}

}  // namespace lharg
