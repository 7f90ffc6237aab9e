#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lharg/estimation.hpp"
#include "lharg/model.hpp"
#include "lharg/pricing.hpp"

namespace lharg {

/// ISO yyyy-mm-dd.
Date parse_date(std::string_view text);
std::string format_date(Date date);

struct DatedSeries {
  std::vector<Date> dates;
  std::vector<double> values;

  std::size_t size() const noexcept { return dates.size(); }
};

/// `date,rv` with a header row; sorted by date, duplicates and negative values rejected.
DatedSeries load_rv_series(const std::filesystem::path& path);
/// `date,log_return`.
DatedSeries load_returns(const std::filesystem::path& path);
/// `quote_date,expiry_date,strike,type,mid_price,underlying,rate[,market_iv]`.
/// A missing market_iv is inverted from mid_price when the price allows it.
OptionChain load_option_chain(const std::filesystem::path& path);

DatedSeries read_series(std::istream& in, std::string_view value_column, bool non_negative);
OptionChain read_option_chain(std::istream& in);

void write_series(const std::filesystem::path& path, const DatedSeries& series,
                  std::string_view value_column);
void write_series(std::ostream& out, const DatedSeries& series, std::string_view value_column);
void write_option_chain(std::ostream& out, const OptionChain& chain);
void write_priced_chain(std::ostream& out, const std::vector<PricedQuote>& rows);

/// Multiplies RV by mean(returns^2)/mean(RV) so both have the same unconditional level.
DatedSeries rescale_rv(const DatedSeries& rv, const DatedSeries& returns);

struct AlignedData {
  std::vector<Date> dates;
  std::vector<double> rv;
  std::vector<double> returns;
};

/// Inner join on date.
AlignedData align_series(const DatedSeries& rv, const DatedSeries& returns);

/// Lag state available on each quote date: the last observation on or before it.
class StateHistory {
 public:
  StateHistory(const ModelParams& params, const AlignedData& data);
  MarketState at(Date date) const;

 private:
  std::vector<Date> dates_;
  std::vector<double> rv_;
  std::vector<double> lev_;
};

enum class FilterRule { Maturity, ImpliedVol, Price, OutOfTheMoney, Moneyness };
inline constexpr std::size_t kFilterRules = 5;
std::string_view to_string(FilterRule rule);

struct FilterThresholds {
  int min_days = 10;
  int max_days = 365;
  double max_iv = 0.7;
  double min_price = 0.05;
  bool otm_only = true;
  double min_moneyness = 0.8;
  double max_moneyness = 1.2;

  void validate() const;
};

struct FilterReport {
  OptionChain retained;
  std::array<std::size_t, kFilterRules> rejected{};  ///< by first failing rule
  std::size_t input = 0;
};

/// First rule a quote fails, if any.
std::optional<FilterRule> failing_rule(const OptionQuote& q, const FilterThresholds& t);
FilterReport filter_options(const OptionChain& chain, const FilterThresholds& thresholds = {});

/// Flat key=value settings; `#` starts a comment.
struct Config {
  Variant variant = Variant::ZMLHARG;
  std::string rv_path;
  std::string returns_path;
  std::string chain_path;
  std::string params_path;
  std::string output_dir = ".";
  int cos_terms = 512;
  double cos_width = 10.0;
  std::uint64_t seed = 42;
  std::size_t paths = 500000;
  int horizon = 252;
  double target_iv = 0.0;
  std::optional<double> nu1;
  std::optional<double> rate;  ///< daily
  FilterThresholds filter;

  /// Throws DomainError on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  CosConfig cos() const;
};

Config load_config(const std::filesystem::path& path);
Config read_config(std::istream& in);

/// Parameters as key=value lines (variant, theta, ..., r), optionally with nu1.
void write_params(std::ostream& out, const ModelParams& params, std::optional<double> nu1 = {});
struct ParamFile {
  ModelParams params;
  std::optional<double> nu1;
};
ParamFile read_params(std::istream& in);
ParamFile load_params(const std::filesystem::path& path);

/// Fit as key=value text: estimates, `se_` standard errors, loglik, persistence.
void write_fit(std::ostream& out, const FitResult& fit);
/// One CSV row in Table-1 column order with its header.
void write_fit_csv(std::ostream& out, const FitResult& fit);

}  // namespace lharg
