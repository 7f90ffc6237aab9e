#include "lharg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

namespace lharg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view text, std::size_t line, std::string_view column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError("invalid number '" + std::string(text) + "' in column " + std::string(column),
                     line);
  }
  return value;
}

Date parse_date_at(std::string_view text, std::size_t line) {
  try {
    return parse_date(text);
  } catch (const DomainError& e) {
    throw ParseError(e.what(), line);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path.string());
  return out;
}

// Header check shared by every CSV reader; returns the number of columns.
std::size_t expect_header(std::istream& in, const std::vector<std::string_view>& required,
                          std::size_t optional_extra) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  const auto cols = split(line);
  if (cols.size() < required.size() || cols.size() > required.size() + optional_extra) {
    throw ParseError("unexpected number of header columns", 1);
  }
  for (std::size_t i = 0; i < required.size(); ++i) {
    if (cols[i] != required[i]) {
      throw ParseError("expected column '" + std::string(required[i]) + "' but found '" +
                           std::string(cols[i]) + "'",
                       1);
    }
  }
  return cols.size();
}

void set_precision(std::ostream& out) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
}

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  int y = 0;
  unsigned m = 0, d = 0;
  auto field = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc() && ptr == text.data() + pos + len;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !field(0, 4, y) || !field(5, 2, m) ||
      !field(8, 2, d)) {
    throw DomainError("invalid date '" + std::string(text) + "' (expected yyyy-mm-dd)");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw DomainError("invalid calendar date '" + std::string(text) + "'");
  return std::chrono::sys_days{ymd};
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  std::ostringstream s;
  s << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << '-' << std::setw(2)
    << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2) << static_cast<unsigned>(ymd.day());
  return s.str();
}

DatedSeries read_series(std::istream& in, std::string_view value_column, bool non_negative) {
  expect_header(in, {"date", value_column}, 0);
  std::vector<std::tuple<Date, double, std::size_t>> rows;
  std::string line;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    const auto cols = split(line);
    if (cols.size() != 2) throw ParseError("expected 2 columns", n);
    const Date date = parse_date_at(cols[0], n);
    const double value = parse_number(cols[1], n, value_column);
    if (non_negative && value < 0.0) {
      throw ParseError("negative " + std::string(value_column) + " value", n);
    }
    rows.emplace_back(date, value, n);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
  DatedSeries out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && std::get<0>(rows[i]) == std::get<0>(rows[i - 1])) {
      const std::size_t later = std::max(std::get<2>(rows[i]), std::get<2>(rows[i - 1]));
      throw ParseError("duplicate date " + format_date(std::get<0>(rows[i])), later);
    }
    out.dates.push_back(std::get<0>(rows[i]));
    out.values.push_back(std::get<1>(rows[i]));
  }
  return out;
}

DatedSeries load_rv_series(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_series(in, "rv", true);
}

DatedSeries load_returns(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_series(in, "log_return", false);
}

OptionChain read_option_chain(std::istream& in) {
  const std::vector<std::string_view> columns = {"quote_date", "expiry_date", "strike", "type",
                                                 "mid_price",  "underlying",  "rate"};
  const std::size_t width = expect_header(in, columns, 1);
  std::vector<std::pair<OptionQuote, std::size_t>> rows;
  std::string line;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    const auto cols = split(line);
    if (cols.size() != width && !(width == 8 && cols.size() == 7)) {
      throw ParseError("expected " + std::to_string(width) + " columns", n);
    }
    OptionQuote q;
    q.quote_date = parse_date_at(cols[0], n);
    q.expiry_date = parse_date_at(cols[1], n);
    q.maturity_days = static_cast<int>((q.expiry_date - q.quote_date).count());
    if (q.maturity_days <= 0) throw ParseError("expiry must follow the quote date", n);
    q.strike = parse_number(cols[2], n, "strike");
    try {
      q.type = parse_option_type(cols[3]);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), n);
    }
    q.mid_price = parse_number(cols[4], n, "mid_price");
    q.underlying = parse_number(cols[5], n, "underlying");
    q.rate = parse_number(cols[6], n, "rate");
    if (!(q.strike > 0.0) || !(q.underlying > 0.0)) {
      throw ParseError("strike and underlying must be positive", n);
    }
    if (q.mid_price < 0.0) throw ParseError("negative option price", n);
    if (cols.size() == 8 && !cols[7].empty()) {
      q.market_iv = parse_number(cols[7], n, "market_iv");
    } else {
      try {
        q.market_iv =
            implied_vol(q.mid_price, q.underlying, q.strike, q.rate, q.year_fraction(), q.type);
      } catch (const DomainError&) {
        // no implied volatility exists; the IV filter rule drops the quote
      }
    }
    rows.emplace_back(q, n);
  }
  auto key = [](const OptionQuote& q) {
    return std::make_tuple(q.quote_date, q.expiry_date, q.type, q.strike);
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const auto& a, const auto& b) { return key(a.first) < key(b.first); });
  OptionChain out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && key(rows[i].first) == key(rows[i - 1].first)) {
      throw ParseError("duplicate option quote",
                       std::max(rows[i].second, rows[i - 1].second));
    }
    out.push_back(rows[i].first);
  }
  return out;
}

OptionChain load_option_chain(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_option_chain(in);
}

void write_series(std::ostream& out, const DatedSeries& series, std::string_view value_column) {
  set_precision(out);
  out << "date," << value_column << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_date(series.dates[i]) << ',' << series.values[i] << '\n';
  }
}

void write_series(const std::filesystem::path& path, const DatedSeries& series,
                  std::string_view value_column) {
  auto out = open_output(path);
  write_series(out, series, value_column);
}

namespace {

void write_quote_fields(std::ostream& out, const OptionQuote& q) {
  out << format_date(q.quote_date) << ',' << format_date(q.expiry_date) << ',' << q.strike << ','
      << to_string(q.type) << ',' << q.mid_price << ',' << q.underlying << ',' << q.rate << ',';
  if (q.market_iv) out << *q.market_iv;
}

}  // namespace

void write_option_chain(std::ostream& out, const OptionChain& chain) {
  set_precision(out);
  out << "quote_date,expiry_date,strike,type,mid_price,underlying,rate,market_iv\n";
  for (const OptionQuote& q : chain) {
    write_quote_fields(out, q);
    out << '\n';
  }
}

void write_priced_chain(std::ostream& out, const std::vector<PricedQuote>& rows) {
  set_precision(out);
  out << "quote_date,expiry_date,strike,type,mid_price,underlying,rate,market_iv,"
         "maturity_days,moneyness,model_price,model_iv,error\n";
  for (const PricedQuote& row : rows) {
    write_quote_fields(out, row.quote);
    out << ',' << row.quote.maturity_days << ',' << row.quote.moneyness() << ',';
    if (row.error) {
      std::string msg = *row.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      out << ",," << msg << '\n';
    } else {
      out << row.model_price << ',' << row.model_iv << ",\n";
    }
  }
}

DatedSeries rescale_rv(const DatedSeries& rv, const DatedSeries& returns) {
  const AlignedData a = align_series(rv, returns);
  if (a.rv.empty()) throw DomainError("no common dates to rescale realized variance");
  const double sum_rv = std::accumulate(a.rv.begin(), a.rv.end(), 0.0);
  const double sum_sq = std::inner_product(a.returns.begin(), a.returns.end(), a.returns.begin(), 0.0);
  if (!(sum_rv > 0.0)) throw DomainError("realized variance has zero mean");
  DatedSeries out = rv;
  for (double& v : out.values) v *= sum_sq / sum_rv;
  return out;
}

AlignedData align_series(const DatedSeries& rv, const DatedSeries& returns) {
  AlignedData out;
  std::size_t i = 0, j = 0;
  while (i < rv.size() && j < returns.size()) {
    if (rv.dates[i] < returns.dates[j]) {
      ++i;
    } else if (returns.dates[j] < rv.dates[i]) {
      ++j;
    } else {
      out.dates.push_back(rv.dates[i]);
      out.rv.push_back(rv.values[i++]);
      out.returns.push_back(returns.values[j++]);
    }
  }
  return out;
}

StateHistory::StateHistory(const ModelParams& params, const AlignedData& data)
    : dates_(data.dates), rv_(data.rv) {
  const std::vector<double> eps = filter_innovations(data.returns, data.rv, params.r, params.lambda);
  lev_ = leverage_series(params, eps, data.rv);
}

MarketState StateHistory::at(Date date) const {
  const auto it = std::upper_bound(dates_.begin(), dates_.end(), date);
  if (it == dates_.begin()) throw DomainError("no history on or before " + format_date(date));
  const auto last = static_cast<std::size_t>(it - dates_.begin()) - 1;
  if (last + 1 < static_cast<std::size_t>(kLags)) {
    throw DomainError("fewer than 22 observations before " + format_date(date));
  }
  return state_at(rv_, lev_, last);
}

std::string_view to_string(FilterRule rule) {
  switch (rule) {
    case FilterRule::Maturity: return "maturity";
    case FilterRule::ImpliedVol: return "implied_vol";
    case FilterRule::Price: return "price";
    case FilterRule::OutOfTheMoney: return "out_of_the_money";
    case FilterRule::Moneyness: return "moneyness";
  }
  return "unknown";
}

void FilterThresholds::validate() const {
  if (min_days <= 0 || max_days < min_days) throw DomainError("invalid maturity thresholds");
  if (!(max_iv > 0.0) || !(min_price > 0.0)) throw DomainError("filter thresholds must be positive");
  if (!(min_moneyness > 0.0) || max_moneyness < min_moneyness) {
    throw DomainError("invalid moneyness thresholds");
  }
}

std::optional<FilterRule> failing_rule(const OptionQuote& q, const FilterThresholds& t) {
  if (q.maturity_days < t.min_days || q.maturity_days > t.max_days) return FilterRule::Maturity;
  if (!q.market_iv || !(*q.market_iv <= t.max_iv)) return FilterRule::ImpliedVol;
  if (q.mid_price < t.min_price) return FilterRule::Price;
  if (t.otm_only && !q.out_of_the_money()) return FilterRule::OutOfTheMoney;
  const double m = q.moneyness();
  if (m < t.min_moneyness || m > t.max_moneyness) return FilterRule::Moneyness;
  return std::nullopt;
}

FilterReport filter_options(const OptionChain& chain, const FilterThresholds& thresholds) {
  thresholds.validate();
  FilterReport report;
  report.input = chain.size();
  for (const OptionQuote& q : chain) {
    if (const auto rule = failing_rule(q, thresholds)) {
      ++report.rejected[static_cast<std::size_t>(*rule)];
    } else {
      report.retained.push_back(q);
    }
  }
  return report;
}

namespace {

template <class T>
T parse_integer(std::string_view text, std::string_view key) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw DomainError("invalid integer for " + std::string(key));
  }
  return value;
}

double parse_real(std::string_view text, std::string_view key) {
  try {
    return parse_number(text, 0, key);
  } catch (const ParseError&) {
    throw DomainError("invalid number for " + std::string(key));
  }
}

bool parse_flag(std::string_view text, std::string_view key) {
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  throw DomainError("invalid flag for " + std::string(key));
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  const std::string v(value);
  if (key == "variant") variant = parse_variant(value);
  else if (key == "rv_path") rv_path = v;
  else if (key == "returns_path") returns_path = v;
  else if (key == "chain_path") chain_path = v;
  else if (key == "params_path") params_path = v;
  else if (key == "output_dir") output_dir = v;
  else if (key == "cos_terms") cos_terms = parse_integer<int>(value, key);
  else if (key == "cos_width") cos_width = parse_real(value, key);
  else if (key == "seed") seed = parse_integer<std::uint64_t>(value, key);
  else if (key == "paths") paths = parse_integer<std::size_t>(value, key);
  else if (key == "horizon") horizon = parse_integer<int>(value, key);
  else if (key == "target_iv") target_iv = parse_real(value, key);
  else if (key == "nu1") nu1 = parse_real(value, key);
  else if (key == "rate") rate = parse_real(value, key);
  else if (key == "filter.min_days") filter.min_days = parse_integer<int>(value, key);
  else if (key == "filter.max_days") filter.max_days = parse_integer<int>(value, key);
  else if (key == "filter.max_iv") filter.max_iv = parse_real(value, key);
  else if (key == "filter.min_price") filter.min_price = parse_real(value, key);
  else if (key == "filter.otm_only") filter.otm_only = parse_flag(value, key);
  else if (key == "filter.min_moneyness") filter.min_moneyness = parse_real(value, key);
  else if (key == "filter.max_moneyness") filter.max_moneyness = parse_real(value, key);
  else throw DomainError("unknown configuration key '" + std::string(key) + "'");
}

CosConfig Config::cos() const {
  CosConfig c;
  c.n_terms = cos_terms;
  c.range_width = cos_width;
  c.validate();
  return c;
}

namespace {

// Calls `sink(key, value, line)` for each key=value line.
template <class Sink>
void read_key_values(std::istream& in, Sink sink) {
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", n);
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", n);
    try {
      sink(key, value);
    } catch (const ParseError&) {
      throw;
    } catch (const DomainError& e) {
      throw ParseError(e.what(), n);
    }
  }
}

}  // namespace

Config read_config(std::istream& in) {
  Config c;
  read_key_values(in, [&](std::string_view k, std::string_view v) { c.set(k, v); });
  c.filter.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_config(in);
}

void write_params(std::ostream& out, const ModelParams& p, std::optional<double> nu1) {
  set_precision(out);
  out << "variant=" << to_string(p.variant) << '\n'
      << "theta=" << p.theta << '\n'
      << "delta=" << p.delta << '\n'
      << "d=" << p.d << '\n'
      << "beta_d=" << p.beta_d << '\n'
      << "beta_w=" << p.beta_w << '\n'
      << "beta_m=" << p.beta_m << '\n'
      << "alpha_d=" << p.alpha_d << '\n'
      << "alpha_w=" << p.alpha_w << '\n'
      << "alpha_m=" << p.alpha_m << '\n'
      << "gamma=" << p.gamma << '\n'
      << "lambda=" << p.lambda << '\n'
      << "r=" << p.r << '\n';
  if (nu1) out << "nu1=" << *nu1 << '\n';
}

ParamFile read_params(std::istream& in) {
  ParamFile f;
  ModelParams& p = f.params;
  read_key_values(in, [&](std::string_view k, std::string_view v) {
    if (k == "variant") {
      p.variant = parse_variant(v);
      return;
    }
    if (k == "nu1") {
      f.nu1 = parse_real(v, k);
      return;
    }
    // Fit files also carry standard errors and diagnostics; skip them.
    if (k.starts_with("se_") || k == "loglik" || k == "persistence" || k == "converged" ||
        k == "iterations" || k == "n_obs") {
      return;
    }
    double* slot = nullptr;
    if (k == "theta") slot = &p.theta;
    else if (k == "delta") slot = &p.delta;
    else if (k == "d") slot = &p.d;
    else if (k == "beta_d") slot = &p.beta_d;
    else if (k == "beta_w") slot = &p.beta_w;
    else if (k == "beta_m") slot = &p.beta_m;
    else if (k == "alpha_d") slot = &p.alpha_d;
    else if (k == "alpha_w") slot = &p.alpha_w;
    else if (k == "alpha_m") slot = &p.alpha_m;
    else if (k == "gamma") slot = &p.gamma;
    else if (k == "lambda") slot = &p.lambda;
    else if (k == "r") slot = &p.r;
    else throw DomainError("unknown parameter '" + std::string(k) + "'");
    *slot = parse_real(v, k);
  });
  p.validate();
  return f;
}

ParamFile load_params(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_params(in);
}

void write_fit(std::ostream& out, const FitResult& fit) {
  write_params(out, fit.params);
  const auto names = free_parameter_names(fit.params.variant);
  const auto ses = free_parameters(fit.std_errors);
  for (std::size_t i = 0; i < names.size(); ++i) out << "se_" << names[i] << '=' << ses[i] << '\n';
  out << "se_lambda=" << fit.lambda_std_error << '\n'
      << "loglik=" << fit.loglik << '\n'
      << "persistence=" << fit.persistence << '\n'
      << "converged=" << (fit.converged ? 1 : 0) << '\n'
      << "iterations=" << fit.iterations << '\n'
      << "n_obs=" << fit.n_obs << '\n';
}

void write_fit_csv(std::ostream& out, const FitResult& fit) {
  set_precision(out);
  const ModelParams& p = fit.params;
  const ModelParams& s = fit.std_errors;
  out << "variant,theta,se_theta,delta,se_delta,beta_d,se_beta_d,beta_w,se_beta_w,beta_m,"
         "se_beta_m,alpha_d,se_alpha_d,alpha_w,se_alpha_w,alpha_m,se_alpha_m,gamma,se_gamma,"
         "lambda,se_lambda,loglik,persistence\n";
  out << to_string(p.variant) << ',' << p.theta << ',' << s.theta << ',' << p.delta << ','
      << s.delta << ',' << p.beta_d << ',' << s.beta_d << ',' << p.beta_w << ',' << s.beta_w << ','
      << p.beta_m << ',' << s.beta_m << ',' << p.alpha_d << ',' << s.alpha_d << ',' << p.alpha_w
      << ',' << s.alpha_w << ',' << p.alpha_m << ',' << s.alpha_m << ',' << p.gamma << ','
      << s.gamma << ',' << p.lambda << ',' << fit.lambda_std_error << ',' << fit.loglik << ','
      << fit.persistence << '\n';
}

}  // namespace lharg
