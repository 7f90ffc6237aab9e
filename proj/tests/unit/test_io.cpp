#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lharg/io.hpp"
#include "lharg/simulator.hpp"

using namespace lharg;
using namespace std::chrono;

namespace {

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_series(in, "rv", true);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

OptionQuote quote(int calendar_days, double strike, OptionType type, double price,
                  std::optional<double> iv) {
  OptionQuote q;
  q.quote_date = sys_days(year{2020} / March / 2);
  q.maturity_days = calendar_days;
  q.expiry_date = q.quote_date + days(calendar_days);
  q.strike = strike;
  q.type = type;
  q.mid_price = price;
  q.underlying = 100.0;
  q.rate = 0.01;
  q.market_iv = iv;
  return q;
}

}  // namespace

TEST(Dates, ParseAndFormat) {
  const Date d = parse_date("2008-02-29");
  EXPECT_EQ(format_date(d), "2008-02-29");
  EXPECT_EQ((parse_date("2008-03-01") - d).count(), 1);
  EXPECT_THROW(parse_date("2007-02-29"), DomainError);
  EXPECT_THROW(parse_date("03/01/2008"), DomainError);
}

TEST(Series, SortedByDate) {
  std::istringstream in("date,rv\n2020-01-03,3e-4\n2020-01-01,1e-4\n2020-01-02,2e-4\n");
  const DatedSeries s = read_series(in, "rv", true);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(format_date(s.dates[0]), "2020-01-01");
  EXPECT_EQ(format_date(s.dates[2]), "2020-01-03");
  EXPECT_EQ(s.values[1], 2e-4);
}

TEST(Series, NegativeVarianceReportsLine) {
  std::string text = "date,rv\n";
  for (int i = 1; i <= 5; ++i) text += "2020-01-0" + std::to_string(i) + ",1e-4\n";
  text += "2020-01-06,-1e-5\n";  // line 7
  EXPECT_EQ(parse_error_line(text), 7u);
  std::istringstream returns(text);
  EXPECT_NO_THROW(read_series(returns, "rv", false));
}

TEST(Series, SchemaViolations) {
  EXPECT_EQ(parse_error_line(""), 1u);
  EXPECT_EQ(parse_error_line("day,rv\n2020-01-01,1\n"), 1u);
  EXPECT_EQ(parse_error_line("date,rv\n2020-01-01,abc\n"), 2u);
  EXPECT_EQ(parse_error_line("date,rv\n2020-01-01,1,2\n"), 2u);
  EXPECT_EQ(parse_error_line("date,rv\n2020-01-01,1\n2020-13-01,1\n"), 3u);
  EXPECT_EQ(parse_error_line("date,rv\n2020-01-02,1\n2020-01-01,1\n2020-01-02,2\n"), 4u);
}

TEST(Series, WriteReadRoundTrip) {
  DatedSeries s;
  s.dates = {parse_date("2021-06-01"), parse_date("2021-06-02")};
  s.values = {1.0 / 3.0, 2.718281828459045e-5};
  std::stringstream io;
  write_series(io, s, "rv");
  const DatedSeries back = read_series(io, "rv", true);
  EXPECT_EQ(back.dates, s.dates);
  EXPECT_EQ(back.values, s.values);
}

TEST(Chain, ImpliedVolComputedWhenMissing) {
  const double price = bs_price(100, 105, 0.01, 0.22, trading_days(60) / 252.0, OptionType::Call);
  std::ostringstream text;
  text.precision(17);
  text << "quote_date,expiry_date,strike,type,mid_price,underlying,rate,market_iv\n"
       << "2020-03-02,2020-05-01,105,C," << price << ",100,0.01,\n"
       << "2020-03-02,2020-05-01,95,P,1.5,100,0.01,0.3\n";
  std::istringstream in(text.str());
  const OptionChain chain = read_option_chain(in);
  ASSERT_EQ(chain.size(), 2u);
  const auto& call = chain[0].type == OptionType::Call ? chain[0] : chain[1];
  const auto& put = chain[0].type == OptionType::Put ? chain[0] : chain[1];
  EXPECT_EQ(call.maturity_days, 60);
  ASSERT_TRUE(call.market_iv);
  EXPECT_NEAR(*call.market_iv, 0.22, 1e-9);
  EXPECT_EQ(*put.market_iv, 0.3);
}

TEST(Chain, SevenColumnsAndErrors) {
  std::istringstream ok(
      "quote_date,expiry_date,strike,type,mid_price,underlying,rate\n"
      "2020-03-02,2020-04-01,90,put,0.8,100,0.01\n"
      "2020-03-02,2020-04-01,200,call,120,100,0.01\n");
  const OptionChain chain = read_option_chain(ok);
  ASSERT_EQ(chain.size(), 2u);
  // A price above the spot has no implied volatility; the quote is kept without one.
  const auto& call = chain[0].type == OptionType::Call ? chain[0] : chain[1];
  EXPECT_FALSE(call.market_iv);

  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_option_chain(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string header = "quote_date,expiry_date,strike,type,mid_price,underlying,rate\n";
  EXPECT_EQ(line_of(header + "2020-03-02,2020-04-01,90,X,0.8,100,0.01\n"), 2u);
  EXPECT_EQ(line_of(header + "2020-03-02,2020-03-01,90,P,0.8,100,0.01\n"), 2u);
  EXPECT_EQ(line_of(header + "2020-03-02,2020-04-01,-90,P,0.8,100,0.01\n"), 2u);
  EXPECT_EQ(line_of(header + "2020-03-02,2020-04-01,90,P,0.8,100,0.01\n" +
                    "2020-03-02,2020-04-01,90,P,0.9,100,0.01\n"),
            3u);
  EXPECT_EQ(line_of("quote_date,strike\n"), 1u);
}

TEST(Chain, WriteReadRoundTrip) {
  const OptionChain chain = {quote(30, 95, OptionType::Put, 1.25, 0.21),
                             quote(30, 105, OptionType::Call, 0.75, 0.18)};
  std::stringstream io;
  write_option_chain(io, chain);
  const OptionChain back = read_option_chain(io);
  ASSERT_EQ(back.size(), 2u);
  // Quotes come back in (date, expiry, type, strike) order: the call first.
  const OptionQuote& call = back[0];
  const OptionQuote& put = back[1];
  EXPECT_EQ(call.type, OptionType::Call);
  EXPECT_EQ(put.strike, 95.0);
  EXPECT_EQ(call.mid_price, 0.75);
  EXPECT_EQ(call.market_iv, 0.18);
  EXPECT_EQ(put.market_iv, 0.21);
  EXPECT_EQ(put.expiry_date, chain[0].expiry_date);
}

TEST(Filter, RuleExamples) {
  const FilterThresholds t;
  EXPECT_EQ(failing_rule(quote(5, 100, OptionType::Call, 5.0, 0.2), t), FilterRule::Maturity);
  EXPECT_EQ(failing_rule(quote(30, 125, OptionType::Call, 0.5, 0.2), t), FilterRule::Moneyness);
  EXPECT_FALSE(failing_rule(quote(30, 100, OptionType::Call, 5.0, 0.2), t));
  EXPECT_EQ(failing_rule(quote(30, 100, OptionType::Call, 5.0, 0.75), t), FilterRule::ImpliedVol);
  EXPECT_EQ(failing_rule(quote(30, 100, OptionType::Call, 5.0, std::nullopt), t),
            FilterRule::ImpliedVol);
  EXPECT_EQ(failing_rule(quote(30, 100, OptionType::Call, 0.01, 0.2), t), FilterRule::Price);
  EXPECT_EQ(failing_rule(quote(30, 90, OptionType::Call, 11.0, 0.2), t), FilterRule::OutOfTheMoney);
  EXPECT_EQ(failing_rule(quote(30, 110, OptionType::Put, 11.0, 0.2), t), FilterRule::OutOfTheMoney);
  EXPECT_EQ(failing_rule(quote(400, 100, OptionType::Call, 5.0, 0.2), t), FilterRule::Maturity);
}

TEST(Filter, CountsAndIdempotence) {
  OptionChain chain;
  for (int days_out : {5, 30, 90}) {
    for (double k : {70.0, 85.0, 95.0, 100.0, 110.0, 125.0}) {
      for (OptionType type : {OptionType::Call, OptionType::Put}) {
        chain.push_back(quote(days_out, k, type, k == 100.0 ? 3.0 : 0.03 * k, 0.25));
      }
    }
  }
  const FilterReport report = filter_options(chain);
  std::size_t rejected = 0;
  for (std::size_t n : report.rejected) rejected += n;
  EXPECT_EQ(report.input, chain.size());
  EXPECT_EQ(report.retained.size() + rejected, chain.size());
  EXPECT_GT(report.retained.size(), 0u);
  for (const auto& q : report.retained) EXPECT_FALSE(failing_rule(q, {}));
  const FilterReport again = filter_options(report.retained);
  EXPECT_EQ(again.retained.size(), report.retained.size());
  FilterThresholds bad;
  bad.max_days = 1;
  EXPECT_THROW(filter_options(chain, bad), DomainError);
}

TEST(ConfigFile, CommentsAndKeys) {
  std::istringstream in(
      "# model run\n"
      "variant = PLHARG   # trailing note\n"
      "\n"
      "cos_terms=1024\n"
      "nu1=-3000.5\n"
      "filter.otm_only=false\n"
      "filter.max_iv=0.6\n");
  const Config c = read_config(in);
  EXPECT_EQ(c.variant, Variant::PLHARG);
  EXPECT_EQ(c.cos_terms, 1024);
  EXPECT_EQ(c.cos().n_terms, 1024);
  ASSERT_TRUE(c.nu1);
  EXPECT_EQ(*c.nu1, -3000.5);
  EXPECT_FALSE(c.rate);
  EXPECT_FALSE(c.filter.otm_only);
  EXPECT_EQ(c.filter.max_iv, 0.6);
}

TEST(ConfigFile, ErrorsCarryLines) {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_config(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("seed=1\nunknown_key=3\n"), 2u);
  EXPECT_EQ(line_of("# x\nno equals sign\n"), 2u);
  EXPECT_EQ(line_of("paths=many\n"), 1u);
  Config c;
  EXPECT_THROW(c.set("horizon", "1.5"), DomainError);
  c.set("horizon", "63");
  EXPECT_EQ(c.horizon, 63);
}

TEST(ParamsFile, RoundTripIsExact) {
  const ModelParams p = table1::zmlharg(0.02 / 252);
  std::stringstream io;
  write_params(io, p, -3375.0);
  const ParamFile back = read_params(io);
  EXPECT_EQ(back.params, p);
  ASSERT_TRUE(back.nu1);
  EXPECT_EQ(*back.nu1, -3375.0);
  std::stringstream without;
  write_params(without, table1::harg());
  EXPECT_FALSE(read_params(without).nu1);
}

TEST(ParamsFile, FitOutputReadsBackAsParams) {
  FitResult fit;
  fit.params = table1::plharg();
  fit.std_errors = table1::plharg();
  fit.loglik = 123.0;
  fit.persistence = stationarity_margin(fit.params);
  std::stringstream io;
  write_fit(io, fit);
  EXPECT_EQ(read_params(io).params, fit.params);
  std::ostringstream csv;
  write_fit_csv(csv, fit);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(Alignment, InnerJoinAndRescale) {
  DatedSeries rv, ret;
  rv.dates = {parse_date("2020-01-01"), parse_date("2020-01-02"), parse_date("2020-01-03")};
  rv.values = {1e-4, 2e-4, 3e-4};
  ret.dates = {parse_date("2020-01-02"), parse_date("2020-01-03"), parse_date("2020-01-04")};
  ret.values = {0.02, -0.02, 0.01};
  const AlignedData a = align_series(rv, ret);
  ASSERT_EQ(a.dates.size(), 2u);
  EXPECT_EQ(a.rv[0], 2e-4);
  EXPECT_EQ(a.returns[1], -0.02);
  const DatedSeries scaled = rescale_rv(rv, ret);
  // mean(ret^2) over the common dates is 4e-4, mean(rv) there 2.5e-4.
  EXPECT_NEAR(scaled.values[1], 2e-4 * 4e-4 / 2.5e-4, 1e-18);
}

TEST(History, StateOnOrBeforeDate) {
  const ModelParams p = table1::plharg();
  const PathSet set = simulate_paths(p, stationary_state(p), 40, 1, Measure::Physical, std::nullopt, 6);
  AlignedData data;
  const Date start = parse_date("2021-01-01");
  for (int t = 0; t < 40; ++t) {
    data.dates.push_back(start + days(t));
    data.rv.push_back(set.rv_paths(0, t));
    data.returns.push_back(set.y_paths(0, t));
  }
  const StateHistory h(p, data);
  EXPECT_THROW(h.at(start + days(20)), DomainError);
  const MarketState s = h.at(start + days(30));
  EXPECT_EQ(s.rv()(0), data.rv[30]);
  EXPECT_EQ(s.rv()(21), data.rv[9]);
  const MarketState later = h.at(start + days(100));
  EXPECT_EQ(later.rv()(0), data.rv[39]);
  const double eps = (data.returns[30] - p.r - p.lambda * data.rv[30]) / std::sqrt(data.rv[30]);
  EXPECT_NEAR(s.lev()(0), leverage(eps, data.rv[30], p.gamma, LeverageForm::Parabolic), 1e-12);
}

TEST(Files, LoadFromDisk) {
  const auto dir = std::filesystem::temp_directory_path() / "lharg_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "rv.csv";
  {
    std::ofstream out(path);
    out << "date,rv\n2020-01-01,1e-4\n";
  }
  EXPECT_EQ(load_rv_series(path).size(), 1u);
  EXPECT_THROW(load_rv_series(dir / "missing.csv"), DomainError);
  std::filesystem::remove_all(dir);
}
