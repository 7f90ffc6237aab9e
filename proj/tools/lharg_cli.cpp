// Command-line front end: estimation, calibration, pricing, simulation and checks.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>

#include "lharg/errors.hpp"
#include "lharg/estimation.hpp"
#include "lharg/io.hpp"
#include "lharg/mgf.hpp"
#include "lharg/model.hpp"
#include "lharg/pricing.hpp"
#include "lharg/simulator.hpp"
#include "lharg/validation.hpp"

using namespace lharg;

namespace {

const std::vector<int> kDefaultHorizons = {1, 5, 22, 63, 126, 252};

// Flags that mirror configuration keys are applied on top of the config file.
struct Overrides {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> values;
};

void config_flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& key,
                 const std::string& help) {
  app->add_option_function<std::string>(
      name, [&o, key](const std::string& v) { o.values.emplace_back(key, v); }, help);
}

Config resolve(const Overrides& o) {
  Config cfg = o.config_path.empty() ? Config{} : load_config(o.config_path);
  for (const auto& [k, v] : o.values) cfg.set(k, v);
  cfg.filter.validate();
  return cfg;
}

std::filesystem::path output_path(const Config& cfg, const std::string& name) {
  const std::filesystem::path p(name);
  return p.is_absolute() ? p : std::filesystem::path(cfg.output_dir) / p;
}

std::ofstream open_out(const Config& cfg, const std::string& name) {
  const auto path = output_path(cfg, name);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path.string());
  return out;
}

ModelParams table_params(Variant v) {
  switch (v) {
    case Variant::HARG: return table1::harg();
    case Variant::PLHARG: return table1::plharg();
    case Variant::ZMLHARG: return table1::zmlharg();
    case Variant::LHARG: break;
  }
  throw DomainError("no tabulated estimates for the general LHARG variant; pass --params");
}

double table_nu1(Variant v) {
  switch (v) {
    case Variant::HARG: return table1::kNu1Harg;
    case Variant::PLHARG: return table1::kNu1Plharg;
    case Variant::ZMLHARG: return table1::kNu1Zmlharg;
    case Variant::LHARG: break;
  }
  throw DomainError("no tabulated nu1 for the general LHARG variant; pass --nu1");
}

// Parameters from --params, else the tabulated estimates of the configured variant.
ParamFile model_from(const Config& cfg) {
  ParamFile f;
  if (!cfg.params_path.empty()) {
    f = load_params(cfg.params_path);
  } else {
    f.params = table_params(cfg.variant);
    f.nu1 = table_nu1(cfg.variant);
  }
  if (cfg.rate) f.params.r = *cfg.rate;
  if (cfg.nu1) f.nu1 = cfg.nu1;
  return f;
}

double require_nu1(const ParamFile& f) {
  if (!f.nu1) throw DomainError("risk-neutral computations need nu1 (--nu1 or a params file)");
  return *f.nu1;
}

std::optional<AlignedData> history_from(const Config& cfg) {
  if (cfg.rv_path.empty() && cfg.returns_path.empty()) return std::nullopt;
  if (cfg.rv_path.empty() || cfg.returns_path.empty()) {
    throw DomainError("conditioning on history needs both --rv and --returns");
  }
  return align_series(load_rv_series(cfg.rv_path), load_returns(cfg.returns_path));
}

std::vector<Measure> measures_from(const std::string& text) {
  if (text == "both") return {Measure::Physical, Measure::RiskNeutral};
  return {parse_measure(text)};
}

void print_double(std::ostream& out) { out << std::setprecision(12); }

// ---------------------------------------------------------------- estimate

int run_estimate(const Config& cfg, const std::string& out_file, const std::string& csv_file) {
  if (cfg.rv_path.empty() || cfg.returns_path.empty()) {
    throw DomainError("estimate needs --rv and --returns");
  }
  const AlignedData data = align_series(load_rv_series(cfg.rv_path), load_returns(cfg.returns_path));
  FitResult fit;
  try {
    fit = mle_fit(data.rv, data.returns, cfg.rate.value_or(0.0), cfg.variant);
  } catch (const LikelihoodDomainError& e) {
    const std::size_t i = std::min(e.index(), data.dates.size() - 1);
    throw LikelihoodDomainError(std::string(e.what()) + " (" + format_date(data.dates[i]) + ")",
                                e.index());
  }
  write_fit_csv(std::cout, fit);
  if (!out_file.empty()) {
    auto out = open_out(cfg, out_file);
    write_fit(out, fit);
  }
  if (!csv_file.empty()) {
    auto out = open_out(cfg, csv_file);
    write_fit_csv(out, fit);
  }
  print_double(std::cout);
  std::cout << "# " << to_string(cfg.variant) << " fit on " << fit.n_obs << " days: loglik "
            << fit.loglik << ", persistence " << fit.persistence << ", "
            << (fit.converged ? "converged" : "not converged (best iterate reported)") << " after " << fit.iterations
            << " iterations\n";
  return 0;
}

// ---------------------------------------------------------------- calibrate

int run_calibrate(const Config& cfg, int maturity, const std::string& out_file) {
  const ParamFile f = model_from(cfg);
  if (!(cfg.target_iv > 0.0)) throw DomainError("calibrate needs --target-iv");
  const auto history = history_from(cfg);
  const MarketState state = history ? StateHistory(f.params, *history).at(history->dates.back())
                                    : stationary_state(f.params);
  CalibrationConfig cc;
  cc.cos = cfg.cos();
  const double nu1 = calibrate_nu1(f.params, cfg.target_iv, maturity, state, cc);
  const double iv = model_atm_iv(f.params, nu1, maturity, state, cc.cos);
  print_double(std::cout);
  std::cout << "variant,target_iv,maturity_days,nu1,model_iv\n"
            << to_string(f.params.variant) << ',' << cfg.target_iv << ',' << maturity << ',' << nu1
            << ',' << iv << '\n';
  if (!out_file.empty()) {
    auto out = open_out(cfg, out_file);
    write_params(out, f.params, nu1);
  }
  std::cout << "# nu1 = " << nu1 << " matches ATM implied volatility " << cfg.target_iv << " at "
            << maturity << " trading days (" << (history ? "last observed state" : "stationary state")
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------- price / evaluate

ChainPricing price_from_config(const Config& cfg, bool apply_filter, FilterReport* report) {
  if (cfg.chain_path.empty()) throw DomainError("pricing needs --chain");
  const ParamFile f = model_from(cfg);
  const double nu1 = require_nu1(f);
  OptionChain chain = load_option_chain(cfg.chain_path);
  if (apply_filter) {
    FilterReport r = filter_options(chain, cfg.filter);
    chain = r.retained;
    if (report) *report = std::move(r);
  }
  const auto history = history_from(cfg);
  std::unique_ptr<StateHistory> states;
  if (history) states = std::make_unique<StateHistory>(f.params, *history);
  const MarketState stationary = stationary_state(f.params);
  const StateLookup lookup = [&](Date d) { return states ? states->at(d) : stationary; };
  return price_chain(f.params, nu1, chain, lookup, cfg.cos());
}

void print_filter(const FilterReport& r) {
  std::cout << "# filter: " << r.input << " quotes in, " << r.retained.size() << " retained";
  for (std::size_t i = 0; i < kFilterRules; ++i) {
    std::cout << ", " << to_string(static_cast<FilterRule>(i)) << ' ' << r.rejected[i];
  }
  std::cout << '\n';
}

int run_price(const Config& cfg, bool apply_filter, const std::string& out_file) {
  FilterReport report;
  const ChainPricing priced = price_from_config(cfg, apply_filter, &report);
  if (out_file.empty()) {
    write_priced_chain(std::cout, priced.rows);
  } else {
    auto out = open_out(cfg, out_file);
    write_priced_chain(out, priced.rows);
  }
  const auto failed = std::count_if(priced.rows.begin(), priced.rows.end(),
                                    [](const PricedQuote& q) { return q.error.has_value(); });
  if (apply_filter) print_filter(report);
  std::cout << "# priced " << priced.rows.size() << " quotes (" << failed << " failed) with "
            << priced.cf_grid_builds << " characteristic-function grids\n";
  return 0;
}

int run_evaluate(const Config& cfg, bool apply_filter, const std::string& out_file) {
  FilterReport report;
  const ChainPricing priced = price_from_config(cfg, apply_filter, &report);
  const RmsePanel panel = evaluate_panel(priced.rows);

  std::ostringstream csv;
  print_double(csv);
  static constexpr const char* kMoneyness[] = {"0.8-0.9", "0.9-0.98", "0.98-1.02", "1.02-1.1",
                                               "1.1-1.2"};
  static constexpr const char* kMaturity[] = {"<=50", "50-90", "90-160", ">160"};
  csv << "moneyness,maturity,count,rmse_iv\n";
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      csv << kMoneyness[i] << ',' << kMaturity[j] << ',' << panel.count[i][j] << ','
          << panel.rmse_iv[i][j] << '\n';
    }
  }
  csv << "0.9-1.1,all,," << panel.rmse_iv_inner << '\n';
  csv << "0.8-1.2,all," << panel.n_used << ',' << panel.rmse_iv_all << '\n';
  std::cout << csv.str();
  if (!out_file.empty()) {
    auto out = open_out(cfg, out_file);
    out << csv.str();
  }
  if (apply_filter) print_filter(report);
  std::cout << std::setprecision(4) << "# RMSE_IV " << panel.rmse_iv_all << " (0.9<m<1.1: "
            << panel.rmse_iv_inner << "), RMSE_P " << panel.rmse_p_all << " over " << panel.n_used
            << " quotes\n";
  return 0;
}

// ---------------------------------------------------------------- simulate

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

int run_simulate(const Config& cfg, const std::string& measure_text, const std::string& out_file,
                 const std::string& dump_file) {
  const ParamFile f = model_from(cfg);
  const Measure measure = parse_measure(measure_text);
  std::optional<RiskPremia> premia;
  if (measure == Measure::RiskNeutral) premia = RiskPremia::no_arbitrage(f.params.lambda, require_nu1(f));
  const MarketState state = stationary_state(f.params);
  const PathSimulator sim(f.params, state, measure, premia);
  const int horizon = cfg.horizon;
  if (horizon < 1) throw DomainError("horizon must be at least one day");
  const std::size_t n = cfg.paths;
  if (n < 2) throw DomainError("simulate needs at least two paths");

  std::ofstream dump;
  if (!dump_file.empty()) {
    dump = open_out(cfg, dump_file);
    dump.write("LHRG", 4);
    write_u32(dump, 1);
    write_u32(dump, static_cast<std::uint32_t>(n));
    write_u32(dump, static_cast<std::uint32_t>(horizon));
  }

  // Cumulative returns kept in single precision for the quantiles.
  std::vector<float> cum(n * static_cast<std::size_t>(horizon));
  std::vector<RunningStat> cum_stat(static_cast<std::size_t>(horizon)),
      rv_stat(static_cast<std::size_t>(horizon));
  std::vector<double> rv(static_cast<std::size_t>(horizon)), y(rv.size());
  std::uint64_t clamps = 0;
  for (std::size_t p = 0; p < n; ++p) {
    clamps += sim.simulate(cfg.seed, p, rv, y);
    double c = 0.0;
    for (std::size_t t = 0; t < rv.size(); ++t) {
      c += y[t];
      cum_stat[t].add(c);
      rv_stat[t].add(rv[t]);
      cum[t * n + p] = static_cast<float>(c);
    }
    if (dump) {
      for (double v : rv) write_f64(dump, v);
      for (double v : y) write_f64(dump, v);
    }
  }

  std::ostringstream csv;
  print_double(csv);
  csv << "t,mean_cum_return,var_cum_return,q05,q50,q95,mean_rv\n";
  auto quantile = [n](std::vector<float>& v, double q) {
    auto it = v.begin() + static_cast<std::ptrdiff_t>(q * static_cast<double>(n - 1));
    std::nth_element(v.begin(), it, v.end());
    return static_cast<double>(*it);
  };
  std::vector<float> column(n);
  for (std::size_t t = 0; t < rv.size(); ++t) {
    std::copy_n(cum.begin() + static_cast<std::ptrdiff_t>(t * n), n, column.begin());
    const double q05 = quantile(column, 0.05), q50 = quantile(column, 0.5),
                 q95 = quantile(column, 0.95);
    csv << t + 1 << ',' << cum_stat[t].mean << ',' << cum_stat[t].variance() << ',' << q05 << ','
        << q50 << ',' << q95 << ',' << rv_stat[t].mean << '\n';
  }
  if (out_file.empty()) {
    std::cout << csv.str();
  } else {
    auto out = open_out(cfg, out_file);
    out << csv.str();
  }
  std::cout << "# " << n << " " << to_string(measure) << "-paths of " << horizon
            << " days, seed " << cfg.seed << ", negative-noncentrality frequency "
            << static_cast<double>(clamps) / (static_cast<double>(n) * horizon) << '\n';
  return 0;
}

// ---------------------------------------------------------------- cumulants

int run_cumulants(const Config& cfg, const std::string& measure_text, std::vector<int> horizons) {
  const ParamFile f = model_from(cfg);
  if (horizons.empty()) horizons = kDefaultHorizons;
  print_double(std::cout);
  std::cout << "T,measure,mean,variance,skewness,excess_kurtosis\n";
  for (Measure m : measures_from(measure_text)) {
    std::optional<RiskPremia> premia;
    if (m == Measure::RiskNeutral) premia = RiskPremia::no_arbitrage(f.params.lambda, require_nu1(f));
    for (int h : horizons) {
      const Cumulants c = cumulants(f.params, std::nullopt, h, m, premia);
      std::cout << h << ',' << to_string(m) << ',' << c.mean << ',' << c.variance << ','
                << c.skewness << ',' << c.excess_kurtosis << '\n';
    }
  }
  std::cout << "# " << to_string(f.params.variant)
            << " cumulants of the cumulative log-return from the stationary state\n";
  return 0;
}

// ---------------------------------------------------------------- mgf-check

int run_mgf_check(const Config& cfg, const std::string& measure_text, std::vector<int> horizons,
                  std::vector<double> real_z, std::vector<double> imag_u) {
  const ParamFile f = model_from(cfg);
  if (horizons.empty()) horizons = kDefaultHorizons;
  if (real_z.empty()) real_z = {-2.0, -1.0, 1.0, 2.0};
  if (imag_u.empty()) imag_u = {1.0, 2.0, 5.0, 10.0};
  std::vector<std::complex<double>> grid;
  for (double z : real_z) grid.emplace_back(z, 0.0);
  for (double u : imag_u) grid.emplace_back(0.0, u);

  const MarketState state = stationary_state(f.params);
  print_double(std::cout);
  std::cout << "measure,T,z_re,z_im,mc_re,mc_im,se_re,se_im,analytic_re,analytic_im,dev_re,dev_im\n";
  double worst = 0.0;
  std::ostringstream summary;
  for (Measure m : measures_from(measure_text)) {
    std::optional<RiskPremia> premia;
    if (m == Measure::RiskNeutral) premia = RiskPremia::no_arbitrage(f.params.lambda, require_nu1(f));
    const MgfCheck check = mgf_check(f.params, state, m, premia, horizons, grid, cfg.paths, cfg.seed);
    for (const MgfCheckRow& r : check.rows) {
      std::cout << to_string(m) << ',' << r.horizon << ',' << r.z.real() << ',' << r.z.imag() << ','
                << r.mc.value.real() << ',' << r.mc.value.imag() << ',' << r.mc.se_real << ','
                << r.mc.se_imag << ',' << r.analytic.real() << ',' << r.analytic.imag() << ','
                << r.dev_real << ',' << r.dev_imag << '\n';
    }
    worst = std::max(worst, check.max_abs_dev);
    summary << "# " << to_string(m) << ": max deviation " << check.max_abs_dev
            << " SE, negative-noncentrality frequency " << check.clamp_frequency() << '\n';
  }
  std::cout << summary.str() << "# max deviation over all points: " << worst << " SE ("
            << cfg.paths << " paths)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LHARG realized-volatility option pricing"};
  app.require_subcommand(1);

  Overrides o;
  std::string out_file, csv_file, dump_file, measure_text = "P", both_text = "both";
  int maturity = 252;
  bool no_filter = false;
  std::vector<int> horizons;
  std::vector<double> real_z, imag_u;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key=value configuration file");
    config_flag(sub, o, "--variant", "variant", "HARG | P-LHARG | ZM-LHARG | LHARG");
    config_flag(sub, o, "--params", "params_path", "parameter or fit file (key=value)");
    config_flag(sub, o, "--rate", "rate", "daily risk-free rate");
    config_flag(sub, o, "--output-dir", "output_dir", "directory for relative output files");
  };
  auto data_flags = [&](CLI::App* sub) {
    config_flag(sub, o, "--rv", "rv_path", "realized variance CSV (date,rv)");
    config_flag(sub, o, "--returns", "returns_path", "log-return CSV (date,log_return)");
  };
  auto cos_flags = [&](CLI::App* sub) {
    config_flag(sub, o, "--cos-terms", "cos_terms", "COS expansion terms");
    config_flag(sub, o, "--cos-width", "cos_width", "COS truncation width L");
  };
  auto nu1_flag = [&](CLI::App* sub) {
    config_flag(sub, o, "--nu1", "nu1", "variance risk premium nu1");
  };
  auto mc_flags = [&](CLI::App* sub) {
    config_flag(sub, o, "--paths", "paths", "number of Monte Carlo paths");
    config_flag(sub, o, "--seed", "seed", "random seed");
  };

  auto* estimate = app.add_subcommand("estimate", "maximum-likelihood fit on RV and returns");
  common(estimate);
  data_flags(estimate);
  estimate->add_option("--out", out_file, "fit as key=value text");
  estimate->add_option("--csv", csv_file, "fit as a CSV row");

  auto* calibrate = app.add_subcommand("calibrate", "variance risk premium from an ATM IV target");
  common(calibrate);
  data_flags(calibrate);
  cos_flags(calibrate);
  config_flag(calibrate, o, "--target-iv", "target_iv", "ATM implied volatility target");
  calibrate->add_option("--maturity", maturity, "maturity in trading days")->capture_default_str();
  calibrate->add_option("--out", out_file, "parameters with nu1 (key=value)");

  auto* price = app.add_subcommand("price", "COS prices and implied volatilities for a chain");
  common(price);
  data_flags(price);
  cos_flags(price);
  nu1_flag(price);
  config_flag(price, o, "--chain", "chain_path", "option chain CSV");
  price->add_flag("--no-filter", no_filter, "price every quote without the standard filters");
  price->add_option("--out", out_file, "priced chain CSV (default: standard output)");

  auto* evaluate = app.add_subcommand("evaluate", "RMSE_IV panels by moneyness and maturity");
  common(evaluate);
  data_flags(evaluate);
  cos_flags(evaluate);
  nu1_flag(evaluate);
  config_flag(evaluate, o, "--chain", "chain_path", "option chain CSV");
  evaluate->add_flag("--no-filter", no_filter, "skip the standard filters");
  evaluate->add_option("--out", out_file, "panel CSV");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo paths from the stationary state");
  common(simulate);
  nu1_flag(simulate);
  mc_flags(simulate);
  config_flag(simulate, o, "--horizon", "horizon", "days per path");
  simulate->add_option("--measure", measure_text, "P or Q")->capture_default_str();
  simulate->add_option("--out", out_file, "per-day summary CSV (default: standard output)");
  simulate->add_option("--dump", dump_file, "raw paths: 16-byte header then rv and y per path");

  auto* cumulants_cmd = app.add_subcommand("cumulants", "cumulant term structure");
  common(cumulants_cmd);
  nu1_flag(cumulants_cmd);
  cumulants_cmd->add_option("--measure", both_text, "P, Q or both")->capture_default_str();
  cumulants_cmd->add_option("--horizons", horizons, "horizons in trading days");

  auto* check = app.add_subcommand("mgf-check", "analytic MGF against Monte Carlo");
  common(check);
  nu1_flag(check);
  mc_flags(check);
  check->add_option("--measure", both_text, "P, Q or both")->capture_default_str();
  check->add_option("--horizons", horizons, "horizons in trading days");
  check->add_option("--z", real_z, "real MGF arguments");
  check->add_option("--u", imag_u, "characteristic-function arguments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const Config cfg = resolve(o);
    if (*estimate) return run_estimate(cfg, out_file, csv_file);
    if (*calibrate) return run_calibrate(cfg, maturity, out_file);
    if (*price) return run_price(cfg, !no_filter, out_file);
    if (*evaluate) return run_evaluate(cfg, !no_filter, out_file);
    if (*simulate) return run_simulate(cfg, measure_text, out_file, dump_file);
    if (*cumulants_cmd) return run_cumulants(cfg, both_text, horizons);
    if (*check) return run_mgf_check(cfg, both_text, horizons, real_z, imag_u);
  } catch (const CalibrationError& e) {
    std::cerr << "calibration infeasible: " << e.what() << " (attainable IV " << e.iv_low()
              << " to " << e.iv_high() << ")\n";
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
