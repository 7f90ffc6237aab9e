// Acceptance checks 1-10. `acceptance N` runs one check, no argument runs all.
// Each check prints one line "CRITERION n: PASS|FAIL <details>" and the
// process exits non-zero if any selected check fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lharg/estimation.hpp"
#include "lharg/mgf.hpp"
#include "lharg/model.hpp"
#include "lharg/pricing.hpp"
#include "lharg/simulator.hpp"
#include "lharg/validation.hpp"

using namespace lharg;

namespace {

const std::vector<int> kHorizons = {1, 5, 22, 63, 126, 252};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Variant3 {
  ModelParams params;
  double nu1;
};

std::vector<Variant3> variants(double r) {
  return {{table1::harg(r), table1::kNu1Harg},
          {table1::plharg(r), table1::kNu1Plharg},
          {table1::zmlharg(r), table1::kNu1Zmlharg}};
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Outcome mgf_normalization() {
  Stopwatch sw;
  double worst = 0.0;
  for (const auto& v : variants(1e-4)) {
    const MgfEngine e(v.params, stationary_state(v.params));
    for (int T : kHorizons) worst = std::max(worst, std::abs(e.mgf(0.0, T) - 1.0));
  }
  const double t = sw.seconds();
  return {worst <= 1e-12 && t < 1.0, fmt("max |mgf_P(0)-1| = %.3g (tol 1e-12), %.3f s", worst, t)};
}

Outcome martingale() {
  Stopwatch sw;
  const double r = 0.02 / 252.0;
  double worst = 0.0;
  for (const auto& v : variants(r)) {
    const RiskPremia premia = RiskPremia::no_arbitrage(v.params.lambda, v.nu1);
    for (auto route : {MgfEngine::QRoute::Direct, MgfEngine::QRoute::Mapped}) {
      const auto q = MgfEngine::risk_neutral(v.params, stationary_state(v.params), premia, route);
      for (int T : kHorizons) {
        const double growth = std::exp(r * T);
        worst = std::max(worst, std::abs(q.mgf(1.0, T) - growth) / growth);
      }
    }
  }
  const double t = sw.seconds();
  return {worst <= 1e-10 && t < 1.0,
          fmt("max |mgf_Q(1)-e^{rT}|/e^{rT} = %.3g (tol 1e-10), %.3f s", worst, t)};
}

Outcome measure_map() {
  Stopwatch sw;
  std::mt19937_64 rng(20240101);
  std::uniform_real_distribution<double> re(-2.0, 2.0), im(-25.0, 25.0);
  std::uniform_int_distribution<int> horizon(1, 252);
  double worst = 0.0;
  int pairs = 0;
  for (const auto& v : variants(1e-4)) {
    const RiskPremia premia = RiskPremia::no_arbitrage(v.params.lambda, v.nu1);
    const MarketState s = stationary_state(v.params);
    // The mapped parameters are parabolic, so they take the parabolic form of the state.
    const ModelParams mapped_params = risk_neutral_map(v.params, premia);
    const MarketState mapped_state = parabolic_state(v.params, s);
    for (int i = 0; i < 100; ++i, ++pairs) {
      const std::complex<double> z(re(rng), im(rng));
      const int T = horizon(rng);
      const auto direct = mgf_Q_direct(v.params, s, premia, z, T);
      const auto mapped = mgf_P(mapped_params, mapped_state, z, T);
      worst = std::max(worst, std::abs(direct - mapped) / std::abs(mapped));
    }
  }
  const double t = sw.seconds();
  return {worst <= 1e-12 && t < 5.0,
          fmt("%d pairs, max relative gap %.3g (tol 1e-12), %.3f s", pairs, worst, t)};
}

std::vector<std::complex<double>> figure_grid() {
  std::vector<std::complex<double>> z;
  for (double x : {-2.0, -1.0, 1.0, 2.0}) z.emplace_back(x, 0.0);
  for (double u : {1.0, 2.0, 5.0, 10.0}) z.emplace_back(0.0, u);
  return z;
}

Outcome mgf_monte_carlo() {
  Stopwatch sw;
  const ModelParams p = table1::zmlharg();
  const MarketState s = stationary_state(p);
  const RiskPremia premia = RiskPremia::no_arbitrage(p.lambda, table1::kNu1Zmlharg);
  const std::size_t n_paths = 500000;
  double worst = 0.0;
  std::size_t points = 0;
  std::string where;
  for (Measure m : {Measure::Physical, Measure::RiskNeutral}) {
    const auto prem = m == Measure::RiskNeutral ? std::optional<RiskPremia>(premia) : std::nullopt;
    const MgfCheck check = mgf_check(p, s, m, prem, kHorizons, figure_grid(), n_paths, 42);
    for (const MgfCheckRow& row : check.rows) {
      for (double dev : {row.dev_real, row.dev_imag}) {
        ++points;
        if (std::abs(dev) > worst) {
          worst = std::abs(dev);
          std::ostringstream w;
          w << to_string(m) << " T=" << row.horizon << " z=" << row.z;
          where = w.str();
        }
      }
    }
  }
  const double t = sw.seconds();
  return {worst <= 3.0 && t <= 600.0,
          fmt("%zu comparisons, max |dev| = %.2f SE at %s (tol 3), %zu paths per measure, %.1f s",
              points, worst, where.c_str(), n_paths, t)};
}

struct ClampCounter {
  ClampCounter empty() const { return {}; }
  void add(std::span<const double>, std::span<const double>) {}
  void merge(const ClampCounter&) {}
};

Outcome clamp_rates() {
  Stopwatch sw;
  const ModelParams p = table1::zmlharg();
  const MarketState s = stationary_state(p);
  const RiskPremia premia = RiskPremia::no_arbitrage(p.lambda, table1::kNu1Zmlharg);
  const std::size_t n_paths = 200000;
  const int horizon = 252;
  const double days = static_cast<double>(n_paths) * horizon;
  double freq[2];
  const double target[2] = {2e-5, 3e-6};
  int i = 0;
  for (Measure m : {Measure::Physical, Measure::RiskNeutral}) {
    const auto prem = m == Measure::RiskNeutral ? std::optional<RiskPremia>(premia) : std::nullopt;
    const PathSimulator sim(p, s, m, prem);
    ClampCounter acc;
    freq[i++] = static_cast<double>(accumulate_paths(sim, horizon, n_paths, 5, acc)) / days;
  }
  bool pass = true;
  for (int k = 0; k < 2; ++k) pass = pass && freq[k] >= target[k] / 10 && freq[k] <= target[k] * 10;
  return {pass, fmt("P %.3g (ref 2e-5), Q %.3g (ref 3e-6), %.3g simulated days each, %.1f s",
                    freq[0], freq[1], days, sw.seconds())};
}

Outcome persistence() {
  const double pl = stationarity_margin(table1::plharg());
  const double zm = stationarity_margin(parabolic_reduction(table1::zmlharg()));
  const bool pass = std::abs(pl - 0.8391) <= 5e-4 && std::abs(zm - 0.8116) <= 5e-4;
  return {pass, fmt("P-LHARG %.5f (ref 0.8391), ZM-LHARG %.5f (ref 0.8116), tol 5e-4", pl, zm)};
}

Outcome mle_recovery() {
  Stopwatch sw;
  const ModelParams truth = table1::plharg();
  const auto names = free_parameter_names(Variant::PLHARG);
  const auto gen = free_parameters(truth);
  std::vector<int> inside(names.size(), 0);
  std::vector<double> worst(names.size(), 0.0);
  const int reps = 10;
  int converged = 0;
  for (int rep = 0; rep < reps; ++rep) {
    const PathSet set = simulate_paths(truth, stationary_state(truth), 4500, 1, Measure::Physical,
                                       std::nullopt, 1000 + rep, 500);
    const std::vector<double> rv(set.rv_paths.row(0).begin(), set.rv_paths.row(0).end());
    const std::vector<double> y(set.y_paths.row(0).begin(), set.y_paths.row(0).end());
    const FitResult fit = mle_fit(rv, y, truth.r, Variant::PLHARG);
    converged += fit.converged;
    const auto est = free_parameters(fit.params);
    const auto se = free_parameters(fit.std_errors);
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double z = std::abs(est[i] - gen[i]) / se[i];
      if (std::isfinite(z) && z <= 3.0) ++inside[i];
      worst[i] = std::max(worst[i], std::isfinite(z) ? z : INFINITY);
    }
  }
  bool pass = true;
  std::string counts;
  for (std::size_t i = 0; i < names.size(); ++i) {
    pass = pass && inside[i] >= 9;
    counts += fmt("%s %d/10 (max %.2f) ", names[i].c_str(), inside[i], worst[i]);
  }
  const double t = sw.seconds();
  pass = pass && t <= 1200.0;
  return {pass, counts + fmt("converged %d/10, %.0f s", converged, t)};
}

// Payoff statistics of OTM options per maturity from stored cumulative returns.
struct OptionCheck {
  double worst_dev = 0.0;
  std::string where;
  int compared = 0;
};

Outcome cos_correctness() {
  Stopwatch sw;
  // Black-Scholes oracle through the generic COS pricer.
  const double sigma = 0.2;
  CosConfig bs_cfg;
  bs_cfg.interval = truncation_range(-0.5 * sigma * sigma, sigma * sigma, 0.0, bs_cfg.range_width);
  const CharacteristicFunction bs = [&](double u) {
    return std::exp(std::complex<double>(-0.5 * sigma * sigma * u * u, -0.5 * sigma * sigma * u));
  };
  const double bs_cos = cos_price(bs, 100, 100, 0.0, 1, OptionType::Call, bs_cfg);
  const double bs_err = std::abs(bs_cos - bs_price(100, 100, 0.0, sigma, 1.0, OptionType::Call));

  const std::vector<int> calendar = {30, 70, 120, 250};
  std::vector<int> horizons;
  for (int c : calendar) horizons.push_back(trading_days(c));
  const std::vector<double> moneyness = {0.8, 0.9, 1.0, 1.1, 1.2};
  const double r = 0.02 / 252.0;

  double parity_err = 0.0;
  OptionCheck mc;
  for (const auto& v : {Variant3{table1::zmlharg(r), table1::kNu1Zmlharg},
                        Variant3{table1::plharg(r), table1::kNu1Plharg}}) {
    const MarketState s = stationary_state(v.params);
    const RiskPremia premia = RiskPremia::no_arbitrage(v.params.lambda, v.nu1);
    const auto q = MgfEngine::risk_neutral(v.params, s, premia);

    const PathSimulator sim(v.params, s, Measure::RiskNeutral, premia);
    CumulativeReturnAccumulator acc(horizons);
    accumulate_paths(sim, horizons.back(), 500000, 8, acc);

    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const int T = horizons[h];
      const CosGrid grid = lharg_cos_grid(q, T, {});
      const double disc = std::exp(-r * T);
      const auto& y = acc.values(h);
      for (double m : moneyness) {
        const double c = grid.price(1.0, m, disc, OptionType::Call);
        const double p = grid.price(1.0, m, disc, OptionType::Put);
        parity_err = std::max(parity_err, std::abs(c - p - (1.0 - m * disc)));

        const OptionType type = m < 1.0 ? OptionType::Put : OptionType::Call;
        RunningStat payoff;
        for (double x : y) {
          const double st = std::exp(x);
          payoff.add(disc * (type == OptionType::Call ? std::max(st - m, 0.0) : std::max(m - st, 0.0)));
        }
        const double cos = type == OptionType::Call ? c : p;
        const double dev = std::abs(cos - payoff.mean) / payoff.std_error();
        ++mc.compared;
        if (dev > mc.worst_dev) {
          mc.worst_dev = dev;
          mc.where = fmt("%s T=%d m=%.1f", std::string(to_string(v.params.variant)).c_str(), T, m);
        }
      }
    }
  }
  const bool pass = bs_err <= 1e-6 && parity_err <= 1e-8 && mc.worst_dev <= 3.0;
  return {pass, fmt("BS error %.3g (tol 1e-6); parity %.3g (tol 1e-8); %d COS-vs-MC prices, "
                    "max %.2f SE at %s (tol 3); %.1f s",
                    bs_err, parity_err, mc.compared, mc.worst_dev, mc.where.c_str(), sw.seconds())};
}

Outcome skew_kurtosis() {
  const ModelParams zm = table1::zmlharg(), pl = table1::plharg();
  const RiskPremia pz = RiskPremia::no_arbitrage(zm.lambda, table1::kNu1Zmlharg);
  const RiskPremia pp = RiskPremia::no_arbitrage(pl.lambda, table1::kNu1Plharg);
  bool pass = true;
  std::string detail;
  for (int T : {22, 63, 126}) {
    const Cumulants a = cumulants(zm, std::nullopt, T, Measure::RiskNeutral, pz);
    const Cumulants b = cumulants(pl, std::nullopt, T, Measure::RiskNeutral, pp);
    pass = pass && a.skewness < 0.0 && a.skewness < b.skewness &&
           a.excess_kurtosis > b.excess_kurtosis;
    detail += fmt("T=%d skew ZM %.3f PL %.3f, exkurt ZM %.3f PL %.3f; ", T, a.skewness, b.skewness,
                  a.excess_kurtosis, b.excess_kurtosis);
  }
  return {pass, detail};
}

Outcome cumulant_cross_check() {
  Stopwatch sw;
  const ModelParams p = table1::zmlharg();
  const MarketState s = stationary_state(p);
  const RiskPremia premia = RiskPremia::no_arbitrage(p.lambda, table1::kNu1Zmlharg);
  const std::vector<int> horizons = {22, 126};
  double worst = 0.0;
  std::string where, detail;
  for (Measure m : {Measure::Physical, Measure::RiskNeutral}) {
    const auto prem = m == Measure::RiskNeutral ? std::optional<RiskPremia>(premia) : std::nullopt;
    const PathSimulator sim(p, s, m, prem);
    CumulativeReturnAccumulator acc(horizons);
    accumulate_paths(sim, horizons.back(), 1000000, 10, acc);
    const MgfEngine engine = m == Measure::RiskNeutral ? MgfEngine::risk_neutral(p, s, premia)
                                                       : MgfEngine(p, s);
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const Cumulants c = cumulants(engine, horizons[h]);
      const SampleCumulants mc = sample_cumulants(acc.values(h));
      const double devs[4] = {(mc.mean - c.mean) / mc.se_mean,
                              (mc.variance - c.variance) / mc.se_variance,
                              (mc.skewness - c.skewness) / mc.se_skewness,
                              (mc.excess_kurtosis - c.excess_kurtosis) / mc.se_excess_kurtosis};
      const char* labels[4] = {"mean", "variance", "skewness", "excess kurtosis"};
      for (int k = 0; k < 4; ++k) {
        if (std::abs(devs[k]) > worst) {
          worst = std::abs(devs[k]);
          where = fmt("%s T=%d %s", std::string(to_string(m)).c_str(), horizons[h], labels[k]);
        }
      }
      detail += fmt("%s T=%d skew %.3f/%.3f exkurt %.3f/%.3f; ", std::string(to_string(m)).c_str(),
                    horizons[h], c.skewness, mc.skewness, c.excess_kurtosis, mc.excess_kurtosis);
    }
  }
  return {worst <= 3.0, fmt("max |dev| %.2f SE at %s (tol 3), 1e6 paths; ", worst, where.c_str()) +
                            detail + fmt("%.1f s", sw.seconds())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> checks = {
      mgf_normalization, martingale,      measure_map, mgf_monte_carlo, clamp_rates,
      persistence,       mle_recovery,    cos_correctness, skew_kurtosis, cumulant_cross_check};
  std::vector<int> selected;
  if (argc < 2) {
    for (int i = 1; i <= 10; ++i) selected.push_back(i);
  } else {
    for (int a = 1; a < argc; ++a) selected.push_back(std::atoi(argv[a]));
  }
  bool all = true;
  for (int n : selected) {
    if (n < 1 || n > 10) {
      std::fprintf(stderr, "unknown criterion %d\n", n);
      return 2;
    }
    Outcome o;
    try {
      o = checks[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("CRITERION %d: %s %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
