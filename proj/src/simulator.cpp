#include "lharg/simulator.hpp"

#include <array>
#include <cmath>
#include <string>

namespace lharg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void sample_moment_stats(std::span<const double> x, double& mean, double& var, double& skew,
                           double& exkurt) {
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  mean = s / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  var = m2 * n / (n - 1.0);
  skew = m3 / std::pow(m2, 1.5);
  exkurt = m4 / (m2 * m2) - 3.0;
}

}  // namespace

Rng path_rng(std::uint64_t seed, std::uint64_t path) {
  return Rng(splitmix64(splitmix64(seed) + path));
}

double sample_noncentral_gamma(double delta, double big_theta, double theta, Rng& rng) {
  if (!(delta > 0.0) || !(theta > 0.0) || !(big_theta >= 0.0) || !std::isfinite(big_theta)) {
    throw DomainError("noncentral gamma needs delta > 0, theta > 0 and Theta >= 0");
  }
  long k = 0;
  if (big_theta > 0.0) k = std::poisson_distribution<long>(big_theta)(rng);
  return std::gamma_distribution<double>(delta + static_cast<double>(k), theta)(rng);
}

PathSimulator::PathSimulator(const ModelParams& params, const MarketState& state, Measure measure,
                             const std::optional<RiskPremia>& premia, int burn_in)
    : state_(parabolic_state(params, state)), measure_(measure), burn_in_(burn_in) {
  params.validate();
  if (burn_in < 0) throw DomainError("burn-in must be non-negative");
  if (measure == Measure::Physical) {
    model_ = to_affine(params);
    return;
  }
  if (!premia) throw DomainError("risk-neutral simulation needs risk premia");
  if (!premia->arbitrage_free) {
    throw DomainError("risk-neutral simulation needs arbitrage-free premia (nu2 = lambda + 1/2)");
  }
  model_ = to_affine(risk_neutral_map(params, *premia));
}

std::uint64_t PathSimulator::simulate(std::uint64_t seed, std::uint64_t path, std::span<double> rv,
                                      std::span<double> y) const {
  if (rv.size() != y.size()) throw DomainError("rv and y buffers must have equal length");
  Rng rng = path_rng(seed, path);
  std::normal_distribution<double> normal;

  // Lag buffers, index 0 = most recent day.
  std::array<double, kLags> rv_lags, lev_lags;
  for (int i = 0; i < kLags; ++i) {
    rv_lags[i] = state_.rv()(i);
    lev_lags[i] = state_.lev()(i);
  }
  const AffineModel& m = model_;

  std::uint64_t clamps = 0;
  const std::size_t total = static_cast<std::size_t>(burn_in_) + rv.size();
  for (std::size_t t = 0; t < total; ++t) {
    double big_theta = m.d;
    for (int i = 0; i < kLags; ++i) big_theta += m.beta(i) * rv_lags[i] + m.alpha(i) * lev_lags[i];
    if (big_theta < 0.0) {
      big_theta = 0.0;
      ++clamps;
    }
    const double rv_next = sample_noncentral_gamma(m.delta, big_theta, m.theta, rng);
    const double eps = normal(rng);
    const double vol = std::sqrt(rv_next);
    const double shock = eps - m.gamma * vol;

    std::copy_backward(rv_lags.begin(), rv_lags.end() - 1, rv_lags.end());
    std::copy_backward(lev_lags.begin(), lev_lags.end() - 1, lev_lags.end());
    rv_lags[0] = rv_next;
    lev_lags[0] = shock * shock;

    if (t >= static_cast<std::size_t>(burn_in_)) {
      const std::size_t k = t - static_cast<std::size_t>(burn_in_);
      rv[k] = rv_next;
      y[k] = m.r + m.lambda * rv_next + vol * eps;
    }
  }
  return clamps;
}

PathSet simulate_paths(const ModelParams& params, const MarketState& state, int horizon,
                       std::size_t n_paths, Measure measure,
                       const std::optional<RiskPremia>& premia, std::uint64_t seed, int burn_in) {
  if (horizon < 1) throw DomainError("horizon must be at least one day");
  const PathSimulator sim(params, state, measure, premia, burn_in);
  PathSet out;
  out.n_paths = n_paths;
  out.horizon = horizon;
  out.rng_seed = seed;
  out.measure = measure;
  out.rv_paths.resize(static_cast<Eigen::Index>(n_paths), horizon);
  out.y_paths.resize(static_cast<Eigen::Index>(n_paths), horizon);
  for (std::size_t p = 0; p < n_paths; ++p) {
    const auto row = static_cast<Eigen::Index>(p);
    out.clamp_count += sim.simulate(seed, p, std::span<double>(out.rv_paths.row(row).data(), horizon),
                                    std::span<double>(out.y_paths.row(row).data(), horizon));
  }
  return out;
}

MgfAccumulator::MgfAccumulator(std::vector<int> horizons, std::vector<std::complex<double>> z_grid)
    : horizons_(std::move(horizons)),
      z_grid_(std::move(z_grid)),
      re_(horizons_.size() * z_grid_.size()),
      im_(horizons_.size() * z_grid_.size()) {
  if (!std::is_sorted(horizons_.begin(), horizons_.end())) {
    throw DomainError("MGF accumulator horizons must be ascending");
  }
}

void MgfAccumulator::add(std::span<const double>, std::span<const double> y) {
  double cum = 0.0;
  std::size_t t = 0;
  for (std::size_t h = 0; h < horizons_.size(); ++h) {
    const auto target = static_cast<std::size_t>(horizons_[h]);
    if (target > y.size()) throw DomainError("path shorter than accumulator horizon");
    for (; t < target; ++t) cum += y[t];
    for (std::size_t k = 0; k < z_grid_.size(); ++k) {
      const std::complex<double> value = std::exp(z_grid_[k] * cum);
      re_[slot(h, k)].add(value.real());
      im_[slot(h, k)].add(value.imag());
    }
  }
}

void MgfAccumulator::merge(const MgfAccumulator& other) {
  for (std::size_t i = 0; i < re_.size(); ++i) {
    re_[i].merge(other.re_[i]);
    im_[i].merge(other.im_[i]);
  }
}

MgfEstimate MgfAccumulator::estimate(std::size_t horizon_index, std::size_t z_index) const {
  const RunningStat& re = re_.at(slot(horizon_index, z_index));
  const RunningStat& im = im_.at(slot(horizon_index, z_index));
  return {{re.mean, im.mean}, re.std_error(), im.std_error()};
}

std::vector<MgfEstimate> mc_mgf(const PathSet& paths, std::span<const std::complex<double>> z_grid) {
  if (paths.n_paths == 0) throw DomainError("mc_mgf needs at least one path");
  MgfAccumulator acc({paths.horizon}, {z_grid.begin(), z_grid.end()});
  for (std::size_t p = 0; p < paths.n_paths; ++p) {
    const auto row = static_cast<Eigen::Index>(p);
    acc.add(std::span<const double>(paths.rv_paths.row(row).data(), paths.horizon),
            std::span<const double>(paths.y_paths.row(row).data(), paths.horizon));
  }
  std::vector<MgfEstimate> out;
  for (std::size_t k = 0; k < z_grid.size(); ++k) out.push_back(acc.estimate(0, k));
  return out;
}

CumulativeReturnAccumulator::CumulativeReturnAccumulator(std::vector<int> horizons)
    : horizons_(std::move(horizons)), values_(horizons_.size()) {
  if (!std::is_sorted(horizons_.begin(), horizons_.end())) {
    throw DomainError("cumulative return horizons must be ascending");
  }
}

void CumulativeReturnAccumulator::add(std::span<const double>, std::span<const double> y) {
  double cum = 0.0;
  std::size_t t = 0;
  for (std::size_t h = 0; h < horizons_.size(); ++h) {
    const auto target = static_cast<std::size_t>(horizons_[h]);
    if (target > y.size()) throw DomainError("path shorter than accumulator horizon");
    for (; t < target; ++t) cum += y[t];
    values_[h].push_back(cum);
  }
}

void CumulativeReturnAccumulator::merge(const CumulativeReturnAccumulator& other) {
  for (std::size_t h = 0; h < values_.size(); ++h) {
    values_[h].insert(values_[h].end(), other.values_[h].begin(), other.values_[h].end());
  }
}

SampleCumulants sample_cumulants(std::span<const double> x, std::size_t batches) {
  if (x.size() < 4 * std::max<std::size_t>(batches, 1)) {
    throw DomainError("too few samples for batched cumulant estimates");
  }
  SampleCumulants out;
  sample_moment_stats(x, out.mean, out.variance, out.skewness, out.excess_kurtosis);

  const std::size_t size = x.size() / batches;
  RunningStat mean, var, skew, kurt;
  for (std::size_t b = 0; b < batches; ++b) {
    double bm, bv, bs, bk;
    sample_moment_stats(x.subspan(b * size, size), bm, bv, bs, bk);
    mean.add(bm);
    var.add(bv);
    skew.add(bs);
    kurt.add(bk);
  }
  // Each batch statistic has sqrt(batches) times the spread of the full-sample one.
  out.se_mean = mean.std_error();
  out.se_variance = var.std_error();
  out.se_skewness = skew.std_error();
  out.se_excess_kurtosis = kurt.std_error();
  return out;
}

}  // namespace lharg
