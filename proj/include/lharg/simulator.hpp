#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "lharg/model.hpp"

namespace lharg {

using Rng = std::mt19937_64;

/// Independent stream for path `path` of run `seed`: the engine is seeded with
/// splitmix64(splitmix64(seed) + path), so streams depend only on (seed, path).
Rng path_rng(std::uint64_t seed, std::uint64_t path);

/// K ~ Poisson(Theta), then Gamma(shape delta + K, scale theta).
double sample_noncentral_gamma(double delta, double big_theta, double theta, Rng& rng);

/// Forward simulator of (RV, y) paths. Risk-neutral paths use the mapped
/// parameters with lambda* = -1/2. Negative noncentrality is clamped to zero
/// and counted.
class PathSimulator {
 public:
  PathSimulator(const ModelParams& params, const MarketState& state, Measure measure,
                const std::optional<RiskPremia>& premia = std::nullopt, int burn_in = 0);

  /// Fills rv and y (equal length) and returns the number of clamped days.
  std::uint64_t simulate(std::uint64_t seed, std::uint64_t path, std::span<double> rv,
                         std::span<double> y) const;

  Measure measure() const noexcept { return measure_; }
  const AffineModel& model() const noexcept { return model_; }

 private:
  AffineModel model_;
  MarketState state_;
  Measure measure_;
  int burn_in_;
};

struct PathSet {
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::size_t n_paths = 0;
  int horizon = 0;
  Matrix rv_paths;
  Matrix y_paths;
  std::uint64_t rng_seed = 0;
  Measure measure = Measure::Physical;
  std::uint64_t clamp_count = 0;
};

PathSet simulate_paths(const ModelParams& params, const MarketState& state, int horizon,
                       std::size_t n_paths, Measure measure,
                       const std::optional<RiskPremia>& premia, std::uint64_t seed,
                       int burn_in = 0);

inline constexpr std::size_t kPathChunk = 1024;

/// Streams `n_paths` simulated paths into accumulators without storing them.
///
/// Accumulator needs `Accumulator empty() const`, `void add(span rv, span y)` and
/// `void merge(const Accumulator&)`. Chunks of kPathChunk paths run on worker
/// threads and are merged in chunk order, so results do not depend on the
/// thread count. Returns the total clamp count.
template <class Accumulator>
std::uint64_t accumulate_paths(const PathSimulator& sim, int horizon, std::size_t n_paths,
                               std::uint64_t seed, Accumulator& acc, unsigned threads = 0) {
  const std::size_t n_chunks = (n_paths + kPathChunk - 1) / kPathChunk;
  std::vector<Accumulator> partial(n_chunks, acc.empty());
  std::vector<std::uint64_t> clamps(n_chunks, 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    std::vector<double> rv(horizon), y(horizon);
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      const std::size_t end = std::min(n_paths, (c + 1) * kPathChunk);
      for (std::size_t p = c * kPathChunk; p < end; ++p) {
        clamps[c] += sim.simulate(seed, p, rv, y);
        partial[c].add(std::span<const double>(rv), std::span<const double>(y));
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_chunks, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::uint64_t total = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    acc.merge(partial[c]);
    total += clamps[c];
  }
  return total;
}

/// Mean and sum of squared deviations with pairwise merging.
struct RunningStat {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  void merge(const RunningStat& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const double delta = o.mean - mean;
    mean += delta * o.n / total;
    m2 += o.m2 + delta * delta * n * o.n / total;
    n = total;
  }
  double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
  double std_error() const { return n > 1.0 ? std::sqrt(variance() / n) : 0.0; }
};

struct MgfEstimate {
  std::complex<double> value;
  double se_real = 0.0;  ///< standard error of the real part
  double se_imag = 0.0;  ///< standard error of the imaginary part
};

/// Monte Carlo E[exp(z y_{t,T})] on a grid of z at several horizons.
class MgfAccumulator {
 public:
  MgfAccumulator(std::vector<int> horizons, std::vector<std::complex<double>> z_grid);

  MgfAccumulator empty() const { return MgfAccumulator(horizons_, z_grid_); }
  void add(std::span<const double> rv, std::span<const double> y);
  void merge(const MgfAccumulator& other);

  MgfEstimate estimate(std::size_t horizon_index, std::size_t z_index) const;
  const std::vector<int>& horizons() const noexcept { return horizons_; }
  const std::vector<std::complex<double>>& z_grid() const noexcept { return z_grid_; }

 private:
  std::size_t slot(std::size_t h, std::size_t z) const { return h * z_grid_.size() + z; }

  std::vector<int> horizons_;
  std::vector<std::complex<double>> z_grid_;
  std::vector<RunningStat> re_, im_;
};

/// Sample mean and standard error of exp(z * sum_t y_t) over the full horizon.
std::vector<MgfEstimate> mc_mgf(const PathSet& paths, std::span<const std::complex<double>> z_grid);

/// Collects cumulative log-returns at chosen horizons, in path order.
class CumulativeReturnAccumulator {
 public:
  explicit CumulativeReturnAccumulator(std::vector<int> horizons);

  CumulativeReturnAccumulator empty() const { return CumulativeReturnAccumulator(horizons_); }
  void add(std::span<const double> rv, std::span<const double> y);
  void merge(const CumulativeReturnAccumulator& other);

  const std::vector<double>& values(std::size_t horizon_index) const { return values_[horizon_index]; }
  const std::vector<int>& horizons() const noexcept { return horizons_; }

 private:
  std::vector<int> horizons_;
  std::vector<std::vector<double>> values_;
};

/// Sample cumulant statistics with batch-means standard errors.
struct SampleCumulants {
  double mean = 0.0, variance = 0.0, skewness = 0.0, excess_kurtosis = 0.0;
  double se_mean = 0.0, se_variance = 0.0, se_skewness = 0.0, se_excess_kurtosis = 0.0;
};

SampleCumulants sample_cumulants(std::span<const double> x, std::size_t batches = 100);

}  // namespace lharg
