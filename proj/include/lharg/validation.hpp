#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "lharg/mgf.hpp"
#include "lharg/simulator.hpp"

namespace lharg {

struct MgfCheckRow {
  int horizon = 0;
  std::complex<double> z;
  std::complex<double> analytic;
  MgfEstimate mc;
  double dev_real = 0.0;  ///< (mc - analytic)/se on the real part
  double dev_imag = 0.0;  ///< same on the imaginary part; 0 when the SE vanishes
};

struct MgfCheck {
  std::vector<MgfCheckRow> rows;
  std::uint64_t clamp_count = 0;
  std::size_t n_paths = 0;
  double max_abs_dev = 0.0;

  /// Clamped days over simulated days.
  double clamp_frequency() const;
};

/// Monte Carlo E[exp(z y_{t,T})] against the analytic MGF of the same measure.
MgfCheck mgf_check(const ModelParams& params, const MarketState& state, Measure measure,
                   const std::optional<RiskPremia>& premia, std::vector<int> horizons,
                   std::vector<std::complex<double>> z_grid, std::size_t n_paths,
                   std::uint64_t seed);

}  // namespace lharg
