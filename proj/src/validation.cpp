#include "lharg/validation.hpp"

#include <algorithm>
#include <cmath>

namespace lharg {

double MgfCheck::clamp_frequency() const {
  if (rows.empty() || n_paths == 0) return 0.0;
  int horizon = 0;
  for (const auto& row : rows) horizon = std::max(horizon, row.horizon);
  return static_cast<double>(clamp_count) /
         (static_cast<double>(n_paths) * static_cast<double>(horizon));
}

MgfCheck mgf_check(const ModelParams& params, const MarketState& state, Measure measure,
                   const std::optional<RiskPremia>& premia, std::vector<int> horizons,
                   std::vector<std::complex<double>> z_grid, std::size_t n_paths,
                   std::uint64_t seed) {
  if (horizons.empty() || z_grid.empty() || n_paths < 2) {
    throw DomainError("MGF check needs horizons, a z grid and at least two paths");
  }
  std::sort(horizons.begin(), horizons.end());
  const PathSimulator sim(params, state, measure, premia);
  MgfAccumulator acc(horizons, z_grid);

  MgfCheck out;
  out.n_paths = n_paths;
  out.clamp_count = accumulate_paths(sim, horizons.back(), n_paths, seed, acc);

  const MgfEngine engine = measure == Measure::Physical
                               ? MgfEngine(params, state)
                               : MgfEngine::risk_neutral(params, state, *premia);
  auto dev = [](double mc, double an, double se) { return se > 0.0 ? (mc - an) / se : 0.0; };
  for (std::size_t k = 0; k < z_grid.size(); ++k) {
    const auto analytic = engine.log_mgf_term_structure(z_grid[k], horizons);
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      MgfCheckRow row;
      row.horizon = horizons[h];
      row.z = z_grid[k];
      row.analytic = std::exp(analytic[h]);
      row.mc = acc.estimate(h, k);
      row.dev_real = dev(row.mc.value.real(), row.analytic.real(), row.mc.se_real);
      row.dev_imag = dev(row.mc.value.imag(), row.analytic.imag(), row.mc.se_imag);
      out.max_abs_dev = std::max({out.max_abs_dev, std::abs(row.dev_real), std::abs(row.dev_imag)});
      out.rows.push_back(row);
    }
  }
  return out;
}

}  // namespace lharg
