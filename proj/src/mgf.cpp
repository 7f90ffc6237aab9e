#include "lharg/mgf.hpp"

#include <array>
#include <cmath>

namespace lharg {

MgfEngine::MgfEngine(const ModelParams& params, const MarketState& state)
    : MgfEngine(Measure::Physical, to_affine(params), lharg::parabolic_state(params, state),
                std::nullopt) {
  params.validate();
}

MgfEngine MgfEngine::risk_neutral(const ModelParams& params, const MarketState& state,
                                  const RiskPremia& premia, QRoute route) {
  params.validate();
  const MarketState parabolic = lharg::parabolic_state(params, state);
  if (route == QRoute::Direct) {
    return MgfEngine(Measure::RiskNeutral, to_affine(params), parabolic, premia);
  }
  return MgfEngine(Measure::RiskNeutral, to_affine(risk_neutral_map(params, premia)), parabolic,
                   std::nullopt);
}

namespace {

using Real = long double;

struct Derivatives {
  Real d1, d2, d3, d4;
};

// Fourth-order central stencils; f(0) = 0 is not assumed.
Derivatives stencil(const std::array<Real, 7>& f, Real h) {
  // f[k] = f((k - 3) h)
  const Real fm3 = f[0], fm2 = f[1], fm1 = f[2], f0 = f[3], fp1 = f[4], fp2 = f[5], fp3 = f[6];
  Derivatives d;
  d.d1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h);
  d.d2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h);
  d.d3 = (-fp3 + 8 * fp2 - 13 * fp1 + 13 * fm1 - 8 * fm2 + fm3) / (8 * h * h * h);
  d.d4 = (-fp3 + 12 * fp2 - 39 * fp1 + 56 * f0 - 39 * fm1 + 12 * fm2 - fm3) / (6 * h * h * h * h);
  return d;
}

}  // namespace

Cumulants cumulants(const MgfEngine& engine, int horizon) {
  if (horizon < 1) throw DomainError("cumulants need a horizon of at least one day");
  auto f = [&](Real z) {
    const Real value = engine.log_mgf<Real>(z, horizon);
    if (!std::isfinite(static_cast<double>(value))) {
      throw NumericalError("log-MGF not finite on the differentiation stencil");
    }
    return value;
  };

  // Curvature guess sets the stencil scale to the standard deviation of y.
  const Real h0 = 1e-2L;
  const Real k2_guess = (f(h0) - 2 * f(0) + f(-h0)) / (h0 * h0);
  if (!(k2_guess > 0)) throw NumericalError("non-positive variance guess while differentiating");
  const Real h = 1e-3L * std::max<Real>(1, 1 / std::sqrt(k2_guess));

  auto derivatives = [&](Real step) {
    std::array<Real, 7> values;
    for (int k = 0; k < 7; ++k) values[k] = f((k - 3) * step);
    return stencil(values, step);
  };
  const Derivatives fine = derivatives(h);
  const Derivatives coarse = derivatives(2 * h);
  auto richardson = [](Real a, Real b) { return (16 * a - b) / 15; };

  Cumulants c;
  c.mean = static_cast<double>(richardson(fine.d1, coarse.d1));
  c.variance = static_cast<double>(richardson(fine.d2, coarse.d2));
  c.k3 = static_cast<double>(richardson(fine.d3, coarse.d3));
  c.k4 = static_cast<double>(richardson(fine.d4, coarse.d4));
  if (!(c.variance > 0.0)) throw NumericalError("finite-difference variance is not positive");
  c.skewness = c.k3 / std::pow(c.variance, 1.5);
  c.excess_kurtosis = c.k4 / (c.variance * c.variance);
  return c;
}

Cumulants cumulants(const ModelParams& params, const std::optional<MarketState>& state, int horizon,
                    Measure measure, const std::optional<RiskPremia>& premia) {
  const MarketState s = state ? *state : stationary_state(params);
  if (measure == Measure::Physical) return cumulants(MgfEngine(params, s), horizon);
  if (!premia) throw DomainError("risk-neutral cumulants need risk premia");
  return cumulants(MgfEngine::risk_neutral(params, s, *premia), horizon);
}

}  // namespace lharg
