#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "lharg/model.hpp"

namespace lharg {

inline constexpr int kCoefficientSlots = 1 + 2 * kLags;

/// Coefficients (A, B_1..B_22, C_1..C_22) of the exponential-affine MGF, stored
/// flat so the backward loop never allocates.
template <class Scalar>
struct MgfCoefficients {
  using Vector = Eigen::Matrix<Scalar, kCoefficientSlots, 1>;

  Vector values = Vector::Zero();
  int horizon_remaining = 0;

  Scalar& a() { return values(0); }
  const Scalar& a() const { return values(0); }
  auto b() { return values.template segment<kLags>(1); }
  auto b() const { return values.template segment<kLags>(1); }
  auto c() { return values.template segment<kLags>(1 + kLags); }
  auto c() const { return values.template segment<kLags>(1 + kLags); }

  static MgfCoefficients terminal() { return {}; }
};

namespace detail {

template <class Scalar>
void guard_half_plane(const Scalar& value, const char* what, int step) {
  using std::real;
  if (!(real(value) > 0.0)) {
    throw RecursionDomainError(std::string(what) + " left the principal half-plane", step);
  }
}

}  // namespace detail

/// v(x, theta) = theta x / (1 - theta x).
template <class Scalar>
Scalar v_fn(const Scalar& x, double theta) {
  const Scalar tx = Scalar(theta) * x;
  const Scalar denom = Scalar(1) - tx;
  if (denom == Scalar(0)) throw NumericalError("v(x, theta) pole: theta*x = 1");
  return tx / denom;
}

/// w(x, theta) = ln(1 - x theta), principal branch.
template <class Scalar>
Scalar w_fn(const Scalar& x, double theta) {
  using std::log;
  const Scalar arg = Scalar(1) - Scalar(theta) * x;
  if (arg == Scalar(0)) throw NumericalError("w(x, theta) pole: theta*x = 1");
  return log(arg);
}

namespace detail {

/// One backward step of the affine recursion. The physical step is the special
/// case shift = 0, nu1 = 0, y_star = 0 (then v(Y*) = w(Y*) = 0 exactly).
template <class Scalar>
MgfCoefficients<Scalar> affine_step(const MgfCoefficients<Scalar>& next, const Scalar& z,
                                    double nu2, double nu1, double y_star,
                                    const AffineModel& m) {
  using std::log;
  const int step = next.horizon_remaining + 1;
  const Scalar one(1);
  const Scalar two(2);
  const Scalar c1 = next.c()(0);
  const Scalar b1 = next.b()(0);
  const Scalar one_minus_2c = one - two * c1;
  guard_half_plane(one_minus_2c, "1 - 2C", step);

  const Scalar ze = z - Scalar(nu2);
  const Scalar g(m.gamma);
  const Scalar x = ze * Scalar(m.lambda) + b1 - Scalar(nu1) +
                   (ze * ze / two + g * g * c1 - two * c1 * g * ze) / one_minus_2c;
  const Scalar one_minus_tx = one - Scalar(m.theta) * x;
  guard_half_plane(one_minus_tx, "1 - theta X", step);

  const Scalar y(y_star);
  const Scalar dv = v_fn(x, m.theta) - (y_star == 0.0 ? Scalar(0) : v_fn(y, m.theta));
  const Scalar dw = log(one_minus_tx) - (y_star == 0.0 ? Scalar(0) : w_fn(y, m.theta));

  MgfCoefficients<Scalar> out;
  out.horizon_remaining = step;
  out.a() = next.a() + z * Scalar(m.r) - log(one_minus_2c) / two - Scalar(m.delta) * dw +
            Scalar(m.d) * dv;
  const auto beta = m.beta.template cast<Scalar>();
  const auto alpha = m.alpha.template cast<Scalar>();
  out.b().template head<kLags - 1>() =
      next.b().template tail<kLags - 1>() + (dv * beta.template head<kLags - 1>()).matrix();
  out.b()(kLags - 1) = dv * beta(kLags - 1);
  out.c().template head<kLags - 1>() =
      next.c().template tail<kLags - 1>() + (dv * alpha.template head<kLags - 1>()).matrix();
  out.c()(kLags - 1) = dv * alpha(kLags - 1);
  return out;
}

}  // namespace detail

/// Physical-measure backward step from s+1 to s.
template <class Scalar>
MgfCoefficients<Scalar> step_P(const MgfCoefficients<Scalar>& next, const Scalar& z,
                               const AffineModel& model) {
  return detail::affine_step(next, z, 0.0, 0.0, 0.0, model);
}

/// Risk-neutral backward step using the starred recursion with Y* from `premia`.
template <class Scalar>
MgfCoefficients<Scalar> step_Q(const MgfCoefficients<Scalar>& next, const Scalar& z,
                               const AffineModel& model, const RiskPremia& premia) {
  return detail::affine_step(next, z, premia.nu2, premia.nu1, premia.y_star, model);
}

/// exp-argument A + B.rv + C.lev for a parabolic state.
template <class Scalar>
Scalar exponent(const MgfCoefficients<Scalar>& coeffs, const MarketState& parabolic) {
  const auto rv = parabolic.rv().template cast<Scalar>();
  const auto lev = parabolic.lev().template cast<Scalar>();
  return coeffs.a() + (coeffs.b().array() * rv).sum() + (coeffs.c().array() * lev).sum();
}

/// Log-MGF evaluator bound to one model, state and measure.
///
/// The risk-neutral MGF can be computed two ways: the direct starred recursion,
/// or the physical recursion on the risk-neutral parameter image. Both consume
/// the same parabolic state, since leverage values are invariant under the
/// change of measure.
class MgfEngine {
 public:
  enum class QRoute { Direct, Mapped };

  /// Physical measure.
  MgfEngine(const ModelParams& params, const MarketState& state);

  static MgfEngine risk_neutral(const ModelParams& params, const MarketState& state,
                                const RiskPremia& premia, QRoute route = QRoute::Mapped);

  Measure measure() const noexcept { return measure_; }
  const AffineModel& model() const noexcept { return model_; }
  const MarketState& parabolic_state() const noexcept { return state_; }

  template <class Scalar>
  MgfCoefficients<Scalar> coefficients(const Scalar& z, int horizon) const {
    if (horizon < 0) throw DomainError("horizon must be non-negative");
    MgfCoefficients<Scalar> coeffs;
    for (int s = 0; s < horizon; ++s) coeffs = step(coeffs, z);
    return coeffs;
  }

  template <class Scalar>
  Scalar log_mgf(const Scalar& z, int horizon) const {
    return exponent(coefficients(z, horizon), state_);
  }

  /// Log-MGF at every horizon in `horizons` (ascending) from one backward pass;
  /// the model is time-homogeneous, so s steps from the terminal state give horizon s.
  template <class Scalar>
  std::vector<Scalar> log_mgf_term_structure(const Scalar& z, std::span<const int> horizons) const {
    std::vector<Scalar> out;
    out.reserve(horizons.size());
    MgfCoefficients<Scalar> coeffs;
    for (int h : horizons) {
      if (h < coeffs.horizon_remaining) throw DomainError("horizons must be ascending");
      while (coeffs.horizon_remaining < h) coeffs = step(coeffs, z);
      out.push_back(exponent(coeffs, state_));
    }
    return out;
  }

  std::complex<double> mgf(std::complex<double> z, int horizon) const {
    return std::exp(log_mgf(z, horizon));
  }
  double mgf(double z, int horizon) const { return std::exp(log_mgf(z, horizon)); }

  /// E[exp(i u y_{t,T})].
  std::complex<double> characteristic_function(double u, int horizon) const {
    return mgf(std::complex<double>(0.0, u), horizon);
  }

 private:
  MgfEngine(Measure measure, const AffineModel& model, const MarketState& state,
            std::optional<RiskPremia> direct)
      : measure_(measure), model_(model), state_(state), direct_(direct) {}

  template <class Scalar>
  MgfCoefficients<Scalar> step(const MgfCoefficients<Scalar>& next, const Scalar& z) const {
    return direct_ ? step_Q(next, z, model_, *direct_) : step_P(next, z, model_);
  }

  Measure measure_;
  AffineModel model_;
  MarketState state_;
  std::optional<RiskPremia> direct_;
};

template <class Scalar>
Scalar mgf_P(const ModelParams& params, const MarketState& state, const Scalar& z, int horizon) {
  using std::exp;
  return exp(MgfEngine(params, state).log_mgf(z, horizon));
}

template <class Scalar>
Scalar mgf_Q_direct(const ModelParams& params, const MarketState& state, const RiskPremia& premia,
                    const Scalar& z, int horizon) {
  using std::exp;
  return exp(MgfEngine::risk_neutral(params, state, premia, MgfEngine::QRoute::Direct)
                 .log_mgf(z, horizon));
}

/// mgf_P evaluated on risk_neutral_map(params, premia).
template <class Scalar>
Scalar mgf_Q_mapped(const ModelParams& params, const MarketState& state, const RiskPremia& premia,
                    const Scalar& z, int horizon) {
  using std::exp;
  return exp(MgfEngine::risk_neutral(params, state, premia, MgfEngine::QRoute::Mapped)
                 .log_mgf(z, horizon));
}

struct Cumulants {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
};

/// First four cumulants of y_{t,T} from fourth-order central differences of the
/// log-MGF on a real stencil at z = 0, with one Richardson extrapolation.
Cumulants cumulants(const MgfEngine& engine, int horizon);

/// Convenience overload; without a state the stationary state of `params` is used.
Cumulants cumulants(const ModelParams& params, const std::optional<MarketState>& state, int horizon,
                    Measure measure, const std::optional<RiskPremia>& premia = std::nullopt);

}  // namespace lharg
