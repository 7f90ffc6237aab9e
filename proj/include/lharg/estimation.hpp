#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lharg/model.hpp"
#include "lharg/pricing.hpp"

namespace lharg {

enum class NonPositivePolicy { Reject, Clamp };

struct LikelihoodOptions {
  int k_max = 90;
  /// Start of the Poisson mixture sum. 0 keeps the exact density; 1 drops the
  /// k = 0 gamma(delta) component.
  int k_min = 0;
  NonPositivePolicy nonpositive = NonPositivePolicy::Reject;
  double clamp_floor = 1e-12;
};

/// Log-density of RV given a noncentrality Theta (noncentral gamma, truncated
/// Poisson mixture, evaluated with a log-sum-exp accumulation).
double noncentral_gamma_logpdf(double rv, double delta, double big_theta, double theta,
                               int k_min = 0, int k_max = 90);

/// Per-day log-likelihood contributions for t = 22 .. n-1 (needs 22 lags of history).
/// Throws LikelihoodDomainError with the offending index when Theta <= 0 under Reject.
Eigen::VectorXd loglik_contributions(const ModelParams& params, std::span<const double> rv,
                                     std::span<const double> eps,
                                     const LikelihoodOptions& opts = {});

double loglik(const ModelParams& params, std::span<const double> rv, std::span<const double> eps,
              const LikelihoodOptions& opts = {});

struct LambdaEstimate {
  double lambda = 0.0;
  double std_error = 0.0;
};

/// Slope through the origin of (y - r)/sqrt(RV) on sqrt(RV).
LambdaEstimate estimate_lambda(std::span<const double> returns, std::span<const double> rv,
                               double r);

struct FitOptions {
  std::optional<ModelParams> init;
  LikelihoodOptions likelihood;
  int max_iterations = 20000;
  double param_tol = 1e-8;
  double loglik_tol = 1e-10;
};

struct FitResult {
  ModelParams params;
  double loglik = 0.0;
  /// Robust standard errors laid out like params; NaN for fixed fields.
  ModelParams std_errors;
  double lambda_std_error = 0.0;
  double persistence = 0.0;
  bool converged = false;
  int iterations = 0;
  std::size_t n_obs = 0;
};

/// Names of the parameters estimated for a variant, in Table-1 order.
std::vector<std::string> free_parameter_names(Variant variant);
std::vector<double> free_parameters(const ModelParams& params);
ModelParams with_free_parameters(ModelParams params, std::span<const double> values);

/// HAR-style least-squares starting point (lambda must already be set on `base`).
ModelParams ols_start(std::span<const double> rv, std::span<const double> eps, Variant variant,
                      double gamma, double r, double lambda);

/// Maximum likelihood with lambda from estimate_lambda, simplex search then
/// BFGS polish, sandwich standard errors.
FitResult mle_fit(std::span<const double> rv, std::span<const double> returns, double r,
                  Variant variant, const FitOptions& opts = {});

/// Sandwich covariance H^-1 J H^-1 in the free parameters (score outer
/// products J, numerical Hessian H of the total log-likelihood).
Eigen::MatrixXd sandwich_covariance(const ModelParams& params, std::span<const double> rv,
                                    std::span<const double> eps,
                                    const LikelihoodOptions& opts = {});

struct CalibrationConfig {
  CosConfig cos;
  double persistence_cap = 0.999;  ///< bracket end on the risk-neutral side
  double max_scale = 2.0;          ///< largest 1 - theta Y* on the bracket
  double tolerance = 1e-15;        ///< relative, on 1 - theta Y*
};

/// nu1 such that the model one-year (or `maturity_days`) ATM implied volatility
/// equals target_iv. Throws CalibrationError with the attained IV range.
double calibrate_nu1(const ModelParams& params, double target_iv, int maturity_days,
                     const MarketState& state, const CalibrationConfig& cfg = {});

/// nu1 <-> the scale 1 - theta Y* dividing theta and the loadings under the map.
double nu1_from_scale(const ModelParams& params, double scale);
double scale_from_nu1(const ModelParams& params, double nu1);

}  // namespace lharg
