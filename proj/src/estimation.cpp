#include "lharg/estimation.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

namespace lharg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kWarmUp = kLags;

// Field order shared by free_parameters/with_free_parameters.
enum class Field { Theta, Delta, D, BetaD, BetaW, BetaM, AlphaD, AlphaW, AlphaM, Gamma };

std::vector<Field> free_fields(Variant v) {
  std::vector<Field> f = {Field::Theta, Field::Delta, Field::BetaD, Field::BetaW, Field::BetaM};
  if (v == Variant::HARG) return f;
  f.insert(f.end(), {Field::AlphaD, Field::AlphaW, Field::AlphaM, Field::Gamma});
  if (v == Variant::LHARG) f.insert(f.begin() + 2, Field::D);
  return f;
}

double& field(ModelParams& p, Field f) {
  switch (f) {
    case Field::Theta: return p.theta;
    case Field::Delta: return p.delta;
    case Field::D: return p.d;
    case Field::BetaD: return p.beta_d;
    case Field::BetaW: return p.beta_w;
    case Field::BetaM: return p.beta_m;
    case Field::AlphaD: return p.alpha_d;
    case Field::AlphaW: return p.alpha_w;
    case Field::AlphaM: return p.alpha_m;
    case Field::Gamma: return p.gamma;
  }
  throw DomainError("unknown parameter field");
}

double field(const ModelParams& p, Field f) { return field(const_cast<ModelParams&>(p), f); }

const char* field_name(Field f) {
  static constexpr const char* names[] = {"theta",  "delta",   "d",       "beta_d",  "beta_w",
                                          "beta_m", "alpha_d", "alpha_w", "alpha_m", "gamma"};
  return names[static_cast<int>(f)];
}

bool is_beta(Field f) { return f == Field::BetaD || f == Field::BetaW || f == Field::BetaM; }
bool is_alpha(Field f) { return f == Field::AlphaD || f == Field::AlphaW || f == Field::AlphaM; }

void require_aligned(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("series must be aligned");
  if (a.size() < kWarmUp + 1) {
    throw DomainError("likelihood needs at least 23 observations (22-lag warm-up)");
  }
}

// Lag weights are only used through the 22-term dot products below.
double noncentrality_at(const ModelParams& p, const LagWeights& w, std::span<const double> rv,
                        std::span<const double> lev, std::size_t t) {
  double big_theta = p.d;
  for (std::size_t i = 0; i < kWarmUp; ++i) {
    big_theta += w.beta(static_cast<Eigen::Index>(i)) * rv[t - 1 - i] +
                 w.alpha(static_cast<Eigen::Index>(i)) * lev[t - 1 - i];
  }
  return big_theta;
}

}  // namespace

namespace {

// ln(k (delta + k - 1)) for k = 1..k_max, shared by every observation.
std::vector<double> poisson_gamma_increments(double delta, int k_max) {
  std::vector<double> out(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (int k = 1; k <= k_max; ++k) out[static_cast<std::size_t>(k)] = std::log(k * (delta + k - 1.0));
  return out;
}

// Terms are log-concave in k: locate the peak, then add terms outward until
// they fall below exp(-kNegligible) of it.
constexpr double kNegligible = 45.0;

double logpdf_with(double rv, double delta, double big_theta, double theta, int k_min, int k_max,
                   const std::vector<double>& incr, double lgamma_delta) {
  if (big_theta == 0.0) {
    if (k_min > 0) return -std::numeric_limits<double>::infinity();
    return (delta - 1.0) * std::log(rv) - delta * std::log(theta) - lgamma_delta - rv / theta;
  }
  const double step = std::log(rv * big_theta / theta);
  double term = (delta - 1.0) * std::log(rv) - delta * std::log(theta) - lgamma_delta;
  for (int k = 1; k <= k_min; ++k) term += step - incr[static_cast<std::size_t>(k)];
  int peak_k = k_min;
  double peak = term;
  while (peak_k < k_max && step > incr[static_cast<std::size_t>(peak_k) + 1]) {
    ++peak_k;
    peak += step - incr[static_cast<std::size_t>(peak_k)];
  }
  double sum = 1.0;
  double t = peak;
  for (int k = peak_k + 1; k <= k_max; ++k) {
    t += step - incr[static_cast<std::size_t>(k)];
    if (t < peak - kNegligible) break;
    sum += std::exp(t - peak);
  }
  t = peak;
  for (int k = peak_k; k > k_min; --k) {
    t -= step - incr[static_cast<std::size_t>(k)];
    if (t < peak - kNegligible) break;
    sum += std::exp(t - peak);
  }
  return -rv / theta - big_theta + peak + std::log(sum);
}

}  // namespace

double noncentral_gamma_logpdf(double rv, double delta, double big_theta, double theta, int k_min,
                               int k_max) {
  if (!(rv > 0.0) || !(delta > 0.0) || !(theta > 0.0) || !(big_theta >= 0.0)) {
    throw DomainError("noncentral gamma density needs rv, delta, theta > 0 and Theta >= 0");
  }
  if (k_min < 0 || k_max < k_min) throw DomainError("invalid Poisson truncation range");
  return logpdf_with(rv, delta, big_theta, theta, k_min, k_max,
                     poisson_gamma_increments(delta, k_max), std::lgamma(delta));
}

Eigen::VectorXd loglik_contributions(const ModelParams& params, std::span<const double> rv,
                                     std::span<const double> eps, const LikelihoodOptions& opts) {
  params.validate();
  require_aligned(rv, eps);
  const LagWeights w = expand_weights(params);
  const std::vector<double> lev = leverage_series(params, eps, rv);
  if (opts.k_min < 0 || opts.k_max < opts.k_min) throw DomainError("invalid Poisson truncation range");
  const std::vector<double> incr = poisson_gamma_increments(params.delta, opts.k_max);
  const double lgamma_delta = std::lgamma(params.delta);

  Eigen::VectorXd out(static_cast<Eigen::Index>(rv.size() - kWarmUp));
  for (std::size_t t = kWarmUp; t < rv.size(); ++t) {
    double big_theta = noncentrality_at(params, w, rv, lev, t);
    if (!(big_theta > 0.0)) {
      if (opts.nonpositive == NonPositivePolicy::Reject || !std::isfinite(big_theta)) {
        throw LikelihoodDomainError(
            "non-positive noncentrality at index " + std::to_string(t), t);
      }
      big_theta = opts.clamp_floor;
    }
    if (!(rv[t] > 0.0)) {
      throw LikelihoodDomainError("non-positive realized variance at index " + std::to_string(t), t);
    }
    out(static_cast<Eigen::Index>(t - kWarmUp)) = logpdf_with(
        rv[t], params.delta, big_theta, params.theta, opts.k_min, opts.k_max, incr, lgamma_delta);
  }
  return out;
}

double loglik(const ModelParams& params, std::span<const double> rv, std::span<const double> eps,
              const LikelihoodOptions& opts) {
  return loglik_contributions(params, rv, eps, opts).sum();
}

LambdaEstimate estimate_lambda(std::span<const double> returns, std::span<const double> rv,
                               double r) {
  if (returns.size() != rv.size()) throw DomainError("returns and rv series must be aligned");
  if (rv.size() < 3) throw DomainError("lambda regression needs at least 3 observations");
  double sxx = 0.0, sxz = 0.0;
  for (std::size_t t = 0; t < rv.size(); ++t) {
    if (!(rv[t] > 0.0)) {
      throw DomainError("degenerate realized variance at index " + std::to_string(t));
    }
    sxx += rv[t];  // x = sqrt(rv), z = (y - r)/sqrt(rv), so x*z = y - r
    sxz += returns[t] - r;
  }
  const double lambda = sxz / sxx;
  double sse = 0.0;
  for (std::size_t t = 0; t < rv.size(); ++t) {
    const double x = std::sqrt(rv[t]);
    const double e = (returns[t] - r) / x - lambda * x;
    sse += e * e;
  }
  const double s2 = sse / static_cast<double>(rv.size() - 1);
  return {lambda, std::sqrt(s2 / sxx)};
}

std::vector<std::string> free_parameter_names(Variant variant) {
  std::vector<std::string> out;
  for (Field f : free_fields(variant)) out.emplace_back(field_name(f));
  return out;
}

std::vector<double> free_parameters(const ModelParams& params) {
  std::vector<double> out;
  for (Field f : free_fields(params.variant)) out.push_back(field(params, f));
  return out;
}

ModelParams with_free_parameters(ModelParams params, std::span<const double> values) {
  const auto fields = free_fields(params.variant);
  if (values.size() != fields.size()) throw DomainError("wrong number of free parameters");
  for (std::size_t i = 0; i < fields.size(); ++i) field(params, fields[i]) = values[i];
  return params;
}

ModelParams ols_start(std::span<const double> rv, std::span<const double> eps, Variant variant,
                      double gamma, double r, double lambda) {
  require_aligned(rv, eps);
  if (variant == Variant::LHARG) {
    return parabolic_reduction(ols_start(rv, eps, Variant::ZMLHARG, gamma, r, lambda));
  }
  ModelParams p;
  p.variant = variant;
  p.gamma = variant == Variant::HARG ? 0.0 : gamma;
  p.lambda = lambda;
  p.r = r;
  const std::vector<double> lev = leverage_series(p, eps, rv);
  const bool with_lev = variant != Variant::HARG;

  const auto n = static_cast<Eigen::Index>(rv.size() - kWarmUp);
  const Eigen::Index k = with_lev ? 7 : 4;
  Eigen::MatrixXd x(n, k);
  Eigen::VectorXd y(n);
  auto mean = [](std::span<const double> s, std::size_t t, std::size_t from, std::size_t to) {
    double acc = 0.0;
    for (std::size_t i = from; i <= to; ++i) acc += s[t - i];
    return acc / static_cast<double>(to - from + 1);
  };
  for (Eigen::Index row = 0; row < n; ++row) {
    const auto t = static_cast<std::size_t>(row) + kWarmUp;
    y(row) = rv[t];
    x(row, 0) = 1.0;
    x(row, 1) = rv[t - 1];
    x(row, 2) = mean(rv, t, 2, 1 + kWeeklyLags);
    x(row, 3) = mean(rv, t, 2 + kWeeklyLags, kLags);
    if (with_lev) {
      x(row, 4) = lev[t - 1];
      x(row, 5) = mean(lev, t, 2, 1 + kWeeklyLags);
      x(row, 6) = mean(lev, t, 2 + kWeeklyLags, kLags);
    }
  }
  // Column scaling keeps the normal equations well conditioned.
  const Eigen::VectorXd scale = x.colwise().norm().transpose();
  const Eigen::VectorXd c =
      (x * scale.cwiseInverse().asDiagonal()).colPivHouseholderQr().solve(y).cwiseQuotient(scale);

  // Conditional variance theta(2 mu - theta delta): regress squared residuals on the mean.
  const Eigen::VectorXd mu = x * c;
  const Eigen::VectorXd e2 = (y - mu).array().square();
  const double mu_bar = mu.mean();
  const double slope = ((mu.array() - mu_bar) * (e2.array() - e2.mean())).sum() /
                       (mu.array() - mu_bar).square().sum();
  double theta = 0.5 * slope;
  if (!(theta > 0.0) || !std::isfinite(theta)) theta = e2.mean() / (2.0 * mu_bar);
  p.theta = theta;
  p.delta = c(0) / theta > 0.1 ? c(0) / theta : 1.0;
  p.beta_d = c(1) / theta;
  p.beta_w = c(2) / theta;
  p.beta_m = c(3) / theta;
  if (with_lev) {
    p.alpha_d = c(4) / theta;
    p.alpha_w = c(5) / theta;
    p.alpha_m = c(6) / theta;
  }
  if (variant != Variant::ZMLHARG) {
    const double bmax = std::max({p.beta_d, p.beta_w, p.beta_m, 1.0});
    for (double* b : {&p.beta_d, &p.beta_w, &p.beta_m}) *b = std::max(*b, 0.01 * bmax);
    if (with_lev) {
      const double amax = std::max({p.alpha_d, p.alpha_w, p.alpha_m, 1e-3});
      for (double* a : {&p.alpha_d, &p.alpha_w, &p.alpha_m}) *a = std::max(*a, 0.01 * amax);
    }
  }
  return p;
}

namespace {

// Variant with the same likelihood but no sign restrictions, for derivatives
// taken across a boundary.
ModelParams unconstrained(ModelParams p) {
  if (p.variant == Variant::PLHARG) p.variant = Variant::LHARG;
  return p;
}

// Group magnitude used when a parameter sits near zero.
std::vector<double> typical_scale(const ModelParams& p, const std::vector<Field>& fields) {
  const double bmax = std::max({std::abs(p.beta_d), std::abs(p.beta_w), std::abs(p.beta_m)});
  const double amax = std::max({std::abs(p.alpha_d), std::abs(p.alpha_w), std::abs(p.alpha_m)});
  std::vector<double> s;
  for (Field f : fields) {
    double v = std::abs(field(p, f));
    if (is_beta(f)) v = std::max(v, bmax);
    if (is_alpha(f)) v = std::max(v, amax);
    if (f == Field::D) v = std::max(v, 3.0 * amax);
    if (f == Field::Gamma) v = std::max(v, 1.0);
    s.push_back(v > 0.0 ? v : 1.0);
  }
  return s;
}

Eigen::MatrixXd scores(const ModelParams& p, const std::vector<Field>& fields,
                       const std::vector<double>& steps, std::span<const double> rv,
                       std::span<const double> eps, const LikelihoodOptions& opts) {
  const auto k = static_cast<Eigen::Index>(fields.size());
  Eigen::MatrixXd s(static_cast<Eigen::Index>(rv.size() - kWarmUp), k);
  for (Eigen::Index i = 0; i < k; ++i) {
    ModelParams up = p, dn = p;
    const auto fi = fields[static_cast<std::size_t>(i)];
    const double h = steps[static_cast<std::size_t>(i)];
    field(up, fi) += h;
    field(dn, fi) -= h;
    s.col(i) = (loglik_contributions(up, rv, eps, opts) - loglik_contributions(dn, rv, eps, opts)) /
               (2.0 * h);
  }
  return s;
}

Eigen::MatrixXd hessian(const ModelParams& p, const std::vector<Field>& fields,
                        const std::vector<double>& steps, std::span<const double> rv,
                        std::span<const double> eps, const LikelihoodOptions& opts) {
  const auto k = static_cast<Eigen::Index>(fields.size());
  auto at = [&](std::initializer_list<std::pair<Eigen::Index, double>> moves) {
    ModelParams q = p;
    for (auto [i, m] : moves) {
      field(q, fields[static_cast<std::size_t>(i)]) += m * steps[static_cast<std::size_t>(i)];
    }
    return loglik(q, rv, eps, opts);
  };
  const double f0 = loglik(p, rv, eps, opts);
  Eigen::MatrixXd h(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double hi = steps[static_cast<std::size_t>(i)];
    h(i, i) = (at({{i, 1.0}}) - 2.0 * f0 + at({{i, -1.0}})) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = steps[static_cast<std::size_t>(j)];
      h(i, j) = (at({{i, 1.0}, {j, 1.0}}) - at({{i, 1.0}, {j, -1.0}}) -
                 at({{i, -1.0}, {j, 1.0}}) + at({{i, -1.0}, {j, -1.0}})) /
                (4.0 * hi * hj);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

}  // namespace

Eigen::MatrixXd sandwich_covariance(const ModelParams& params, std::span<const double> rv,
                                    std::span<const double> eps, const LikelihoodOptions& opts) {
  const auto fields = free_fields(params.variant);
  const ModelParams p = unconstrained(params);
  const auto k = static_cast<Eigen::Index>(fields.size());

  // Pilot scores on a magnitude-based step give the information scale; the
  // final derivatives use a step of 1% of the implied standard error.
  std::vector<double> steps = typical_scale(params, fields);
  for (double& s : steps) s *= 1e-5;
  const Eigen::MatrixXd pilot = scores(p, fields, steps, rv, eps, opts);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double info = pilot.col(i).squaredNorm();
    if (info > 0.0 && std::isfinite(info)) steps[static_cast<std::size_t>(i)] = 1e-2 / std::sqrt(info);
  }
  const Eigen::MatrixXd s = scores(p, fields, steps, rv, eps, opts);
  const Eigen::MatrixXd j = s.transpose() * s;
  const Eigen::MatrixXd h = hessian(p, fields, steps, rv, eps, opts);

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(-h);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0) {
    return Eigen::MatrixXd::Constant(k, k, kNaN);
  }
  const Eigen::MatrixXd h_inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  return h_inv * j * h_inv;
}

namespace {

// Unconstrained coordinates: log for positive parameters, scaled identity otherwise.
struct Transform {
  std::vector<Field> fields;
  std::vector<bool> positive;
  std::vector<double> scale;

  Transform(const ModelParams& init) : fields(free_fields(init.variant)) {
    const auto typical = typical_scale(init, fields);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const Field f = fields[i];
      const bool pos = f == Field::Theta || f == Field::Delta ||
                       (init.variant != Variant::ZMLHARG && init.variant != Variant::LHARG &&
                        (is_beta(f) || is_alpha(f)));
      positive.push_back(pos);
      scale.push_back(typical[i]);
    }
  }

  std::vector<double> to_u(const ModelParams& p) const {
    std::vector<double> u;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const double v = field(p, fields[i]);
      u.push_back(positive[i] ? std::log(std::max(v, 1e-300)) : v / scale[i]);
    }
    return u;
  }

  ModelParams from_u(ModelParams p, const double* u) const {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      field(p, fields[i]) = positive[i] ? std::exp(u[i]) : u[i] * scale[i];
    }
    return p;
  }
};

struct Objective {
  const Transform* transform;
  ModelParams base;
  std::span<const double> rv;
  std::span<const double> eps;
  LikelihoodOptions opts;
  double n = 1.0;
  std::size_t evaluations = 0;

  static constexpr double kPenalty = 1e30;

  double operator()(const double* u) {
    ++evaluations;
    try {
      const double ll = loglik(transform->from_u(base, u), rv, eps, opts);
      return std::isfinite(ll) ? -ll / n : kPenalty;
    } catch (const Error&) {
      return kPenalty;
    }
  }
};

double gsl_f(const gsl_vector* x, void* data) {
  return (*static_cast<Objective*>(data))(gsl_vector_const_ptr(x, 0));
}

void gsl_df(const gsl_vector* x, void* data, gsl_vector* g) {
  auto& obj = *static_cast<Objective*>(data);
  std::vector<double> u(x->size);
  for (std::size_t i = 0; i < x->size; ++i) u[i] = gsl_vector_get(x, i);
  for (std::size_t i = 0; i < x->size; ++i) {
    constexpr double h = 1e-6;
    const double keep = u[i];
    u[i] = keep + h;
    const double up = obj(u.data());
    u[i] = keep - h;
    const double dn = obj(u.data());
    u[i] = keep;
    gsl_vector_set(g, i, (up - dn) / (2.0 * h));
  }
}

void gsl_fdf(const gsl_vector* x, void* data, double* f, gsl_vector* g) {
  *f = gsl_f(x, data);
  gsl_df(x, data, g);
}

using VectorPtr = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;

VectorPtr make_vector(const std::vector<double>& v) {
  VectorPtr out(gsl_vector_alloc(v.size()), &gsl_vector_free);
  for (std::size_t i = 0; i < v.size(); ++i) gsl_vector_set(out.get(), i, v[i]);
  return out;
}

struct SearchResult {
  std::vector<double> u;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

SearchResult simplex(Objective& obj, std::vector<double> u0, double step, double size_tol,
                     int max_iter) {
  const std::size_t k = u0.size();
  gsl_multimin_function fn{&gsl_f, k, &obj};
  auto x = make_vector(u0);
  auto steps = make_vector(std::vector<double>(k, step));
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, k),
      &gsl_multimin_fminimizer_free);
  if (gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), steps.get()) != GSL_SUCCESS) {
    throw NumericalError("simplex initialization failed");
  }
  SearchResult out;
  for (; out.iterations < max_iter; ++out.iterations) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), size_tol) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
  }
  for (std::size_t i = 0; i < k; ++i) out.u.push_back(gsl_vector_get(s->x, i));
  out.f = s->fval;
  return out;
}

SearchResult bfgs(Objective& obj, std::vector<double> u0, double grad_tol, int max_iter) {
  const std::size_t k = u0.size();
  gsl_multimin_function_fdf fn{&gsl_f, &gsl_df, &gsl_fdf, k, &obj};
  auto x = make_vector(u0);
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> s(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, k),
      &gsl_multimin_fdfminimizer_free);
  gsl_multimin_fdfminimizer_set(s.get(), &fn, x.get(), 1e-3, 0.1);
  SearchResult out;
  double last = s->f;
  for (; out.iterations < max_iter; ++out.iterations) {
    if (gsl_multimin_fdfminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(s->gradient, grad_tol) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
    if (std::abs(last - s->f) < 1e-16 * std::max(1.0, std::abs(s->f))) break;
    last = s->f;
  }
  for (std::size_t i = 0; i < k; ++i) out.u.push_back(gsl_vector_get(s->x, i));
  out.f = s->f;
  if (!out.converged) {
    out.converged = gsl_multimin_test_gradient(s->gradient, 10.0 * grad_tol) == GSL_SUCCESS;
  }
  return out;
}

}  // namespace

FitResult mle_fit(std::span<const double> rv, std::span<const double> returns, double r,
                  Variant variant, const FitOptions& opts) {
  require_aligned(rv, returns);
  gsl_set_error_handler_off();
  const LambdaEstimate lam = estimate_lambda(returns, rv, r);
  const std::vector<double> eps = filter_innovations(returns, rv, r, lam.lambda);

  ModelParams init;
  if (opts.init) {
    init = *opts.init;
    init.variant = variant;
    init.lambda = lam.lambda;
    init.r = r;
  } else {
    std::vector<double> gammas = {0.0};
    if (variant != Variant::HARG) gammas = {0.0, 25.0, 50.0, 100.0, 150.0, 200.0, 300.0};
    double best = -std::numeric_limits<double>::infinity();
    for (double g : gammas) {
      try {
        const ModelParams cand = ols_start(rv, eps, variant, g, r, lam.lambda);
        const double ll = loglik(cand, rv, eps, opts.likelihood);
        if (ll > best) {
          best = ll;
          init = cand;
        }
      } catch (const Error&) {
      }
    }
    if (!std::isfinite(best)) throw NumericalError("no feasible starting point for the likelihood");
  }
  init.validate();

  const Transform transform(init);
  Objective obj{&transform, init, rv, eps, opts.likelihood,
                static_cast<double>(rv.size() - kWarmUp)};
  std::vector<double> u = transform.to_u(init);
  if (obj(u.data()) >= Objective::kPenalty) {
    throw LikelihoodDomainError("likelihood undefined at the starting point", 0);
  }

  FitResult out;
  // Coarse simplex, gradient polish, then a tight simplex restart and a final
  // polish from wherever the first pass stopped.
  int budget = opts.max_iterations;
  auto take = [&budget](int cap) { return std::clamp(budget, 0, cap); };
  const double grad_tol = opts.loglik_tol * 1e3;
  const SearchResult nm = simplex(obj, u, 0.1, 1e-3, take(3000));
  budget -= nm.iterations;
  const SearchResult bf = bfgs(obj, nm.u, grad_tol, take(500));
  budget -= bf.iterations;
  const SearchResult& first = bf.f <= nm.f ? bf : nm;
  const SearchResult nm2 = simplex(obj, first.u, 0.01, opts.param_tol * 1e2, take(3000));
  budget -= nm2.iterations;
  const SearchResult bf2 = bfgs(obj, nm2.u, grad_tol, take(500));
  const SearchResult& best = bf2.f <= nm2.f ? bf2 : nm2;

  out.params = transform.from_u(init, best.u.data());
  out.iterations = nm.iterations + bf.iterations + nm2.iterations + bf2.iterations;
  out.converged = bf2.converged || (nm2.converged && std::abs(nm2.f - first.f) < 1e-9);
  out.loglik = loglik(out.params, rv, eps, opts.likelihood);
  out.n_obs = rv.size() - kWarmUp;
  out.persistence = stationarity_margin(out.params);
  out.lambda_std_error = lam.std_error;

  ModelParams se;
  se.variant = variant;
  for (Field f : {Field::Theta, Field::Delta, Field::D, Field::BetaD, Field::BetaW, Field::BetaM,
                  Field::AlphaD, Field::AlphaW, Field::AlphaM, Field::Gamma}) {
    field(se, f) = kNaN;
  }
  se.lambda = lam.std_error;
  se.r = kNaN;
  try {
    const Eigen::MatrixXd cov = sandwich_covariance(out.params, rv, eps, opts.likelihood);
    const auto fields = free_fields(variant);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const double v = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
      field(se, fields[i]) = v >= 0.0 ? std::sqrt(v) : kNaN;
    }
  } catch (const Error&) {
  }
  out.std_errors = se;
  return out;
}

double nu1_from_scale(const ModelParams& params, double scale) {
  const double y_star = (1.0 - scale) / params.theta;
  return 0.125 - 0.5 * params.lambda * params.lambda - y_star;
}

double scale_from_nu1(const ModelParams& params, double nu1) {
  const double y_star = -0.5 * params.lambda * params.lambda - nu1 + 0.125;
  return 1.0 - params.theta * y_star;
}

double calibrate_nu1(const ModelParams& params, double target_iv, int maturity_days,
                     const MarketState& state, const CalibrationConfig& cfg) {
  params.validate();
  if (!(target_iv > 0.0 && target_iv < 0.7)) {
    throw DomainError("target implied volatility must lie in (0, 0.7)");
  }
  // Under the map, persistence scales as 1/scale^2.
  const double unit = stationarity_margin(risk_neutral_map(params, nu1_from_scale(params, 1.0)));
  const double lo = std::sqrt(unit / cfg.persistence_cap);
  const double hi = cfg.max_scale;
  if (!(lo < hi)) throw CalibrationError("empty calibration bracket", kNaN, kNaN);

  auto iv_at = [&](double scale) {
    return model_atm_iv(params, nu1_from_scale(params, scale), maturity_days, state, cfg.cos);
  };
  const double iv_high = iv_at(lo);  // IV falls as the scale grows
  const double iv_low = iv_at(hi);
  if (!(target_iv >= iv_low && target_iv <= iv_high)) {
    throw CalibrationError("target implied volatility " + std::to_string(target_iv) +
                               " outside attainable range",
                           iv_low, iv_high);
  }
  auto g = [&](double scale) { return iv_at(scale) - target_iv; };
  const double tol = cfg.tolerance;
  auto stop = [tol](double a, double b) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
  };
  std::uintmax_t max_iter = 200;
  const auto root = boost::math::tools::toms748_solve(g, lo, hi, iv_high - target_iv,
                                                      iv_low - target_iv, stop, max_iter);
  return nu1_from_scale(params, 0.5 * (root.first + root.second));
}

}  // namespace lharg
