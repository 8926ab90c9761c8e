#pragma once

// Binomial-logit two-parameter item response model for signed stance counts:
//
//   x_ij ~ Binomial(y_ij, p_ij),   p_ij = logit^-1(delta_j + alpha_j * theta_i)
//
// with independent priors on every delta_j, alpha_j and theta_i. The log-likelihood uses the
// standard binomial PMF C(y, x) p^x (1-p)^(y-x).

#include "semscale/count_matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace semscale {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class PriorFamily
{
  normal,
  cauchy
};

std::string_view to_string(PriorFamily f);
PriorFamily parse_prior_family(std::string_view s);

struct Prior
{
  PriorFamily family = PriorFamily::normal;
  double location = 0.0;
  double scale = 1.0;

  template <typename Scalar>
  Scalar log_density(Scalar v, Scalar location_override) const
  {
    using std::log;
    const Scalar z = (v - location_override) / scale;
    if (family == PriorFamily::normal)
      return Scalar(-0.5) * z * z - log(Scalar(scale)) - Scalar(0.5 * std::log(2.0 * std::numbers::pi));
    return -log(Scalar(std::numbers::pi * scale) * (Scalar(1) + z * z));
  }

  template <typename Scalar>
  Scalar log_density(Scalar v) const
  {
    return log_density(v, Scalar(location));
  }

  template <typename Scalar>
  Scalar d_log_density(Scalar v, Scalar location_override) const
  {
    const Scalar d = v - location_override;
    if (family == PriorFamily::normal)
      return -d / Scalar(scale * scale);
    return Scalar(-2) * d / (Scalar(scale * scale) + d * d);
  }

  template <typename Scalar>
  Scalar d_log_density(Scalar v) const
  {
    return d_log_density(v, Scalar(location));
  }

  // Largest attainable log density (at the mode).
  double max_log_density() const { return log_density(location); }
};

struct PriorSpec
{
  Prior delta;
  Prior alpha;
  Prior theta;
  // Per-author prior means for theta; overrides theta.location when set.
  std::optional<Eigen::VectorXd> theta_location;

  void validate(Eigen::Index n) const;
};

template <typename Scalar = double>
struct ItemParams
{
  Vec<Scalar> delta;
  Vec<Scalar> alpha;
};

template <typename Scalar = double>
struct ModelState
{
  ItemParams<Scalar> params;
  Vec<Scalar> theta;

  static ModelState zeros(Eigen::Index n, Eigen::Index k)
  {
    return { { Vec<Scalar>::Zero(k), Vec<Scalar>::Zero(k) }, Vec<Scalar>::Zero(n) };
  }
};

template <typename Scalar = double>
struct PosteriorGradient
{
  Vec<Scalar> d_delta;
  Vec<Scalar> d_alpha;
  Vec<Scalar> d_theta;
};

// Numeric view of a CountMatrix with the parameter-free log binomial coefficients cached.
class ScaleData
{
public:
  explicit ScaleData(const CountMatrix& matrix);
  ScaleData(Eigen::MatrixXd successes, Eigen::MatrixXd trials);

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index k() const { return x_.cols(); }
  const Eigen::MatrixXd& successes() const { return x_; }
  const Eigen::MatrixXd& trials() const { return y_; }
  const Eigen::MatrixXd& failures() const { return f_; }
  double log_binomial_sum() const { return log_binom_sum_; }

private:
  void init();

  Eigen::MatrixXd x_;
  Eigen::MatrixXd y_;
  Eigen::MatrixXd f_;
  double log_binom_sum_ = 0.0;
};

// Inside log terms p is kept in [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-12;

template <typename Scalar>
Scalar response_prob(Scalar delta, Scalar alpha, Scalar theta)
{
  using std::exp;
  const Scalar eta = delta + alpha * theta;
  if (eta >= Scalar(0))
    return Scalar(1) / (Scalar(1) + exp(-eta));
  const Scalar e = exp(eta);
  return e / (Scalar(1) + e);
}

namespace detail {

// log(logit^-1(eta)) without overflow.
template <typename Scalar>
Scalar log_inv_logit(Scalar eta)
{
  using std::exp;
  using std::log1p;
  if (eta >= Scalar(0))
    return -log1p(exp(-eta));
  return eta - log1p(exp(eta));
}

template <typename Scalar>
Scalar clamp_log_prob(Scalar lp)
{
  static const double lo = std::log(kProbFloor);
  static const double hi = std::log1p(-kProbFloor);
  if (lp < Scalar(lo))
    return Scalar(lo);
  if (lp > Scalar(hi))
    return Scalar(hi);
  return lp;
}

template <typename Scalar>
Mat<Scalar> linear_predictor(const ModelState<Scalar>& s)
{
  Mat<Scalar> eta = s.theta * s.params.alpha.transpose();
  eta.rowwise() += s.params.delta.transpose();
  return eta;
}

void check_dims(const ScaleData& data, Eigen::Index n, Eigen::Index k, Eigen::Index kd, Eigen::Index ka);

} // namespace detail

template <typename Scalar>
Scalar log_likelihood(const ScaleData& data, const ModelState<Scalar>& state)
{
  detail::check_dims(data, state.theta.size(), data.k(), state.params.delta.size(), state.params.alpha.size());
  const Mat<Scalar> eta = detail::linear_predictor(state);
  const auto& x = data.successes();
  const auto& f = data.failures();
  Scalar ll(data.log_binomial_sum());
  for (Eigen::Index j = 0; j < eta.cols(); ++j)
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
      const Scalar e = eta(i, j);
      if (x(i, j) > 0)
        ll += Scalar(x(i, j)) * detail::clamp_log_prob(detail::log_inv_logit(e));
      if (f(i, j) > 0)
        ll += Scalar(f(i, j)) * detail::clamp_log_prob(detail::log_inv_logit(Scalar(-e)));
    }
  return ll;
}

template <typename Scalar>
Scalar log_prior(const PriorSpec& priors, const ModelState<Scalar>& state)
{
  Scalar lp(0);
  for (Eigen::Index j = 0; j < state.params.delta.size(); ++j)
    lp += priors.delta.log_density(state.params.delta(j));
  for (Eigen::Index j = 0; j < state.params.alpha.size(); ++j)
    lp += priors.alpha.log_density(state.params.alpha(j));
  for (Eigen::Index i = 0; i < state.theta.size(); ++i) {
    const Scalar loc(priors.theta_location ? (*priors.theta_location)(i) : priors.theta.location);
    lp += priors.theta.log_density(state.theta(i), loc);
  }
  return lp;
}

template <typename Scalar>
Scalar log_posterior(const ScaleData& data, const PriorSpec& priors, const ModelState<Scalar>& state)
{
  return log_likelihood(data, state) + log_prior(priors, state);
}

// Analytic gradient. The likelihood part uses the unclamped form x_ij - y_ij p_ij.
template <typename Scalar>
PosteriorGradient<Scalar> grad_log_posterior(const ScaleData& data, const PriorSpec& priors,
                                             const ModelState<Scalar>& state)
{
  detail::check_dims(data, state.theta.size(), data.k(), state.params.delta.size(), state.params.alpha.size());
  const Mat<Scalar> eta = detail::linear_predictor(state);
  Mat<Scalar> resid(eta.rows(), eta.cols());
  const auto& x = data.successes();
  const auto& y = data.trials();
  for (Eigen::Index j = 0; j < eta.cols(); ++j)
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
      const Scalar e = eta(i, j);
      using std::exp;
      const Scalar p = e >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-e)) : exp(e) / (Scalar(1) + exp(e));
      resid(i, j) = Scalar(x(i, j)) - Scalar(y(i, j)) * p;
    }
  PosteriorGradient<Scalar> g;
  g.d_delta = resid.colwise().sum().transpose();
  g.d_alpha = resid.transpose() * state.theta;
  g.d_theta = resid * state.params.alpha;
  for (Eigen::Index j = 0; j < g.d_delta.size(); ++j) {
    g.d_delta(j) += priors.delta.d_log_density(state.params.delta(j));
    g.d_alpha(j) += priors.alpha.d_log_density(state.params.alpha(j));
  }
  for (Eigen::Index i = 0; i < g.d_theta.size(); ++i) {
    const Scalar loc(priors.theta_location ? (*priors.theta_location)(i) : priors.theta.location);
    g.d_theta(i) += priors.theta.d_log_density(state.theta(i), loc);
  }
  return g;
}

// +1 where an author's conservative total strictly exceeds the liberal total, -1 otherwise.
Eigen::VectorXd initialize_theta(const CountMatrix& matrix);

// Flat parameter layout shared with the sampler: (delta_1..delta_k, alpha_1..alpha_k, theta_1..theta_n).
Eigen::VectorXd pack(const ModelState<double>& state);
ModelState<double> unpack(const Eigen::VectorXd& flat, Eigen::Index n, Eigen::Index k);
Eigen::VectorXd pack(const PosteriorGradient<double>& grad);
std::vector<std::string> parameter_names(const CountMatrix& matrix);

// log posterior and gradient on the flat layout, suitable for optimizers and samplers.
class ScaleLogDensity
{
public:
  ScaleLogDensity(const CountMatrix& matrix, PriorSpec priors);

  Eigen::Index dimension() const { return 2 * data_.k() + data_.n(); }
  Eigen::Index n() const { return data_.n(); }
  Eigen::Index k() const { return data_.k(); }
  const ScaleData& data() const { return data_; }
  const PriorSpec& priors() const { return priors_; }

  double operator()(const Eigen::VectorXd& flat, Eigen::VectorXd& grad) const;

private:
  ScaleData data_;
  PriorSpec priors_;
};

struct OptimConfig
{
  int max_iter = 2000;
  double tol = 1e-6;   // gradient max-norm
  int history = 10;
};

struct MapResult
{
  ModelState<double> state;
  double log_posterior = 0.0;
  double grad_max_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
};

// Maximizes the log posterior with L-BFGS from the signed theta initialization and zero item
// parameters. Non-convergence is reported in the result, not thrown.
MapResult fit_map(const CountMatrix& data, const PriorSpec& priors, const OptimConfig& config = {});
MapResult fit_map(const CountMatrix& data, const PriorSpec& priors, const OptimConfig& config,
                  const ModelState<double>& start);

} // namespace semscale
