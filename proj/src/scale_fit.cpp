#include "semscale/scale_model.hpp"

#include "semscale/error.hpp"
#include "semscale/optimize.hpp"

#include <cmath>

namespace semscale {

std::string_view to_string(PriorFamily f)
{
  return f == PriorFamily::normal ? "normal" : "cauchy";
}

PriorFamily parse_prior_family(std::string_view s)
{
  if (s == "normal")
    return PriorFamily::normal;
  if (s == "cauchy")
    return PriorFamily::cauchy;
  throw ConfigError("unknown prior family '" + std::string(s) + "'");
}

void PriorSpec::validate(Eigen::Index n) const
{
  for (const Prior* p : { &delta, &alpha, &theta })
    if (!(p->scale > 0.0) || !std::isfinite(p->location))
      throw ConfigError("prior scale must be positive and location finite");
  if (theta_location && theta_location->size() != n)
    throw ConfigError("theta prior locations do not match author count");
}

ScaleData::ScaleData(const CountMatrix& matrix)
{
  matrix.validate();
  x_ = matrix.x.cast<double>();
  y_ = matrix.trials().cast<double>();
  init();
}

ScaleData::ScaleData(Eigen::MatrixXd successes, Eigen::MatrixXd trials)
  : x_(std::move(successes)), y_(std::move(trials))
{
  if (x_.rows() != y_.rows() || x_.cols() != y_.cols())
    throw DataError("successes and trials differ in shape");
  init();
}

void ScaleData::init()
{
  for (Eigen::Index j = 0; j < x_.cols(); ++j)
    for (Eigen::Index i = 0; i < x_.rows(); ++i)
      if (x_(i, j) < 0 || x_(i, j) > y_(i, j))
        throw DataError("count " + std::to_string(x_(i, j)) + " outside [0, " + std::to_string(y_(i, j)) +
                        "] at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  f_ = y_ - x_;
  log_binom_sum_ = 0.0;
  for (Eigen::Index j = 0; j < x_.cols(); ++j)
    for (Eigen::Index i = 0; i < x_.rows(); ++i)
      log_binom_sum_ += std::lgamma(y_(i, j) + 1.0) - std::lgamma(x_(i, j) + 1.0) - std::lgamma(f_(i, j) + 1.0);
}

namespace detail {

void check_dims(const ScaleData& data, Eigen::Index n, Eigen::Index k, Eigen::Index kd, Eigen::Index ka)
{
  if (n != data.n() || k != data.k() || kd != data.k() || ka != data.k())
    throw DataError("model state dimensions do not match the data");
}

} // namespace detail

Eigen::VectorXd initialize_theta(const CountMatrix& matrix)
{
  const Eigen::VectorXi con = matrix.conservative_totals();
  const Eigen::VectorXi lib = matrix.liberal_totals();
  Eigen::VectorXd theta(matrix.n());
  for (Eigen::Index i = 0; i < matrix.n(); ++i)
    theta(i) = con(i) > lib(i) ? 1.0 : -1.0;
  return theta;
}

Eigen::VectorXd pack(const ModelState<double>& s)
{
  const Eigen::Index k = s.params.delta.size();
  Eigen::VectorXd flat(2 * k + s.theta.size());
  flat << s.params.delta, s.params.alpha, s.theta;
  return flat;
}

ModelState<double> unpack(const Eigen::VectorXd& flat, Eigen::Index n, Eigen::Index k)
{
  if (flat.size() != 2 * k + n)
    throw DataError("flat parameter vector has wrong length");
  return { { flat.head(k), flat.segment(k, k) }, flat.tail(n) };
}

Eigen::VectorXd pack(const PosteriorGradient<double>& g)
{
  Eigen::VectorXd flat(g.d_delta.size() + g.d_alpha.size() + g.d_theta.size());
  flat << g.d_delta, g.d_alpha, g.d_theta;
  return flat;
}

std::vector<std::string> parameter_names(const CountMatrix& m)
{
  std::vector<std::string> names;
  for (const auto& c : m.column_ids)
    names.push_back("delta[" + c + "]");
  for (const auto& c : m.column_ids)
    names.push_back("alpha[" + c + "]");
  for (const auto& a : m.author_ids)
    names.push_back("theta[" + a + "]");
  return names;
}

ScaleLogDensity::ScaleLogDensity(const CountMatrix& matrix, PriorSpec priors)
  : data_(matrix), priors_(std::move(priors))
{
  priors_.validate(data_.n());
}

double ScaleLogDensity::operator()(const Eigen::VectorXd& flat, Eigen::VectorXd& grad) const
{
  const auto state = unpack(flat, data_.n(), data_.k());
  grad = pack(grad_log_posterior(data_, priors_, state));
  return log_posterior(data_, priors_, state);
}

MapResult fit_map(const CountMatrix& data, const PriorSpec& priors, const OptimConfig& config)
{
  auto start = ModelState<double>::zeros(data.n(), data.k());
  start.theta = initialize_theta(data);
  return fit_map(data, priors, config, start);
}

MapResult fit_map(const CountMatrix& data, const PriorSpec& priors, const OptimConfig& config,
                  const ModelState<double>& start)
{
  if (config.max_iter <= 0)
    throw ConfigError("max_iter must be positive");
  ScaleLogDensity target(data, priors);
  optim::LbfgsOptions opt;
  opt.max_iter = config.max_iter;
  opt.grad_tol = config.tol;
  opt.history = config.history;
  auto neg = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    double lp = target(v, g);
    g = -g;
    return -lp;
  };
  auto r = optim::minimize_lbfgs(neg, pack(start), opt);
  MapResult out;
  out.state = unpack(r.x, data.n(), data.k());
  out.log_posterior = -r.f;
  out.grad_max_norm = r.g.lpNorm<Eigen::Infinity>();
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.status = r.status;
  return out;
}

} // namespace semscale
