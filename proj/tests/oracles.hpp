#pragma once

// Reference computations written independently of the library, shared by the unit tests and
// the acceptance binary.

#include "semscale/count_matrix.hpp"
#include "semscale/scale_model.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace oracle {

// Random valid count matrix with column pairs g<j>/lib, g<j>/con (k may be odd).
inline semscale::CountMatrix random_count_matrix(std::mt19937_64& rng, int n, int k, int max_docs)
{
  semscale::CountMatrix m;
  std::uniform_int_distribution<int> docs(1, max_docs);
  m.x.resize(n, k);
  m.y.resize(n);
  for (int i = 0; i < n; ++i) {
    m.author_ids.push_back("a" + std::to_string(100 + i));
    m.y(i) = docs(rng);
    for (int j = 0; j < k; ++j)
      m.x(i, j) = std::uniform_int_distribution<int>(0, m.y(i))(rng);
  }
  for (int j = 0; j < k; ++j)
    m.column_ids.push_back("g" + std::to_string(j / 2) + (j % 2 ? "/con" : "/lib"));
  return m;
}

inline semscale::ModelState<double> random_state(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k, double sd)
{
  std::normal_distribution<double> z(0.0, sd);
  auto s = semscale::ModelState<double>::zeros(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    s.params.delta(j) = z(rng);
    s.params.alpha(j) = z(rng);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    s.theta(i) = z(rng);
  return s;
}

// Sum over cells of log Binomial(x | y, p) with p = 1 / (1 + exp(-(delta + alpha theta))).
inline double binomial_pmf_loglik(const Eigen::MatrixXi& x, const Eigen::MatrixXi& trials,
                                  const semscale::ModelState<double>& s)
{
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double eta = s.params.delta(j) + s.params.alpha(j) * s.theta(i);
      const double p = 1.0 / (1.0 + std::exp(-eta));
      boost::math::binomial_distribution<double> b(trials(i, j), p);
      total += std::log(boost::math::pdf(b, x(i, j)));
    }
  return total;
}

// Central differences of the log posterior evaluated in long double.
inline Eigen::VectorXd finite_difference_gradient(const semscale::CountMatrix& m, const semscale::PriorSpec& priors,
                                                  const Eigen::VectorXd& flat, double h = 1e-5)
{
  const semscale::ScaleData data(m);
  const Eigen::Index n = m.n(), k = m.k();
  auto eval = [&](const Eigen::VectorXd& v) {
    semscale::ModelState<long double> s;
    s.params.delta = v.head(k).cast<long double>();
    s.params.alpha = v.segment(k, k).cast<long double>();
    s.theta = v.tail(n).cast<long double>();
    return semscale::log_posterior(data, priors, s);
  };
  Eigen::VectorXd g(flat.size());
  for (Eigen::Index d = 0; d < flat.size(); ++d) {
    Eigen::VectorXd up = flat, down = flat;
    up(d) += h;
    down(d) -= h;
    g(d) = static_cast<double>((eval(up) - eval(down)) / static_cast<long double>(up(d) - down(d)));
  }
  return g;
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  return (da * db).sum() / std::sqrt((da * da).sum() * (db * db).sum());
}

// One-sample Kolmogorov-Smirnov test against N(0, 1); asymptotic p-value.
inline double ks_standard_normal_pvalue(Eigen::VectorXd v)
{
  std::sort(v.data(), v.data() + v.size());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double f = 0.5 * std::erfc(-v(i) / std::sqrt(2.0));
    d = std::max({ d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n });
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

} // namespace oracle
