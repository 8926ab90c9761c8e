#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace semscale::optim {

struct LbfgsOptions
{
  int max_iter = 2000;
  double grad_tol = 1e-6; // max-norm
  int history = 10;
  int max_line_search = 40;
  double c1 = 1e-4;
  double c2 = 0.9;
};

struct LbfgsResult
{
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd g;
  int iterations = 0;
  bool converged = false;
  std::string status;
};

namespace detail {

// Minimizer of the cubic through (a, fa, ga) and (b, fb, gb); NaN when it does not exist.
inline double cubic_min(double a, double fa, double ga, double b, double fb, double gb)
{
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  if (!(disc >= 0.0))
    return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = gb - ga + 2.0 * d2;
  if (denom == 0.0)
    return std::numeric_limits<double>::quiet_NaN();
  return b - (b - a) * (gb + d2 - d1) / denom;
}

struct LinePoint
{
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;
};

} // namespace detail

// Minimizes f with L-BFGS and a strong-Wolfe line search using safeguarded cubic interpolation.
// `fg(x, g)` returns f(x) and writes the gradient into g.
template <typename Objective>
LbfgsResult minimize_lbfgs(Objective&& fg, Eigen::VectorXd x0, const LbfgsOptions& opt = {})
{
  using detail::LinePoint;
  const Eigen::Index dim = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  res.g.resize(dim);
  res.f = fg(res.x, res.g);
  if (!std::isfinite(res.f) || !res.g.allFinite()) {
    res.status = "non-finite objective at start";
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd d(dim), x_new(dim), g_new(dim);

  auto eval = [&](double step, LinePoint& p) {
    x_new = res.x + step * d;
    p.step = step;
    p.f = fg(x_new, g_new);
    p.slope = g_new.dot(d);
    if (!std::isfinite(p.f) || !std::isfinite(p.slope)) {
      p.f = std::numeric_limits<double>::infinity();
      p.slope = std::numeric_limits<double>::quiet_NaN();
    }
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter;
    if (res.g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.converged = true;
      res.status = "gradient tolerance reached";
      return res;
    }

    // Two-loop recursion.
    d = -res.g;
    const std::size_t m = s_hist.size();
    std::vector<double> a(m);
    for (std::size_t i = m; i-- > 0;) {
      a[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= a[i] * y_hist[i];
    }
    double gamma = 1.0;
    if (m > 0)
      gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    else
      gamma = 1.0 / std::max(1.0, res.g.norm());
    d *= gamma;
    for (std::size_t i = 0; i < m; ++i) {
      double b = rho_hist[i] * y_hist[i].dot(d);
      d += (a[i] - b) * s_hist[i];
    }

    LinePoint p0{ 0.0, res.f, res.g.dot(d) };
    if (!(p0.slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -res.g / std::max(1.0, res.g.norm());
      p0.slope = res.g.dot(d);
    }

    // Strong Wolfe search.
    bool found = false;
    LinePoint prev = p0, cur, accepted;
    Eigen::VectorXd g_acc(dim);
    double step = 1.0;
    auto accept = [&](const LinePoint& p) {
      accepted = p;
      g_acc = g_new;
      found = true;
    };
    auto zoom = [&](LinePoint lo, LinePoint hi) {
      for (int z = 0; z < opt.max_line_search; ++z) {
        double t = detail::cubic_min(lo.step, lo.f, lo.slope, hi.step, hi.f, hi.slope);
        const double left = std::min(lo.step, hi.step), right = std::max(lo.step, hi.step);
        const double width = right - left;
        if (!std::isfinite(t) || t < left + 0.1 * width || t > right - 0.1 * width)
          t = 0.5 * (lo.step + hi.step);
        LinePoint pj;
        eval(t, pj);
        if (pj.f > p0.f + opt.c1 * t * p0.slope || pj.f >= lo.f) {
          hi = pj;
        } else {
          if (std::abs(pj.slope) <= -opt.c2 * p0.slope) {
            accept(pj);
            return;
          }
          if (pj.slope * (hi.step - lo.step) >= 0)
            hi = lo;
          lo = pj;
        }
        if (width <= 1e-16 * std::max(1.0, right))
          break;
      }
      // Settle for sufficient decrease when curvature cannot be met at this precision.
      if (lo.step > 0.0 && lo.f < p0.f) {
        eval(lo.step, lo);
        accept(lo);
      }
    };
    for (int ls = 0; ls < opt.max_line_search && !found; ++ls) {
      eval(step, cur);
      if (cur.f > p0.f + opt.c1 * step * p0.slope || (ls > 0 && cur.f >= prev.f)) {
        zoom(prev, cur);
        break;
      }
      if (std::abs(cur.slope) <= -opt.c2 * p0.slope) {
        accept(cur);
        break;
      }
      if (cur.slope >= 0) {
        zoom(cur, prev);
        break;
      }
      prev = cur;
      step *= 2.0;
    }

    if (!found) {
      if (!s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      // No representable decrease left; accept when the gradient is small relative to |f|.
      res.converged = res.g.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(res.f));
      res.status = res.converged ? "stalled at machine precision" : "line search failed";
      return res;
    }

    Eigen::VectorXd s = accepted.step * d;
    Eigen::VectorXd yv = g_acc - res.g;
    res.x += s;
    res.f = accepted.f;
    res.g = g_acc;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
  res.iterations = opt.max_iter;
  res.converged = res.g.lpNorm<Eigen::Infinity>() <= opt.grad_tol;
  res.status = res.converged ? "gradient tolerance reached" : "iteration limit";
  return res;
}

} // namespace semscale::optim
