#include "semscale/error.hpp"
#include "semscale/scale_model.hpp"
#include "semscale/synth.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace semscale;

namespace {

CountMatrix tiny(int x, int y)
{
  CountMatrix m;
  m.author_ids = { "a" };
  m.column_ids = { "g/con" };
  m.x = Eigen::MatrixXi::Constant(1, 1, x);
  m.y = Eigen::VectorXi::Constant(1, y);
  return m;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

} // namespace

TEST_CASE("response_prob")
{
  CHECK(response_prob(0.0, 1.0, 0.0) == 0.5);
  CHECK(response_prob(1.0, 0.0, 7.3) == doctest::Approx(0.7310585786).epsilon(1e-10));
  CHECK(response_prob(0.0, 1.0, -40.0) > 0.0);
  CHECK(response_prob(0.0, 1.0, 800.0) == 1.0);
  CHECK(response_prob(0.0, 1.0, -800.0) >= 0.0);
  double prev = 0.0;
  for (double t = -10; t <= 10; t += 0.25) {
    const double p = response_prob(0.3, 0.7, t);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("log_likelihood: hand-evaluated cell")
{
  const ScaleData data(tiny(1, 2));
  auto s = ModelState<double>::zeros(1, 1);
  s.params.alpha(0) = 1.0;
  CHECK(log_likelihood(data, s) == doctest::Approx(-0.6931471806).epsilon(1e-10));
}

TEST_CASE("log_likelihood: degenerate data stays finite")
{
  CountMatrix m = tiny(0, 5);
  const ScaleData data(m);
  auto s = ModelState<double>::zeros(1, 1);
  s.params.delta(0) = 80.0;
  CHECK(std::isfinite(log_likelihood(data, s)));
  s.params.delta(0) = -800.0;
  CHECK(log_likelihood(data, s) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("log_likelihood: x > y is a data error")
{
  CHECK_THROWS_AS(ScaleData(tiny(3, 2)), DataError);
  CHECK_THROWS_AS(ScaleData(Eigen::MatrixXd::Constant(2, 2, 1), Eigen::MatrixXd::Constant(2, 3, 1)), DataError);
}

TEST_CASE("log_likelihood matches the binomial pmf oracle")
{
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 20);
    const int k = 1 + static_cast<int>(rng() % (100 / n > 10 ? 10 : 100 / n));
    const auto m = oracle::random_count_matrix(rng, n, k, 40);
    const auto s = oracle::random_state(rng, n, k, 1.0);
    const double ours = log_likelihood(ScaleData(m), s);
    const double ref = oracle::binomial_pmf_loglik(m.x, m.trials(), s);
    CHECK(std::abs(ours - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
  // 5 x 4 example
  std::mt19937_64 r2(54);
  const auto m = oracle::random_count_matrix(r2, 5, 4, 12);
  const auto s = oracle::random_state(r2, 5, 4, 1.0);
  CHECK(log_likelihood(ScaleData(m), s) ==
        doctest::Approx(oracle::binomial_pmf_loglik(m.x, m.trials(), s)).epsilon(1e-12));
}

TEST_CASE("log_posterior: standard normal priors at zero")
{
  std::mt19937_64 rng(9);
  const auto m = oracle::random_count_matrix(rng, 4, 3, 6);
  const ScaleData data(m);
  const auto s = ModelState<double>::zeros(4, 3);
  const double lphi0 = -0.9189385332;
  CHECK(log_posterior(data, PriorSpec{}, s) ==
        doctest::Approx(log_likelihood(data, s) + (4 + 2 * 3) * lphi0).epsilon(1e-10));
}

TEST_CASE("log_posterior: vague priors and the density bound")
{
  std::mt19937_64 rng(10);
  const auto m = oracle::random_count_matrix(rng, 6, 4, 10);
  const ScaleData data(m);
  PriorSpec vague;
  vague.delta.scale = vague.alpha.scale = vague.theta.scale = 1e8;
  const auto s1 = oracle::random_state(rng, 6, 4, 1.0);
  const auto s2 = oracle::random_state(rng, 6, 4, 1.0);
  const double c1 = log_posterior(data, vague, s1) - log_likelihood(data, s1);
  const double c2 = log_posterior(data, vague, s2) - log_likelihood(data, s2);
  CHECK(c1 == doctest::Approx(c2).epsilon(1e-12));

  for (PriorFamily fam : { PriorFamily::normal, PriorFamily::cauchy }) {
    PriorSpec p;
    p.delta.family = p.alpha.family = p.theta.family = fam;
    const double bound = 4 * p.delta.max_log_density() + 4 * p.alpha.max_log_density() + 6 * p.theta.max_log_density();
    for (int rep = 0; rep < 20; ++rep) {
      const auto s = oracle::random_state(rng, 6, 4, 2.0);
      CHECK(log_posterior(data, p, s) <= log_likelihood(data, s) + bound + 1e-12);
    }
  }
}

TEST_CASE("reflection leaves the log posterior unchanged")
{
  std::mt19937_64 rng(12);
  const auto m = oracle::random_count_matrix(rng, 15, 6, 30);
  const ScaleData data(m);
  for (PriorFamily fam : { PriorFamily::normal, PriorFamily::cauchy }) {
    PriorSpec p;
    p.delta.family = p.alpha.family = p.theta.family = fam;
    auto s = oracle::random_state(rng, 15, 6, 1.0);
    const double a = log_posterior(data, p, s);
    s.theta = -s.theta;
    s.params.alpha = -s.params.alpha;
    CHECK(log_posterior(data, p, s) == doctest::Approx(a).epsilon(1e-14));
  }
}

TEST_CASE("gradient matches finite differences across prior scales")
{
  std::mt19937_64 rng(3);
  for (double scale : { 0.1, 1.0, 10.0 })
    for (PriorFamily fam : { PriorFamily::normal, PriorFamily::cauchy })
      for (int rep = 0; rep < 4; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 29);
        const int k = 1 + static_cast<int>(rng() % 10);
        const auto m = oracle::random_count_matrix(rng, n, k, 50);
        PriorSpec p;
        p.delta.family = p.alpha.family = p.theta.family = fam;
        p.delta.scale = p.alpha.scale = p.theta.scale = scale;
        p.theta.location = 0.5;
        const auto s = oracle::random_state(rng, n, k, std::min(scale, 1.5));
        const Eigen::VectorXd flat = pack(s);
        const Eigen::VectorXd g = pack(grad_log_posterior(ScaleData(m), p, s));
        CHECK(rel_err(g, oracle::finite_difference_gradient(m, p, flat)) <= 1e-6);
      }
}

TEST_CASE("gradient: theta with zero discrimination is the prior term")
{
  std::mt19937_64 rng(4);
  const auto m = oracle::random_count_matrix(rng, 6, 4, 10);
  auto s = oracle::random_state(rng, 6, 4, 1.0);
  s.params.alpha.setZero();
  const auto g = grad_log_posterior(ScaleData(m), PriorSpec{}, s);
  CHECK(g.d_theta == -s.theta);
}

TEST_CASE("gradient vanishes at a saturated fit")
{
  const auto m = tiny(3, 10);
  PriorSpec vague;
  vague.delta.scale = vague.alpha.scale = vague.theta.scale = 1e8;
  auto s = ModelState<double>::zeros(1, 1);
  s.params.delta(0) = std::log(0.3 / 0.7);
  s.params.alpha(0) = 0.4;
  const auto g = grad_log_posterior(ScaleData(m), vague, s);
  CHECK(std::abs(g.d_delta(0)) < 1e-12);
  CHECK(std::abs(g.d_alpha(0)) < 1e-12);
  CHECK(std::abs(g.d_theta(0)) < 1e-12);
}

TEST_CASE("ScaleLogDensity agrees with the block functions")
{
  std::mt19937_64 rng(6);
  const auto m = oracle::random_count_matrix(rng, 7, 4, 9);
  ScaleLogDensity f(m, PriorSpec{});
  const auto s = oracle::random_state(rng, 7, 4, 1.0);
  Eigen::VectorXd g;
  const double v = f(pack(s), g);
  CHECK(v == log_posterior(ScaleData(m), PriorSpec{}, s));
  CHECK(g == pack(grad_log_posterior(ScaleData(m), PriorSpec{}, s)));
  CHECK(f.dimension() == 15);
  const auto back = unpack(pack(s), 7, 4);
  CHECK(back.theta == s.theta);
  CHECK(back.params.alpha == s.params.alpha);
  CHECK_THROWS_AS(unpack(Eigen::VectorXd::Zero(3), 7, 4), DataError);
  const auto names = parameter_names(m);
  CHECK(names.front() == "delta[g0/lib]");
  CHECK(names[4] == "alpha[g0/lib]");
  CHECK(names.back() == "theta[a106]");
}

TEST_CASE("initialize_theta uses the signed totals")
{
  CountMatrix m;
  m.author_ids = { "a", "b", "c" };
  m.column_ids = { "g/lib", "g/con" };
  m.x.resize(3, 2);
  m.x << 3, 10, 0, 0, 4, 4;
  m.y = Eigen::VectorXi::Constant(3, 20);
  const Eigen::VectorXd t = initialize_theta(m);
  CHECK(t(0) == 1.0);
  CHECK(t(1) == -1.0);
  CHECK(t(2) == -1.0);
}

TEST_CASE("fit_map recovers synthetic ideal points")
{
  SynthConfig cfg;
  cfg.n_authors = 200;
  cfg.n_items = 5;
  cfg.seed = 77;
  const auto truth = generate(cfg);
  const auto r = fit_map(truth.matrix, PriorSpec{});
  CHECK(r.converged);
  CHECK(r.grad_max_norm <= 1e-6 * std::max(1.0, std::abs(r.log_posterior)));
  CHECK(oracle::pearson(r.state.theta, truth.theta_true) >= 0.9);
}

TEST_CASE("fit_map: exchangeable authors get equal estimates")
{
  CountMatrix m;
  m.author_ids = { "a", "b", "c", "d" };
  m.column_ids = { "g/lib", "g/con", "h/lib", "h/con" };
  m.x = Eigen::MatrixXi(4, 4);
  m.x.rowwise() = Eigen::RowVector4i(2, 5, 1, 3);
  m.y = Eigen::VectorXi::Constant(4, 12);
  const auto r = fit_map(m, PriorSpec{});
  CHECK(r.converged);
  CHECK(r.state.theta.maxCoeff() - r.state.theta.minCoeff() < 1e-6);
}

TEST_CASE("fit_map: negated initialization reflects the solution")
{
  SynthConfig cfg;
  cfg.n_authors = 120;
  cfg.n_items = 4;
  cfg.seed = 78;
  const auto truth = generate(cfg);
  const auto a = fit_map(truth.matrix, PriorSpec{});
  auto start = ModelState<double>::zeros(truth.matrix.n(), truth.matrix.k());
  start.theta = -initialize_theta(truth.matrix);
  const auto b = fit_map(truth.matrix, PriorSpec{}, OptimConfig{}, start);
  CHECK(oracle::pearson(a.state.theta, b.state.theta) <= -0.99);
  CHECK(oracle::pearson(a.state.params.alpha, b.state.params.alpha) <= -0.99);
  CHECK(std::abs(a.log_posterior - b.log_posterior) <= 1e-6 * std::max(1.0, std::abs(a.log_posterior)));
}

TEST_CASE("fit_map reports non-convergence instead of throwing")
{
  std::mt19937_64 rng(1);
  const auto m = oracle::random_count_matrix(rng, 10, 4, 20);
  OptimConfig cfg;
  cfg.max_iter = 2;
  const auto r = fit_map(m, PriorSpec{}, cfg);
  CHECK(!r.converged);
  CHECK(!r.status.empty());
}

TEST_CASE("prior spec validation")
{
  PriorSpec p;
  p.theta.scale = 0.0;
  CHECK_THROWS_AS(p.validate(3), ConfigError);
  PriorSpec q;
  q.theta_location = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(q.validate(3), ConfigError);
  CHECK(parse_prior_family("cauchy") == PriorFamily::cauchy);
  CHECK_THROWS_AS(parse_prior_family("laplace"), ConfigError);
}
