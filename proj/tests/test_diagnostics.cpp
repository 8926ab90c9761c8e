#include "semscale/diagnostics.hpp"
#include "semscale/error.hpp"
#include "semscale/io.hpp"
#include "test_support.hpp"

#include <boost/math/distributions/normal.hpp>
#include <doctest.h>

#include <random>

using namespace semscale;

namespace {

Eigen::MatrixXd load_draws(const std::string& name)
{
  const auto t = io::read_csv(testing::fixture("diagnostics/" + name + ".csv"));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = io::parse_double(t.rows[r][c]);
  return m;
}

Eigen::MatrixXd iid(std::uint64_t seed, Eigen::Index n, Eigen::Index chains, double shift = 0.0)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(shift, 1.0);
  Eigen::MatrixXd m(n, chains);
  for (auto& v : m.reshaped())
    v = z(rng);
  return m;
}

Eigen::MatrixXd ar1(std::uint64_t seed, Eigen::Index n, Eigen::Index chains, double rho)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(n, chains);
  for (Eigen::Index c = 0; c < chains; ++c) {
    m(0, c) = z(rng) / std::sqrt(1 - rho * rho);
    for (Eigen::Index t = 1; t < n; ++t)
      m(t, c) = rho * m(t - 1, c) + z(rng);
  }
  return m;
}

PosteriorDraws wrap(std::vector<Eigen::MatrixXd> per_chain)
{
  PosteriorDraws d;
  for (Eigen::Index p = 0; p < per_chain.front().cols(); ++p)
    d.names.push_back("p" + std::to_string(p));
  for (auto& m : per_chain) {
    d.draws.push_back(m);
    d.divergence_count.push_back(0);
    d.depth_saturation_count.push_back(0);
    d.warmup_divergence_count.push_back(0);
  }
  return d;
}

PosteriorDraws healthy(std::uint64_t seed)
{
  std::vector<Eigen::MatrixXd> chains;
  for (int c = 0; c < 4; ++c)
    chains.push_back(iid(seed + static_cast<std::uint64_t>(c), 1000, 3));
  return wrap(chains);
}

} // namespace

TEST_CASE("split_chains halves and drops the middle draw of odd chains")
{
  Eigen::MatrixXd m(5, 2);
  m << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50;
  const auto s = split_chains(m);
  REQUIRE(s.rows() == 2);
  REQUIRE(s.cols() == 4);
  CHECK(s(0, 0) == 1);
  CHECK(s(1, 1) == 5);
  CHECK(s(0, 3) == 40);
}

TEST_CASE("rank_normalize uses average ranks")
{
  Eigen::MatrixXd m(2, 2);
  m << 1, 1, 3, 2;
  const auto z = rank_normalize(m);
  const boost::math::normal n01;
  // ranks 1.5, 1.5, 4, 3 over S = 4
  CHECK(z(0, 0) == doctest::Approx(boost::math::quantile(n01, (1.5 - 0.375) / 4.25)));
  CHECK(z(0, 1) == z(0, 0));
  CHECK(z(1, 0) == doctest::Approx(boost::math::quantile(n01, (4 - 0.375) / 4.25)));
}

TEST_CASE("autocovariance agrees with the direct sum")
{
  const Eigen::VectorXd x = ar1(3, 257, 1, 0.6).col(0);
  const Eigen::VectorXd ac = autocovariance(x);
  const double mean = x.mean();
  const auto n = x.size();
  for (Eigen::Index lag : { 0, 1, 2, 7, 100, 256 }) {
    double s = 0.0;
    for (Eigen::Index t = 0; t + lag < n; ++t)
      s += (x(t) - mean) * (x(t + lag) - mean);
    CHECK(ac(lag) == doctest::Approx(s / static_cast<double>(n)).epsilon(1e-9));
  }
}

TEST_CASE("split R-hat and bulk ESS match the reference implementation")
{
  const auto ref = io::read_csv(testing::fixture("diagnostics/reference.csv"));
  REQUIRE(ref.rows.size() == 6);
  for (const auto& row : ref.rows) {
    INFO(row[0]);
    const auto d = load_draws(row[0]);
    CHECK(split_rhat(d).value() == doctest::Approx(io::parse_double(row[1])).epsilon(1e-9));
    CHECK(bulk_ess(d).value() == doctest::Approx(io::parse_double(row[2])).epsilon(1e-8));
  }
}

TEST_CASE("i.i.d. chains look converged")
{
  // The ESS estimate of 4000 i.i.d. draws has sd near 180, so single draws can leave
  // [3000, 4400]; require 95% coverage over replicates.
  int inside = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    const auto d = iid(1000 + static_cast<std::uint64_t>(r), 1000, 4);
    CHECK(split_rhat(d).value() <= 1.01);
    const double e = bulk_ess(d).value();
    inside += e >= 3000 && e <= 4400;
  }
  CHECK(inside >= 38);
}

TEST_CASE("separated chains are flagged")
{
  Eigen::MatrixXd d(1000, 2);
  d.col(0) = iid(1, 1000, 1);
  d.col(1) = iid(2, 1000, 1, 3.0);
  CHECK(split_rhat(d).value() > 1.5);
}

TEST_CASE("constant chains are undefined")
{
  Eigen::MatrixXd d(100, 2);
  d.col(0).setZero();
  d.col(1).setConstant(5.0);
  CHECK(!split_rhat(d));
  CHECK(!bulk_ess(Eigen::MatrixXd::Ones(100, 4)));
  CHECK_THROWS_AS(split_rhat(Eigen::MatrixXd::Zero(3, 2)), DataError);
  CHECK_THROWS_AS(split_rhat(Eigen::MatrixXd::Zero(10, 1)), DataError);
}

TEST_CASE("AR(1) ESS is near its analytic value")
{
  const double rho = 0.9;
  const auto d = ar1(8, 2000, 4, rho);
  const double expected = 8000.0 * (1 - rho) / (1 + rho);
  const double e = bulk_ess(d).value();
  CHECK(e >= expected / 2);
  CHECK(e <= expected * 2);
}

TEST_CASE("R-hat and ESS ignore monotone transforms and chain order")
{
  const auto d = ar1(9, 500, 4, 0.3);
  const Eigen::MatrixXd e = d.array().exp().matrix();
  CHECK(split_rhat(e).value() == doctest::Approx(split_rhat(d).value()).epsilon(1e-12));
  CHECK(bulk_ess(e).value() == doctest::Approx(bulk_ess(d).value()).epsilon(1e-12));
  Eigen::MatrixXd p(d.rows(), 4);
  p << d.col(2), d.col(0), d.col(3), d.col(1);
  CHECK(split_rhat(p).value() == doctest::Approx(split_rhat(d).value()).epsilon(1e-12));
  CHECK(bulk_ess(p).value() == doctest::Approx(bulk_ess(d).value()).epsilon(1e-12));
}

TEST_CASE("Raftery-Lewis")
{
  CHECK(raftery_nmin(0.025, 0.005, 0.95) == 3746);
  const boost::math::normal n01;
  const double z = boost::math::quantile(n01, 0.975);
  CHECK(raftery_nmin(0.025, 0.005, 0.95) == static_cast<long>(std::ceil(0.025 * 0.975 * (z / 0.005) * (z / 0.005))));

  const Eigen::VectorXd pilot = iid(11, 4000, 1).col(0);
  const auto r = raftery_lewis(pilot);
  CHECK(r.lower_bound == 3746);
  CHECK(std::abs(r.total - 3746) <= 375);
  CHECK(r.dependence_factor == doctest::Approx(static_cast<double>(r.total) / 3746.0));

  const Eigen::VectorXd sticky = ar1(11, 4000, 1, 0.95).col(0);
  CHECK(raftery_lewis(sticky).total > r.total);

  try {
    raftery_lewis(Eigen::VectorXd::Zero(10));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("3746") != std::string::npos);
  }
}

TEST_CASE("type 7 quantiles")
{
  const Eigen::VectorXd v = (Eigen::VectorXd(4) << 4, 1, 3, 2).finished();
  CHECK(quantile(v, 0.5) == 2.5);
  CHECK(quantile(v, 0.25) == 1.75);
  CHECK(quantile(v, 0.0) == 1);
  CHECK(quantile(v, 1.0) == 4);
}

TEST_CASE("report: healthy run passes")
{
  const auto rep = diagnostic_report(healthy(100));
  CHECK(rep.pass);
  CHECK(rep.reasons.empty());
  CHECK(rep.params.size() == 3);
  for (const auto& p : rep.params) {
    CHECK(*p.rhat <= 1.01);
    CHECK(*p.bulk_ess >= 400);
  }
  CHECK(rep.chains == 4);
  CHECK(rep.iterations == 1000);
}

TEST_CASE("report: injected divergences fail")
{
  auto d = healthy(200);
  d.divergence_count[2] = 3;
  const auto rep = diagnostic_report(d);
  CHECK(!rep.pass);
  CHECK(rep.divergences == 3);
  CHECK(std::find(rep.reasons.begin(), rep.reasons.end(), "divergences") != rep.reasons.end());
  d.divergence_count[2] = 0;
  d.depth_saturation_count[0] = 1;
  const auto rep2 = diagnostic_report(d);
  CHECK(std::find(rep2.reasons.begin(), rep2.reasons.end(), "depth_saturation") != rep2.reasons.end());
}

TEST_CASE("report: a stuck chain names the parameter")
{
  auto d = healthy(300);
  d.draws[1].col(2) = Eigen::VectorXd::Constant(1000, 4.0) + 0.01 * iid(5, 1000, 1);
  const auto rep = diagnostic_report(d);
  CHECK(!rep.pass);
  CHECK(rep.max_rhat_param == "p2");
  CHECK(*rep.max_rhat > 1.01);
}

TEST_CASE("report: antithetic chains cap ESS with a note")
{
  std::vector<Eigen::MatrixXd> chains;
  for (int c = 0; c < 4; ++c) {
    Eigen::MatrixXd m(1000, 1);
    const auto base = iid(static_cast<std::uint64_t>(c) + 7, 500, 1);
    for (Eigen::Index t = 0; t < 500; ++t) {
      m(2 * t, 0) = base(t, 0);
      m(2 * t + 1, 0) = -base(t, 0);
    }
    chains.push_back(m);
  }
  const auto rep = diagnostic_report(wrap(chains));
  CHECK(rep.params[0].ess_capped);
  CHECK(*rep.params[0].bulk_ess <= 1.5 * 4000);
  CHECK(!rep.notes.empty());
}

TEST_CASE("report outputs")
{
  auto d = healthy(400);
  const auto rep = diagnostic_report(d);
  const auto csv = report_to_csv(rep);
  CHECK(csv.rfind("parameter,rhat,ess,mean,sd,q2.5,q50,q97.5\n", 0) == 0);
  const auto trace = trace_to_csv(d, 100);
  const auto lines = std::count(trace.begin(), trace.end(), '\n');
  CHECK(lines == 1 + 4 * 100);
  CHECK(report_to_json(rep, DiagnosticThresholds{}).find("\"pass\"") != std::string::npos);
}
