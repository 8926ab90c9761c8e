#include "semscale/diagnostics.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <array>
#include <cmath>
#include <numeric>

namespace semscale {

namespace {

double normal_quantile(double p)
{
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

bool is_constant(const Eigen::MatrixXd& x)
{
  return x.size() == 0 || (x.maxCoeff() - x.minCoeff()) <= 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff());
}

double sample_var(const Eigen::VectorXd& v)
{
  const double m = v.mean();
  return (v.array() - m).square().sum() / (static_cast<double>(v.size()) - 1.0);
}

// Every split half-chain is constant: no within-chain variation to compare against.
bool no_within_variation(const Eigen::MatrixXd& split)
{
  for (Eigen::Index c = 0; c < split.cols(); ++c)
    if (!is_constant(split.col(c)))
      return false;
  return true;
}

void check_shape(const Eigen::MatrixXd& draws)
{
  if (draws.cols() < 2 || draws.rows() < 4)
    throw DataError("diagnostics need at least 2 chains and 4 iterations");
}

} // namespace

Eigen::MatrixXd split_chains(const Eigen::MatrixXd& draws)
{
  const Eigen::Index n = draws.rows();
  const Eigen::Index half = n / 2;
  Eigen::MatrixXd out(half, 2 * draws.cols());
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    out.col(2 * c) = draws.col(c).head(half);
    out.col(2 * c + 1) = draws.col(c).tail(half);
  }
  return out;
}

Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& draws)
{
  const Eigen::Index s = draws.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  const double* v = draws.data();
  std::stable_sort(order.begin(), order.end(), [v](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
  Eigen::MatrixXd out(draws.rows(), draws.cols());
  double* o = out.data();
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
      ++j;
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    const double z = normal_quantile((rank - 0.375) / (static_cast<double>(s) + 0.25));
    for (std::size_t t = i; t <= j; ++t)
      o[order[t]] = z;
    i = j + 1;
  }
  return out;
}

Eigen::VectorXd autocovariance(const Eigen::VectorXd& x)
{
  const Eigen::Index n = x.size();
  Eigen::Index m = 1;
  while (m < 2 * n)
    m <<= 1;
  std::vector<double> padded(static_cast<std::size_t>(m), 0.0);
  const double mean = x.mean();
  for (Eigen::Index i = 0; i < n; ++i)
    padded[static_cast<std::size_t>(i)] = x(i) - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq)
    f = std::norm(f);
  std::vector<double> back;
  fft.inv(back, freq);
  Eigen::VectorXd ac(n);
  for (Eigen::Index i = 0; i < n; ++i)
    ac(i) = back[static_cast<std::size_t>(i)] / static_cast<double>(n);
  return ac;
}

std::optional<double> rhat_basic(const Eigen::MatrixXd& chains)
{
  const Eigen::Index n = chains.rows(), m = chains.cols();
  if (n < 2 || m < 1 || !chains.allFinite())
    return std::nullopt;
  Eigen::VectorXd means = chains.colwise().mean().transpose();
  Eigen::VectorXd vars(m);
  for (Eigen::Index c = 0; c < m; ++c)
    vars(c) = sample_var(chains.col(c));
  const double within = vars.mean();
  if (!(within > 0.0) || is_constant(chains))
    return std::nullopt;
  const double between = m > 1 ? static_cast<double>(n) * sample_var(means) : 0.0;
  return std::sqrt((between / within + static_cast<double>(n) - 1.0) / static_cast<double>(n));
}

std::optional<double> ess_basic(const Eigen::MatrixXd& chains)
{
  const Eigen::Index n = chains.rows(), m = chains.cols();
  if (n < 3 || !chains.allFinite() || is_constant(chains))
    return std::nullopt;
  Eigen::MatrixXd acov(n, m);
  for (Eigen::Index c = 0; c < m; ++c)
    acov.col(c) = autocovariance(chains.col(c));
  const double dn = static_cast<double>(n);
  Eigen::VectorXd mean_acov = acov.rowwise().mean();
  const double mean_var = mean_acov(0) * dn / (dn - 1.0);
  double var_plus = mean_var * (dn - 1.0) / dn;
  if (m > 1)
    var_plus += sample_var(chains.colwise().mean().transpose());
  if (!(var_plus > 0.0))
    return std::nullopt;

  auto rho_at = [&](Eigen::Index t) { return 1.0 - (mean_var - mean_acov(t)) / var_plus; };
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
  Eigen::Index t = 0;
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho(0) = rho_even;
  rho(1) = rho_odd;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = rho_at(t);
    rho_odd = rho_at(t + 1);
    if (rho_even + rho_odd >= 0.0) {
      rho(t) = rho_even;
      rho(t + 1) = rho_odd;
    }
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0.0)
    rho(max_t) = rho_even;

  // initial monotone sequence
  t = 0;
  while (t <= max_t - 4) {
    t += 2;
    if (rho(t) + rho(t + 1) > rho(t - 2) + rho(t - 1)) {
      rho(t) = 0.5 * (rho(t - 2) + rho(t - 1));
      rho(t + 1) = rho(t);
    }
  }
  const double total = dn * static_cast<double>(m);
  double tau = -1.0 + 2.0 * rho.head(max_t).sum() + rho(max_t);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

std::optional<double> split_rhat(const Eigen::MatrixXd& draws)
{
  check_shape(draws);
  const Eigen::MatrixXd split = split_chains(draws);
  if (no_within_variation(split))
    return std::nullopt;
  return rhat_basic(rank_normalize(split));
}

std::optional<double> bulk_ess(const Eigen::MatrixXd& draws)
{
  check_shape(draws);
  const Eigen::MatrixXd split = split_chains(draws);
  if (no_within_variation(split))
    return std::nullopt;
  return ess_basic(rank_normalize(split));
}

double quantile(Eigen::VectorXd values, double p)
{
  const Eigen::Index n = values.size();
  if (n == 0)
    throw DataError("quantile of empty sample");
  std::sort(values.data(), values.data() + n);
  const double h = (static_cast<double>(n) - 1.0) * p;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  return values(lo) + (h - static_cast<double>(lo)) * (values(hi) - values(lo));
}

long raftery_nmin(double q, double r, double s)
{
  const double phi = normal_quantile(0.5 * (1.0 + s));
  return static_cast<long>(std::ceil(std::pow(phi * std::sqrt(q * (1.0 - q)) / r, 2)));
}

RafteryLewis raftery_lewis(const Eigen::VectorXd& pilot, double q, double r, double s, double eps)
{
  if (!(q > 0.0 && q < 1.0) || !(r > 0.0) || !(s > 0.0 && s < 1.0))
    throw ConfigError("raftery_lewis needs 0 < q < 1, r > 0, 0 < s < 1");
  const long nmin = raftery_nmin(q, r, s);
  const long n = static_cast<long>(pilot.size());
  if (n < nmin)
    throw DataError("pilot run of " + std::to_string(n) + " iterations is too short; at least " +
                    std::to_string(nmin) + " are required");
  const double cut = quantile(pilot, q);
  std::vector<int> dichot(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    dichot[static_cast<std::size_t>(i)] = pilot(i) <= cut ? 1 : 0;

  // Smallest thinning at which a first-order chain is preferred to second order by BIC.
  long kthin = 0;
  std::vector<int> thinned;
  for (double bic = 1.0; bic >= 0.0;) {
    ++kthin;
    thinned.clear();
    for (long i = 0; i < n; i += kthin)
      thinned.push_back(dichot[static_cast<std::size_t>(i)]);
    const std::size_t len = thinned.size();
    if (len < 3)
      throw DataError("pilot run too short to choose a thinning interval");
    double tran[2][2][2] = {};
    for (std::size_t i = 0; i + 2 < len; ++i)
      tran[thinned[i]][thinned[i + 1]][thinned[i + 2]] += 1.0;
    double g2 = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          if (tran[a][b][c] == 0.0)
            continue;
          const double fitted = (tran[a][b][0] + tran[a][b][1]) * (tran[0][b][c] + tran[1][b][c]) /
                                (tran[0][b][0] + tran[0][b][1] + tran[1][b][0] + tran[1][b][1]);
          g2 += 2.0 * tran[a][b][c] * std::log(tran[a][b][c] / fitted);
        }
    bic = g2 - 2.0 * std::log(static_cast<double>(len) - 2.0);
  }

  double fin[2][2] = {};
  for (std::size_t i = 0; i + 1 < thinned.size(); ++i)
    fin[thinned[i]][thinned[i + 1]] += 1.0;
  const double alpha = fin[0][1] / (fin[0][0] + fin[0][1]);
  const double beta = fin[1][0] / (fin[1][0] + fin[1][1]);
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha + beta <= 0.0)
    throw DataError("pilot run never changes state at the requested quantile");

  const double phi = normal_quantile(0.5 * (1.0 + s));
  const double lambda = std::abs(1.0 - alpha - beta);
  double burn = 0.0;
  if (lambda > 0.0)
    burn = std::log(eps * (alpha + beta) / std::max(alpha, beta)) / std::log(lambda);
  RafteryLewis out;
  out.thin = kthin;
  out.burn_in = static_cast<long>(std::max(0.0, std::ceil(burn))) * kthin;
  const double prec = (2.0 - alpha - beta) * alpha * beta * phi * phi / (std::pow(alpha + beta, 3) * r * r);
  const long keep = static_cast<long>(std::ceil(prec * static_cast<double>(kthin)));
  out.total = out.burn_in + keep;
  out.lower_bound = nmin;
  out.dependence_factor = static_cast<double>(out.total) / static_cast<double>(nmin);
  return out;
}

ParamDiagnostics diagnose_parameter(const std::string& name, const Eigen::MatrixXd& draws)
{
  ParamDiagnostics d;
  d.name = name;
  d.rhat = split_rhat(draws);
  d.bulk_ess = bulk_ess(draws);
  const double cap = 1.5 * static_cast<double>(draws.size());
  if (d.bulk_ess && *d.bulk_ess > cap) {
    d.bulk_ess = cap;
    d.ess_capped = true;
  }
  Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(draws.data(), draws.size());
  d.mean = flat.mean();
  d.sd = flat.size() > 1 ? std::sqrt(sample_var(flat)) : 0.0;
  d.q025 = quantile(flat, 0.025);
  d.q50 = quantile(flat, 0.5);
  d.q975 = quantile(flat, 0.975);
  return d;
}

DiagnosticReport diagnostic_report(const PosteriorDraws& draws, const DiagnosticThresholds& thresholds)
{
  if (draws.chains() == 0 || draws.iterations() == 0)
    throw DataError("diagnostic_report needs nonempty draws");
  DiagnosticReport rep;
  rep.chains = draws.chains();
  rep.iterations = static_cast<long>(draws.iterations());
  for (int c : draws.divergence_count)
    rep.divergences += c;
  for (int c : draws.depth_saturation_count)
    rep.depth_saturations += c;

  const Eigen::Index dim = draws.dimension();
  rep.params.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) {
    const std::string name =
      static_cast<std::size_t>(i) < draws.names.size() ? draws.names[static_cast<std::size_t>(i)] : std::to_string(i);
    rep.params[static_cast<std::size_t>(i)] = diagnose_parameter(name, draws.parameter(i));
  }

  bool rhat_bad = false, ess_bad = false, capped = false;
  for (const auto& p : rep.params) {
    if (!p.rhat || !p.bulk_ess) {
      rep.undefined.push_back(p.name);
      continue;
    }
    capped = capped || p.ess_capped;
    if (!rep.max_rhat || *p.rhat > *rep.max_rhat) {
      rep.max_rhat = p.rhat;
      rep.max_rhat_param = p.name;
    }
    if (!rep.min_ess || *p.bulk_ess < *rep.min_ess) {
      rep.min_ess = p.bulk_ess;
      rep.min_ess_param = p.name;
    }
    rhat_bad = rhat_bad || !(*p.rhat <= thresholds.max_rhat);
    ess_bad = ess_bad || !(*p.bulk_ess >= thresholds.min_ess);
  }
  if (rhat_bad)
    rep.reasons.push_back("rhat");
  if (ess_bad)
    rep.reasons.push_back("ess");
  if (!rep.undefined.empty())
    rep.reasons.push_back("undefined");
  if (rep.divergences > thresholds.max_divergences)
    rep.reasons.push_back("divergences");
  if (rep.depth_saturations > thresholds.max_depth_saturations)
    rep.reasons.push_back("depth_saturation");
  if (capped)
    rep.notes.push_back("bulk ESS capped at 1.5x total draws for some parameters (antithetic chains)");
  rep.pass = rep.reasons.empty();
  return rep;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v)
{
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

} // namespace

std::string report_to_json(const DiagnosticReport& report, const DiagnosticThresholds& thresholds)
{
  nlohmann::ordered_json j;
  j["pass"] = report.pass;
  j["reasons"] = report.reasons;
  j["chains"] = report.chains;
  j["iterations"] = report.iterations;
  j["divergences"] = report.divergences;
  j["depth_saturations"] = report.depth_saturations;
  j["max_rhat"] = opt_json(report.max_rhat);
  j["max_rhat_param"] = report.max_rhat_param;
  j["min_bulk_ess"] = opt_json(report.min_ess);
  j["min_bulk_ess_param"] = report.min_ess_param;
  j["undefined"] = report.undefined;
  j["notes"] = report.notes;
  j["thresholds"] = { { "max_rhat", thresholds.max_rhat },
                      { "min_bulk_ess", thresholds.min_ess },
                      { "max_divergences", thresholds.max_divergences },
                      { "max_depth_saturations", thresholds.max_depth_saturations } };
  auto& params = j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& p : report.params) {
    nlohmann::ordered_json e;
    e["name"] = p.name;
    e["rhat"] = opt_json(p.rhat);
    e["bulk_ess"] = opt_json(p.bulk_ess);
    e["ess_capped"] = p.ess_capped;
    e["mean"] = p.mean;
    e["sd"] = p.sd;
    e["q2.5"] = p.q025;
    e["q50"] = p.q50;
    e["q97.5"] = p.q975;
    params.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string report_to_csv(const DiagnosticReport& report)
{
  std::string out = "parameter,rhat,ess,mean,sd,q2.5,q50,q97.5\n";
  auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("NA"); };
  for (const auto& p : report.params) {
    out += io::csv_escape(p.name) + ',' + opt(p.rhat) + ',' + opt(p.bulk_ess) + ',' + io::format_double(p.mean) +
           ',' + io::format_double(p.sd) + ',' + io::format_double(p.q025) + ',' + io::format_double(p.q50) + ',' +
           io::format_double(p.q975) + '\n';
  }
  return out;
}

std::string trace_to_csv(const PosteriorDraws& draws, int max_points)
{
  std::string out = "chain,iteration";
  for (const auto& n : draws.names)
    out += ',' + io::csv_escape(n);
  out += '\n';
  const Eigen::Index iters = draws.iterations();
  const Eigen::Index stride = max_points > 0 ? std::max<Eigen::Index>(1, (iters + max_points - 1) / max_points) : 1;
  for (int c = 0; c < draws.chains(); ++c) {
    const auto& d = draws.draws[static_cast<std::size_t>(c)];
    for (Eigen::Index it = 0; it < iters; it += stride) {
      out += std::to_string(c) + ',' + std::to_string(it);
      for (Eigen::Index k = 0; k < d.cols(); ++k)
        out += ',' + io::format_double(d(it, k));
      out += '\n';
    }
  }
  return out;
}

} // namespace semscale
