#include "semscale/sampler.hpp"

#include "semscale/error.hpp"
#include "semscale/scale_model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace semscale {

void ChainConfig::validate() const
{
  if (chains <= 0 || warmup_iters < 0 || sampling_iters <= 0 || max_tree_depth <= 0)
    throw ConfigError("chains, sampling_iters and max_tree_depth must be positive, warmup_iters non-negative");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw ConfigError("target_accept must lie in (0, 1)");
  if (fixed_step_size && !(*fixed_step_size > 0.0))
    throw ConfigError("fixed step size must be positive");
}

Eigen::MatrixXd PosteriorDraws::parameter(Eigen::Index index) const
{
  Eigen::MatrixXd out(iterations(), chains());
  for (int c = 0; c < chains(); ++c)
    out.col(c) = draws[static_cast<std::size_t>(c)].col(index);
  return out;
}

Eigen::VectorXd PosteriorDraws::posterior_mean() const
{
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dimension());
  for (const auto& d : draws)
    m += d.colwise().sum().transpose();
  return m / static_cast<double>(iterations() * chains());
}

std::string_view to_string(MetricKind m)
{
  return m == MetricKind::dense ? "dense" : "diagonal";
}

MetricKind parse_metric_kind(std::string_view s)
{
  if (s == "diagonal" || s == "diag")
    return MetricKind::diagonal;
  if (s == "dense")
    return MetricKind::dense;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected diagonal or dense)");
}

std::uint64_t chain_seed(std::uint64_t seed, int chain)
{
  // splitmix64 over (seed, chain)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(chain) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace hmc {

InverseMetric::InverseMetric(Eigen::VectorXd diagonal) : diag_(std::move(diagonal)) {}

InverseMetric InverseMetric::dense(const Eigen::MatrixXd& covariance)
{
  InverseMetric m;
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (covariance.rows() != covariance.cols() || llt.info() != Eigen::Success)
    throw SamplerError("dense metric is not symmetric positive definite");
  m.dense_ = true;
  m.cov_ = covariance;
  m.chol_ = llt.matrixL();
  m.diag_ = covariance.diagonal();
  return m;
}

Eigen::VectorXd InverseMetric::velocity(const Eigen::VectorXd& p) const
{
  if (dense_)
    return cov_ * p;
  return diag_.cwiseProduct(p);
}

double InverseMetric::kinetic_energy(const Eigen::VectorXd& p) const
{
  return 0.5 * p.dot(velocity(p));
}

Eigen::VectorXd InverseMetric::momentum(const Eigen::VectorXd& z) const
{
  if (dense_)
    return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
  return z.cwiseQuotient(diag_.cwiseSqrt());
}

double hamiltonian(const PhasePoint& z, const InverseMetric& inv_metric)
{
  return -z.log_density + inv_metric.kinetic_energy(z.p);
}

void leapfrog(const LogDensityTarget& target, PhasePoint& z, const InverseMetric& inv_metric, double eps)
{
  z.p += 0.5 * eps * z.grad;
  z.q += eps * inv_metric.velocity(z.p);
  z.log_density = target.value_and_gradient(z.q, z.grad);
  if (!std::isfinite(z.log_density) || !z.grad.allFinite()) {
    z.log_density = -std::numeric_limits<double>::infinity();
    z.grad.setZero();
    return;
  }
  z.p += 0.5 * eps * z.grad;
}

} // namespace hmc

namespace {

using hmc::PhasePoint;

double log_sum_exp(double a, double b)
{
  if (a == -std::numeric_limits<double>::infinity())
    return b;
  if (b == -std::numeric_limits<double>::infinity())
    return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

class StepSizeAdapter
{
public:
  explicit StepSizeAdapter(double delta) : delta_(delta) {}

  void restart(double eps)
  {
    mu_ = std::log(10.0 * eps);
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double learn(double accept_stat)
  {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(counter_)) / gamma_;
    const double x_eta = std::pow(static_cast<double>(counter_), -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step() const { return std::exp(x_bar_); }

private:
  double delta_;
  double mu_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  long counter_ = 0;
  static constexpr double gamma_ = 0.05;
  static constexpr double t0_ = 10.0;
  static constexpr double kappa_ = 0.75;
};

// Fast / slow / fast schedule with doubling slow windows.
class WindowSchedule
{
public:
  WindowSchedule(int warmup, int init_buffer, int term_buffer, int base_window)
    : warmup_(warmup), init_(init_buffer), term_(term_buffer), window_(base_window)
  {
    if (warmup < 20) {
      init_ = warmup;
      term_ = 0;
      window_ = 0;
    } else if (init_buffer + base_window + term_buffer > warmup) {
      init_ = static_cast<int>(0.15 * warmup);
      term_ = static_cast<int>(0.1 * warmup);
      window_ = warmup - (init_ + term_);
    }
    next_end_ = init_ + window_ - 1;
  }

  bool in_window(int it) const { return window_ > 0 && it >= init_ && it < warmup_ - term_ && it != warmup_; }
  bool window_end(int it) const { return window_ > 0 && it == next_end_ && it != warmup_; }

  void advance(int it)
  {
    if (next_end_ == warmup_ - term_ - 1)
      return;
    window_ *= 2;
    next_end_ = it + window_;
    if (next_end_ != warmup_ - term_ - 1) {
      const int boundary = next_end_ + 2 * window_;
      if (boundary >= warmup_ - term_)
        next_end_ = warmup_ - term_ - 1;
    }
  }

  int init_buffer() const { return init_; }

private:
  int warmup_;
  int init_;
  int term_;
  int window_;
  int next_end_;
};

// Running mean and (co)variance of warmup draws.
class WelfordVar
{
public:
  WelfordVar(Eigen::Index d, bool dense)
    : dense_(dense), mean_(Eigen::VectorXd::Zero(d)), m2_(Eigen::VectorXd::Zero(d)),
      m2_dense_(dense ? Eigen::MatrixXd::Zero(d, d) : Eigen::MatrixXd())
  {}
  void add(const Eigen::VectorXd& q)
  {
    ++n_;
    Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    if (dense_)
      m2_dense_.noalias() += delta * (q - mean_).transpose();
    else
      m2_ += delta.cwiseProduct(q - mean_);
  }
  long count() const { return n_; }
  // Shrunk toward 1e-3 I as in Stan: (n / (n + 5)) S + 1e-3 (5 / (n + 5)) I.
  hmc::InverseMetric regularized() const
  {
    const double n = static_cast<double>(n_);
    const double w = n / (n + 5.0), shrink = 1e-3 * (5.0 / (n + 5.0));
    if (dense_) {
      Eigen::MatrixXd cov = n_ > 1 ? Eigen::MatrixXd(m2_dense_ / (n - 1.0)) : Eigen::MatrixXd::Identity(m2_.size(), m2_.size());
      cov = w * cov;
      cov.diagonal().array() += shrink;
      return hmc::InverseMetric::dense(0.5 * (cov + cov.transpose()));
    }
    Eigen::VectorXd var = n_ > 1 ? Eigen::VectorXd(m2_ / (n - 1.0)) : Eigen::VectorXd::Ones(m2_.size());
    return hmc::InverseMetric(Eigen::VectorXd((w * var.array() + shrink).matrix()));
  }
  void restart()
  {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
    if (dense_)
      m2_dense_.setZero();
  }

private:
  bool dense_;
  long n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
  Eigen::MatrixXd m2_dense_;
};

struct TransitionInfo
{
  double accept_stat = 0.0;
  int depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

class NutsChain
{
public:
  NutsChain(const LogDensityTarget& target, const ChainConfig& cfg, std::uint64_t seed)
    : target_(target), cfg_(cfg), rng_(seed), inv_metric_(Eigen::VectorXd::Ones(target.dimension))
  {}

  void set_position(const Eigen::VectorXd& q)
  {
    z_.q = q;
    z_.p = Eigen::VectorXd::Zero(q.size());
    z_.grad.resize(q.size());
    z_.log_density = target_.value_and_gradient(z_.q, z_.grad);
    if (!std::isfinite(z_.log_density) || !z_.grad.allFinite())
      throw SamplerError("non-finite log density or gradient at the initial point");
  }

  const PhasePoint& point() const { return z_; }
  double step() const { return eps_; }
  void set_step(double e) { eps_ = e; }
  const hmc::InverseMetric& inv_metric() const { return inv_metric_; }
  void set_inv_metric(hmc::InverseMetric m) { inv_metric_ = std::move(m); }

  void sample_momentum()
  {
    Eigen::VectorXd z(z_.p.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z(i) = normal_(rng_);
    z_.p = inv_metric_.momentum(z);
  }

  double uniform() { return unif_(rng_); }

  void init_step_size()
  {
    const PhasePoint z_init = z_;
    sample_momentum();
    double h0 = hmc::hamiltonian(z_, inv_metric_);
    hmc::leapfrog(target_, z_, inv_metric_, eps_);
    double h = hmc::hamiltonian(z_, inv_metric_);
    if (std::isnan(h))
      h = std::numeric_limits<double>::infinity();
    double delta_h = h0 - h;
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (int guard = 0; guard < 200; ++guard) {
      z_ = z_init;
      sample_momentum();
      h0 = hmc::hamiltonian(z_, inv_metric_);
      hmc::leapfrog(target_, z_, inv_metric_, eps_);
      h = hmc::hamiltonian(z_, inv_metric_);
      if (std::isnan(h))
        h = std::numeric_limits<double>::infinity();
      delta_h = h0 - h;
      if (direction == 1 && !(delta_h > std::log(0.8)))
        break;
      if (direction == -1 && !(delta_h < std::log(0.8)))
        break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7)
        throw SamplerError("step size diverged during initialization; posterior may be improper");
      if (eps_ < 1e-300)
        throw SamplerError("step size collapsed to zero during initialization");
    }
    z_ = z_init;
  }

  TransitionInfo transition()
  {
    sample_momentum();
    const Eigen::Index d = z_.q.size();
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    Eigen::VectorXd p_sharp_fwd_bck = inv_metric_.velocity(z_.p);
    Eigen::VectorXd p_sharp_fwd_fwd = p_sharp_fwd_bck;
    Eigen::VectorXd p_sharp_bck_fwd = p_sharp_fwd_bck;
    Eigen::VectorXd p_sharp_bck_bck = p_sharp_fwd_bck;
    Eigen::VectorXd p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    Eigen::VectorXd rho = z_.p;
    double log_sum_weight = 0.0;
    const double h0 = hmc::hamiltonian(z_, inv_metric_);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    divergent_ = false;
    int depth = 0;

    while (depth < cfg_.max_tree_depth) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(d), rho_bck = Eigen::VectorXd::Zero(d);
      bool valid_subtree = false;
      double log_sum_weight_subtree = -std::numeric_limits<double>::infinity();
      if (uniform() > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid_subtree = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                                   h0, 1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid_subtree = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                                   h0, -1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_bck = z_;
      }
      if (!valid_subtree)
        break;
      ++depth;
      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else {
        const double accept = std::exp(log_sum_weight_subtree - log_sum_weight);
        if (uniform() < accept)
          z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      Eigen::VectorXd rho_ext = rho_bck + p_fwd_bck;
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_ext);
      rho_ext = rho_fwd + p_bck_fwd;
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_ext);
      if (!persist)
        break;
    }
    z_ = z_sample;
    TransitionInfo info;
    info.n_leapfrog = n_leapfrog;
    info.depth = depth;
    info.divergent = divergent_;
    info.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    return info;
  }

private:
  static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho)
  {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  bool build_tree(int depth, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                  int& n_leapfrog, double& log_sum_weight, double& sum_metro_prob)
  {
    if (depth == 0) {
      hmc::leapfrog(target_, z_, inv_metric_, sign * eps_);
      ++n_leapfrog;
      double h = hmc::hamiltonian(z_, inv_metric_);
      if (std::isnan(h))
        h = std::numeric_limits<double>::infinity();
      if (h - h0 > cfg_.divergence_threshold)
        divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = inv_metric_.velocity(z_.p);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }
    const Eigen::Index d = z_.q.size();
    double log_sum_weight_init = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd p_init_end(d), p_sharp_init_end(d), rho_init = Eigen::VectorXd::Zero(d);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, log_sum_weight_init, sum_metro_prob))
      return false;

    PhasePoint z_propose_final = z_;
    double log_sum_weight_final = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd p_final_beg(d), p_sharp_final_beg(d), rho_final = Eigen::VectorXd::Zero(d);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0,
                    sign, n_leapfrog, log_sum_weight_final, sum_metro_prob))
      return false;

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else {
      const double accept = std::exp(log_sum_weight_final - log_sum_weight_subtree);
      if (uniform() < accept)
        z_propose = z_propose_final;
    }
    Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    Eigen::VectorXd rho_ext = rho_init + p_final_beg;
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_ext);
    rho_ext = rho_final + p_init_end;
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_ext);
    return persist;
  }

  const LogDensityTarget& target_;
  const ChainConfig& cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{ 0.0, 1.0 };
  std::uniform_real_distribution<double> unif_{ 0.0, 1.0 };
  hmc::InverseMetric inv_metric_;
  PhasePoint z_;
  double eps_ = 1.0;
  bool divergent_ = false;
};

struct ChainOutput
{
  Eigen::MatrixXd draws;
  DrawStats stats;
  int divergences = 0;
  int saturations = 0;
  int warmup_divergences = 0;
  double step = 0.0;
  Eigen::VectorXd inv_metric;
};

ChainOutput run_chain(const LogDensityTarget& target, const Eigen::VectorXd& init, const ChainConfig& cfg,
                      int chain, std::uint64_t seed)
{
  const std::string who = "chain " + std::to_string(chain);
  NutsChain nuts(target, cfg, seed);
  try {
    nuts.set_position(init);
  } catch (const SamplerError& e) {
    throw SamplerError(who + ": " + e.what());
  }

  ChainOutput out;
  if (cfg.fixed_step_size) {
    nuts.set_step(*cfg.fixed_step_size);
  } else {
    try {
      nuts.init_step_size();
    } catch (const SamplerError& e) {
      throw SamplerError(who + ": " + e.what());
    }
  }

  StepSizeAdapter adapter(cfg.target_accept);
  adapter.restart(nuts.step());
  WindowSchedule schedule(cfg.warmup_iters, cfg.init_buffer, cfg.term_buffer, cfg.base_window);
  WelfordVar estimator(target.dimension, cfg.metric == MetricKind::dense);

  // Adaptation-failure check: every warmup iteration of a window diverged.
  int window_start = 0;
  int window_divergent = 0;
  auto close_window = [&](int it) {
    const int len = it - window_start + 1;
    if (len > 0 && window_divergent == len)
      throw SamplerError(who + ": all " + std::to_string(len) + " warmup iterations " +
                         std::to_string(window_start) + ".." + std::to_string(it) +
                         " diverged; adaptation failed");
    window_start = it + 1;
    window_divergent = 0;
  };

  for (int it = 0; it < cfg.warmup_iters; ++it) {
    TransitionInfo info = nuts.transition();
    if (info.divergent) {
      ++out.warmup_divergences;
      ++window_divergent;
    }
    if (!cfg.fixed_step_size)
      nuts.set_step(adapter.learn(info.accept_stat));
    if (cfg.adapt_mass) {
      if (schedule.in_window(it))
        estimator.add(nuts.point().q);
      if (schedule.window_end(it)) {
        schedule.advance(it);
        nuts.set_inv_metric(estimator.regularized());
        estimator.restart();
        if (!cfg.fixed_step_size) {
          nuts.init_step_size();
          adapter.restart(nuts.step());
        }
        close_window(it);
        continue;
      }
    }
    if (it + 1 == schedule.init_buffer() || it + 1 == cfg.warmup_iters)
      close_window(it);
  }
  if (cfg.warmup_iters > 0 && !cfg.fixed_step_size)
    nuts.set_step(adapter.final_step());

  const int n = cfg.sampling_iters;
  out.draws.resize(n, target.dimension);
  out.stats.lp.resize(n);
  out.stats.accept_stat.resize(n);
  out.stats.tree_depth.resize(n);
  out.stats.n_leapfrog.resize(n);
  out.stats.divergent.resize(n);
  for (int it = 0; it < n; ++it) {
    TransitionInfo info = nuts.transition();
    out.draws.row(it) = nuts.point().q.transpose();
    out.stats.lp(it) = nuts.point().log_density;
    out.stats.accept_stat(it) = info.accept_stat;
    out.stats.tree_depth(it) = info.depth;
    out.stats.n_leapfrog(it) = info.n_leapfrog;
    out.stats.divergent(it) = info.divergent ? 1 : 0;
    out.divergences += info.divergent ? 1 : 0;
    out.saturations += info.depth >= cfg.max_tree_depth ? 1 : 0;
  }
  out.step = nuts.step();
  out.inv_metric = nuts.inv_metric().diagonal();
  return out;
}

} // namespace

PosteriorDraws sample(const LogDensityTarget& target, const std::vector<Eigen::VectorXd>& inits,
                      const ChainConfig& config)
{
  config.validate();
  if (static_cast<int>(inits.size()) != config.chains)
    throw ConfigError("expected " + std::to_string(config.chains) + " initial points, got " +
                       std::to_string(inits.size()));
  for (const auto& q : inits)
    if (q.size() != target.dimension || !q.allFinite())
      throw SamplerError("initial point has wrong dimension or non-finite entries");

  std::vector<ChainOutput> outs(static_cast<std::size_t>(config.chains));
  std::vector<std::uint64_t> seeds;
  for (int c = 0; c < config.chains; ++c)
    seeds.push_back(chain_seed(config.seed, c));

  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads) : hw;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(config.chains));
  if (workers <= 1) {
    for (int c = 0; c < config.chains; ++c)
      outs[static_cast<std::size_t>(c)] = run_chain(target, inits[static_cast<std::size_t>(c)], config, c,
                                                    seeds[static_cast<std::size_t>(c)]);
  } else {
    std::vector<std::thread> pool;
    std::mutex mu;
    std::exception_ptr err;
    std::atomic<int> next{ 0 };
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int c = next++; c < config.chains; c = next++) {
          try {
            auto o = run_chain(target, inits[static_cast<std::size_t>(c)], config, c, seeds[static_cast<std::size_t>(c)]);
            outs[static_cast<std::size_t>(c)] = std::move(o);
          } catch (...) {
            std::lock_guard lk(mu);
            if (!err)
              err = std::current_exception();
          }
        }
      });
    for (auto& t : pool)
      t.join();
    if (err)
      std::rethrow_exception(err);
  }

  PosteriorDraws res;
  res.chain_seeds = seeds;
  res.metric = config.metric;
  for (auto& o : outs) {
    res.draws.push_back(std::move(o.draws));
    res.stats.push_back(std::move(o.stats));
    res.divergence_count.push_back(o.divergences);
    res.depth_saturation_count.push_back(o.saturations);
    res.warmup_divergence_count.push_back(o.warmup_divergences);
    res.step_size.push_back(o.step);
    res.mass_diag.push_back(std::move(o.inv_metric));
  }
  for (Eigen::Index i = 0; i < target.dimension; ++i)
    res.names.push_back("x[" + std::to_string(i) + "]");
  return res;
}

PosteriorDraws run_semantic_scale(const CountMatrix& data, const PriorSpec& priors, const ChainConfig& config,
                                  const ScaleRunOptions& options)
{
  config.validate();
  auto density = std::make_shared<ScaleLogDensity>(data, priors);
  LogDensityTarget target;
  target.dimension = density->dimension();
  target.value_and_gradient = [density](const Eigen::VectorXd& q, Eigen::VectorXd& g) { return (*density)(q, g); };

  const Eigen::Index n = data.n(), k = data.k();
  Eigen::VectorXd theta0 = options.theta_init ? *options.theta_init : initialize_theta(data);
  if (theta0.size() != n)
    throw ConfigError("theta initialization has wrong length");
  if (options.negate_init)
    theta0 = -theta0;

  std::vector<Eigen::VectorXd> inits;
  for (int c = 0; c < config.chains; ++c) {
    std::mt19937_64 rng(chain_seed(config.seed ^ 0xA5A5A5A5A5A5A5A5ULL, c));
    std::normal_distribution<double> jitter(0.0, options.init_jitter);
    auto state = ModelState<double>::zeros(n, k);
    for (Eigen::Index j = 0; j < k; ++j)
      state.params.delta(j) = jitter(rng);
    for (Eigen::Index j = 0; j < k; ++j)
      state.params.alpha(j) = jitter(rng);
    for (Eigen::Index i = 0; i < n; ++i)
      state.theta(i) = theta0(i) + jitter(rng);
    inits.push_back(pack(state));
  }
  PosteriorDraws res = sample(target, inits, config);
  res.names = parameter_names(data);
  return res;
}

} // namespace semscale
