#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace semscale {

struct CountMatrix;
struct PriorSpec;

// A log density with gradient. Must be safe to call from several threads at once.
struct LogDensityTarget
{
  Eigen::Index dimension = 0;
  std::function<double(const Eigen::VectorXd& position, Eigen::VectorXd& gradient)> value_and_gradient;
};

// Diagonal or dense Euclidean metric. Dense adaptation costs O(d^2) memory and per-step work.
enum class MetricKind
{
  diagonal,
  dense
};

std::string_view to_string(MetricKind m);
MetricKind parse_metric_kind(std::string_view s);

struct ChainConfig
{
  int chains = 4;
  int warmup_iters = 1000;
  int sampling_iters = 1000;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  std::uint64_t seed = 0;

  double divergence_threshold = 1000.0; // nats of energy error
  int init_buffer = 75;
  int term_buffer = 50;
  int base_window = 25;
  bool adapt_mass = true;
  MetricKind metric = MetricKind::diagonal;
  // When set, skips step-size adaptation and uses this value.
  std::optional<double> fixed_step_size;
  int threads = 0; // 0: one per chain, capped at hardware concurrency

  void validate() const;
};

// Per-iteration sampler statistics, Stan naming.
struct DrawStats
{
  Eigen::VectorXd lp;
  Eigen::VectorXd accept_stat;
  Eigen::VectorXi tree_depth;
  Eigen::VectorXi n_leapfrog;
  Eigen::VectorXi divergent;
};

struct PosteriorDraws
{
  std::vector<std::string> names;           // one per dimension
  std::vector<Eigen::MatrixXd> draws;       // per chain: sampling_iters x dimension
  std::vector<DrawStats> stats;             // per chain
  std::vector<int> divergence_count;        // post-warmup, per chain
  std::vector<int> depth_saturation_count;  // post-warmup, per chain
  std::vector<int> warmup_divergence_count; // per chain
  std::vector<double> step_size;
  std::vector<Eigen::VectorXd> mass_diag;   // diagonal of the adapted inverse metric (posterior variance scale)
  MetricKind metric = MetricKind::diagonal;
  std::vector<std::uint64_t> chain_seeds;

  int chains() const { return static_cast<int>(draws.size()); }
  Eigen::Index iterations() const { return draws.empty() ? 0 : draws.front().rows(); }
  Eigen::Index dimension() const { return draws.empty() ? 0 : draws.front().cols(); }

  // iterations x chains matrix of one parameter.
  Eigen::MatrixXd parameter(Eigen::Index index) const;
  // Mean over all chains and iterations.
  Eigen::VectorXd posterior_mean() const;
};

// Deterministic per-chain seed derived from (seed, chain).
std::uint64_t chain_seed(std::uint64_t seed, int chain);

namespace hmc {

// Phase-space point.
struct PhasePoint
{
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad; // gradient of the log density at q
  double log_density = 0.0;
};

// Inverse metric M^-1, the covariance of the momentum-implied velocity.
class InverseMetric
{
public:
  InverseMetric() = default;
  InverseMetric(Eigen::VectorXd diagonal); // NOLINT(google-explicit-constructor)
  // Symmetric positive definite; throws SamplerError otherwise.
  static InverseMetric dense(const Eigen::MatrixXd& covariance);

  bool is_dense() const { return dense_; }
  Eigen::Index size() const { return diag_.size(); }
  Eigen::VectorXd diagonal() const { return diag_; }

  // M^-1 p
  Eigen::VectorXd velocity(const Eigen::VectorXd& p) const;
  double kinetic_energy(const Eigen::VectorXd& p) const;
  // Maps a standard normal vector to a momentum draw p ~ N(0, M).
  Eigen::VectorXd momentum(const Eigen::VectorXd& z) const;

private:
  bool dense_ = false;
  Eigen::VectorXd diag_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_; // lower Cholesky factor of cov_
};

double hamiltonian(const PhasePoint& z, const InverseMetric& inv_metric);

// One leapfrog step of size `eps` (negative integrates backward).
void leapfrog(const LogDensityTarget& target, PhasePoint& z, const InverseMetric& inv_metric, double eps);

} // namespace hmc

// Multinomial No-U-Turn sampling with dual-averaging step size adaptation and windowed
// mass matrix adaptation (diagonal or dense). Chains run in parallel with private RNG streams.
// Throws SamplerError when an initial point has a non-finite density or when every warmup
// iteration of an adaptation window diverges.
PosteriorDraws sample(const LogDensityTarget& target,
                      const std::vector<Eigen::VectorXd>& inits,
                      const ChainConfig& config);

struct ScaleRunOptions
{
  double init_jitter = 0.1;
  // Start from the negated signed initialization (reflection experiments).
  bool negate_init = false;
  // Ignore the signed initialization and start theta from jitter alone around these values.
  std::optional<Eigen::VectorXd> theta_init;
};

// Samples the scale model posterior. Chain c starts at theta from initialize_theta plus
// N(0, jitter^2) noise and item parameters jittered around zero. Draw columns follow
// parameter_names(data).
PosteriorDraws run_semantic_scale(const CountMatrix& data,
                                  const PriorSpec& priors,
                                  const ChainConfig& config,
                                  const ScaleRunOptions& options = {});

} // namespace semscale
