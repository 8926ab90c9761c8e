#pragma once

#include "semscale/sampler.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace semscale {

// Each column of an iterations x chains matrix is one chain.

// Splits every chain into two halves, dropping the middle draw when the length is odd.
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& draws);

// Pooled average-tie ranks mapped through Phi^-1((r - 3/8) / (S + 1/4)).
Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& draws);

// Biased (divide by N) autocovariance for lags 0..N-1.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& x);

// Classic R-hat over whatever chains are given; nullopt when within-chain variance vanishes.
std::optional<double> rhat_basic(const Eigen::MatrixXd& chains);
// Geyer initial positive/monotone truncated ESS; nullopt on constant or too short input.
std::optional<double> ess_basic(const Eigen::MatrixXd& chains);

// Rank-normalized split R-hat. Requires >= 2 chains and >= 4 iterations.
std::optional<double> split_rhat(const Eigen::MatrixXd& draws);
// Rank-normalized split bulk ESS.
std::optional<double> bulk_ess(const Eigen::MatrixXd& draws);

struct RafteryLewis
{
  long burn_in = 0;     // M
  long total = 0;       // N = burn-in + kept iterations
  long lower_bound = 0; // Nmin for an independent chain
  long thin = 1;        // k
  double dependence_factor = 0.0; // I = N / Nmin
};

long raftery_nmin(double q, double r, double s);

// Two-state Markov chain run-length estimate for the q-quantile to within +-r with probability s.
// Throws DataError when the pilot is shorter than raftery_nmin(q, r, s).
RafteryLewis raftery_lewis(const Eigen::VectorXd& pilot, double q = 0.025, double r = 0.005, double s = 0.95,
                           double eps = 0.001);

// Type 7 sample quantile.
double quantile(Eigen::VectorXd values, double p);

struct ParamDiagnostics
{
  std::string name;
  std::optional<double> rhat;
  std::optional<double> bulk_ess;
  bool ess_capped = false; // reported ESS clipped at 1.5 x total draws
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

ParamDiagnostics diagnose_parameter(const std::string& name, const Eigen::MatrixXd& draws);

struct DiagnosticThresholds
{
  double max_rhat = 1.01;
  double min_ess = 400.0;
  int max_divergences = 0;
  int max_depth_saturations = 0;
  int trace_points = 2000;
};

struct DiagnosticReport
{
  std::vector<ParamDiagnostics> params;
  int chains = 0;
  long iterations = 0;
  int divergences = 0;
  int depth_saturations = 0;
  std::optional<double> max_rhat;
  std::string max_rhat_param;
  std::optional<double> min_ess;
  std::string min_ess_param;
  std::vector<std::string> undefined; // parameters with undefined R-hat or ESS
  bool pass = false;
  std::vector<std::string> reasons; // "rhat", "ess", "undefined", "divergences", "depth_saturation"
  std::vector<std::string> notes;
};

DiagnosticReport diagnostic_report(const PosteriorDraws& draws, const DiagnosticThresholds& thresholds = {});

std::string report_to_json(const DiagnosticReport& report, const DiagnosticThresholds& thresholds);
// parameter,rhat,ess,mean,sd,q2.5,q50,q97.5
std::string report_to_csv(const DiagnosticReport& report);
// chain,iteration,<parameters...>, thinned to at most max_points rows per chain.
std::string trace_to_csv(const PosteriorDraws& draws, int max_points = 2000);

} // namespace semscale
