#pragma once

#include "semscale/corpus.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace semscale {

struct WordCountMatrix
{
  std::vector<std::string> author_ids; // sorted
  std::vector<std::string> vocab;      // sorted
  Eigen::MatrixXd counts;              // n x m, nonnegative integers

  void validate() const;
};

// Whitespace tokens of the normalized, lowercased text. Terms found in fewer than prune_min_docs
// documents are dropped, then authors left without tokens. Throws DataError on an empty vocabulary.
WordCountMatrix build_word_counts(const std::vector<Document>& docs, int prune_min_docs = 5);

struct WordfishConfig
{
  int max_iter = 5000;
  double tol = 1e-8;         // relative objective improvement
  int newton_steps = 3;      // per block update
  double beta_prior_sd = 3.0;
  double omega_prior_sd = 1.0;
  // Author whose omega is made positive; defaults to the lexicographically first id.
  std::optional<std::string> anchor_author;
};

struct WordfishResult
{
  std::vector<std::string> author_ids;
  std::vector<std::string> vocab;
  Eigen::VectorXd omega;     // mean 0, variance 1
  Eigen::VectorXd author_fe;
  Eigen::VectorXd word_fe;   // mean 0
  Eigen::VectorXd beta;
  std::vector<double> trace; // penalized log-likelihood after each alternating iteration
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Poisson log-likelihood sum_ij c log(lambda) - lambda - log(c!) under the given parameters.
double wordfish_log_likelihood(const Eigen::MatrixXd& counts, const Eigen::VectorXd& author_fe,
                               const Eigen::VectorXd& word_fe, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& omega);

// count_ij ~ Poisson(exp(author_fe_i + word_fe_j + beta_j omega_i)), fitted by alternating
// per-author and per-word Newton updates with step halving, under N(0, 3^2) ridge on beta and
// N(0, 1) on omega. Every block update is non-decreasing in the penalized likelihood.
WordfishResult fit_wordfish(const WordCountMatrix& counts, const WordfishConfig& config = {});

std::string wordfish_authors_csv(const WordfishResult& r); // author_id,omega,fe
std::string wordfish_words_csv(const WordfishResult& r);   // term,beta,fe

} // namespace semscale
