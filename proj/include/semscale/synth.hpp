#pragma once

#include "semscale/classifier.hpp"
#include "semscale/corpus.hpp"
#include "semscale/count_matrix.hpp"
#include "semscale/items.hpp"
#include "semscale/wordfish.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace semscale {

struct MixtureSpec
{
  double mean_left = -1.2;
  double mean_right = 1.2;
  double sd_left = 0.6;
  double sd_right = 0.6;
  double weight_left = 0.5;
};

struct NormalSpec
{
  double mean = 0.0;
  double sd = 1.0;
};

enum class DocCountFamily
{
  negative_binomial,
  poisson
};

// y_i = 1 + Z with Z ~ NB(mean - 1, dispersion) (variance m + m^2 / dispersion) or Poisson(mean - 1).
struct DocCountSpec
{
  DocCountFamily family = DocCountFamily::negative_binomial;
  double mean = 1000.0;
  double dispersion = 0.17;
};

struct SynthConfig
{
  int n_authors = 500;
  int n_items = 11; // column pairs; the matrix has 2 n_items columns
  MixtureSpec mixture;
  DocCountSpec doc_count;
  NormalSpec delta{ -3.0, 0.5 };
  // Conservative columns get |N(mean, sd)|, liberal columns -|N(mean, sd)|.
  NormalSpec alpha{ 1.0, 0.3 };
  // Intercept of both columns of item 0, the high-volume item; unset draws it like the others.
  std::optional<double> heavy_item_delta = -1.5;
  double label_flip_rate = 0.0;
  std::uint64_t seed = 20240601;

  void validate() const;
};

SynthConfig default_synth_config();

struct SynthTruth
{
  Eigen::VectorXd theta_true;
  Eigen::VectorXd delta_true; // per column
  Eigen::VectorXd alpha_true; // per column
  CountMatrix matrix;
  std::vector<std::string> groups; // one per item, column pair 2g (lib), 2g + 1 (con)
};

// theta from the mixture, y from the document-count law, and x_ij ~ B(y_i, p_ij) per column.
// A liberal count is capped at y_i minus its conservative partner so each document carries at
// most one stance per item. Deterministic given the seed; authors use substreams (seed, i).
SynthTruth generate(const SynthConfig& config);

std::string truth_authors_csv(const SynthTruth& truth); // author_id,theta,y
std::string truth_items_csv(const SynthTruth& truth);   // column_id,delta,alpha

struct DocumentTemplates
{
  std::vector<std::string> support_phrases{ "i support", "so glad we have", "we need more" };
  std::vector<std::string> oppose_phrases{ "i oppose", "so tired of", "we need less" };
  std::vector<std::string> neutral_sentences{ "what a day", "the game starts at noon", "coffee first",
                                              "traffic is bad again", "see you all tomorrow" };
  std::vector<std::string> filler_words{ "really", "today", "people", "news", "time", "work", "home",
                                         "week", "friends", "morning", "city", "family", "school", "night" };
  // Words whose use leans with the author's side.
  std::vector<std::string> right_words{ "freedom", "faith", "border", "taxes" };
  std::vector<std::string> left_words{ "climate", "equity", "union", "healthcare" };
  double lean = 0.15;
  int filler_min = 1;
  int filler_max = 3;
};

// The item catalog and mock rules that classify generated documents back to the truth.
ItemCatalog synth_catalog(const SynthTruth& truth);
std::vector<MockRule> synth_mock_rules(const SynthTruth& truth, const DocumentTemplates& templates = {});
std::string synth_keyword(const std::string& group);

// y_i short posts per author. Each labeled (item, stance) occurrence is one sentence placed on the
// least-loaded documents; other documents get a neutral sentence. Tagging plus the mock classifier
// rebuild truth.matrix exactly.
std::vector<Document> generate_documents(const SynthTruth& truth, const DocumentTemplates& templates = {},
                                         std::uint64_t seed = 0);

struct WordfishSynthConfig
{
  int n_authors = 100;
  int n_words = 300;
  NormalSpec author_fe{ 0.0, 0.3 };
  NormalSpec word_fe{ 0.5, 1.0 };
  NormalSpec beta{ 0.0, 0.8 };
  std::uint64_t seed = 7;
};

struct WordfishTruth
{
  WordCountMatrix counts;
  Eigen::VectorXd omega;
  Eigen::VectorXd author_fe;
  Eigen::VectorXd word_fe;
  Eigen::VectorXd beta;
};

// Poisson counts from the Wordfish model with omega ~ N(0, 1).
WordfishTruth generate_wordfish(const WordfishSynthConfig& config);

} // namespace semscale
