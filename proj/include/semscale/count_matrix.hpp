#pragma once

#include "semscale/corpus.hpp"
#include "semscale/io.hpp"
#include "semscale/items.hpp"
#include "semscale/stance.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace semscale {

// total: x_ij ~ B(y_i, p_ij) with y_i the author's document count.
// per_item: x_ij ~ B(y_ig, p_ij) with y_ig the author's documents about the column's item.
enum class Parameterization
{
  total,
  per_item
};

std::string_view to_string(Parameterization p);
Parameterization parse_parameterization(std::string_view s);

inline constexpr std::string_view kLiberalSuffix = "/lib";
inline constexpr std::string_view kConservativeSuffix = "/con";

// Author x signed-item stance counts. Every item appears as a liberal and a conservative column.
struct CountMatrix
{
  std::vector<std::string> author_ids;
  std::vector<std::string> column_ids;
  Eigen::MatrixXi x;                 // n x k
  Eigen::VectorXi y;                 // n, documents per author
  std::optional<Eigen::MatrixXi> y_item; // n x k, per-item trials (per_item only)
  Parameterization parameterization = Parameterization::total;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index k() const { return x.cols(); }

  // Binomial trial counts per cell, n x k.
  Eigen::MatrixXi trials() const;

  bool is_conservative_column(Eigen::Index j) const;
  std::string column_group(Eigen::Index j) const;

  // Per-author totals over conservative and liberal columns.
  Eigen::VectorXi conservative_totals() const;
  Eigen::VectorXi liberal_totals() const;

  // Throws DataError on negative counts, x > trials, non-positive y or shape mismatch.
  void validate() const;
};

struct MatrixOptions
{
  Parameterization parameterization = Parameterization::total;
  // Minimum labeled documents per scale an author needs to be kept; 0 disables the filter.
  int min_activity = 0;
};

struct MatrixBuild
{
  CountMatrix matrix;
  std::vector<std::string> warnings;
};

// Labels of one document on several items of the same group resolve to a single stance by
// majority, ties broken conservative, liberal, neutral. Each (document, group) pair counts once.
// Without a catalog, each item is its own group and the columns are sorted by item id.
MatrixBuild build_count_matrix(const std::vector<StanceLabel>& labels,
                               const std::vector<TaggedDocument>& docs,
                               const MatrixOptions& options = {},
                               const ItemCatalog* catalog = nullptr);

// CSV: header "author_id,<column ids>...,y". per_item matrices add one "<group>/n" column per
// item between the counts and y.
std::string count_matrix_to_csv(const CountMatrix& m);
CountMatrix count_matrix_from_csv(const io::CsvTable& table);
CountMatrix read_count_matrix(const std::filesystem::path& path);

// Keeps the column pairs of the listed groups and drops authors with no labeled documents in them.
CountMatrix select_groups(const CountMatrix& m, const std::vector<std::string>& groups);

} // namespace semscale
