#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semscale {

struct ScoreSeries
{
  std::vector<std::string> author_ids;
  Eigen::VectorXd values;
  std::string label;

  Eigen::Index size() const { return values.size(); }
  void validate() const;
};

// Reads author_id plus one score column (the second column when `column` is empty).
ScoreSeries read_scores(const std::filesystem::path& path, std::string_view column = {}, std::string label = {});
std::string scores_to_csv(const ScoreSeries& s);

// Restricts both series to their common authors, in the order of `a`.
std::pair<ScoreSeries, ScoreSeries> align(const ScoreSeries& a, const ScoreSeries& b);

struct Correlation
{
  double rho = 0.0;
  double se = 0.0;
  long n = 0;
};

Correlation pearson_with_se(const ScoreSeries& a, const ScoreSeries& b);
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

// 0.9 min(sd, IQR / 1.34) n^(-1/5)
double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& x);

// Gaussian kernel density and its distribution function at t.
double kde_density(const Eigen::Ref<const Eigen::VectorXd>& data, double h, double t);
double kde_cdf(const Eigen::Ref<const Eigen::VectorXd>& data, double h, double t);

struct KdeSplit
{
  double minimum = 0.0;
  double left_peak = 0.0;
  double right_peak = 0.0;
  double bandwidth = 0.0;
  Eigen::VectorXd grid;
  Eigen::VectorXd density;
};

inline constexpr int kKdeGridPoints = 512;
inline constexpr double kMinModeProminence = 0.05; // of the highest density

// Lowest interior minimum between the two highest modes of the KDE on a 512-point grid padded by
// 3 bandwidths, refined on the continuous density. Local maxima whose prominence is below
// kMinModeProminence of the peak are ignored. Throws NumericalError for a unimodal density.
KdeSplit kde_split(const ScoreSeries& scores);
KdeSplit kde_split(const Eigen::Ref<const Eigen::VectorXd>& values);

enum class Ideology
{
  liberal,
  moderate,
  conservative
};

std::string_view to_string(Ideology l);
Ideology parse_ideology(std::string_view s);

struct IdeologyLabel
{
  std::string author_id;
  Ideology label = Ideology::moderate;
};

struct ModerateBand
{
  double lower = 0.0; // liberal below
  double upper = 0.0; // conservative above
};

// Per side, the point where the KDE area accumulated outward from the minimum reaches `fraction`
// of the area between the minimum and that side's peak.
ModerateBand moderate_band(const Eigen::Ref<const Eigen::VectorXd>& values, const KdeSplit& split,
                           double fraction = 0.25);
std::vector<IdeologyLabel> classify_moderates(const ScoreSeries& scores, const KdeSplit& split,
                                              double fraction = 0.25);

std::vector<IdeologyLabel> read_labels_csv(const std::filesystem::path& path);
std::string labels_to_csv(const std::vector<IdeologyLabel>& labels);

// Rows: labels of a, columns: labels of b, both ordered liberal, moderate, conservative.
Eigen::Matrix3i confusion_matrix(const std::vector<IdeologyLabel>& a, const std::vector<IdeologyLabel>& b);

struct ExpectedCountTest
{
  double expected = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long observed = 0;
  bool rejected = false;
  long trials = 0;       // off-diagonal moderates
  double share = 0.0;    // marginal share of the target label among non-moderates
  bool exact = false;    // exact binomial quantiles rather than the normal approximation
};

// One of (row, col) must be the moderate index (1). With row = moderate, the trials are a's moderates
// not agreed by b, and the share is b's marginal of label `col` among b's non-moderates; the
// transposed case swaps roles.
ExpectedCountTest expected_count_test(const Eigen::Matrix3i& matrix, int row, int col, double level = 0.95);

struct Residual
{
  std::string author_id;
  double x = 0.0;
  double y = 0.0;
  double residual = 0.0;
  int quadrant = 0; // 1: x,y high; 2: x low, y high; 3: both low; 4: x high, y low
};

struct ResidualSelection
{
  double intercept = 0.0;
  double slope = 0.0;
  double x_axis = 0.0; // x position of the vertical axis
  double y_axis = 0.0;
  std::vector<Residual> top;
  std::array<int, 4> quadrant_counts{};
};

int quadrant(double x, double y, double x_axis, double y_axis);

// OLS y = a + b x, ranked by |residual| descending; ties keep aligned input order. Axes default to
// each series' KDE minimum.
ResidualSelection top_residual_selection(const ScoreSeries& x, const ScoreSeries& y, int count,
                                         std::optional<double> x_axis = std::nullopt,
                                         std::optional<double> y_axis = std::nullopt);
std::string residuals_to_csv(const ResidualSelection& sel);

// 100 (v - min) / (max - min)
ScoreSeries thermometer(const ScoreSeries& scores);

} // namespace semscale
