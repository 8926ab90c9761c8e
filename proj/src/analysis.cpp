#include "semscale/analysis.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <functional>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace semscale {

namespace {

double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v)
{
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (static_cast<double>(v.size()) - 1.0));
}

double quantile7(Eigen::VectorXd v, double p)
{
  std::sort(v.data(), v.data() + v.size());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  const auto hi = std::min<Eigen::Index>(lo + 1, v.size() - 1);
  return v(lo) + (h - static_cast<double>(lo)) * (v(hi) - v(lo));
}

double golden_max(const std::function<double(double)>& f, double a, double b)
{
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < 100 && b - a > 1e-12 * (1.0 + std::abs(a)); ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double bisect(const std::function<double(double)>& f, double lo, double hi)
{
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::bisect(f, lo, hi, tol, iters);
  return 0.5 * (r.first + r.second);
}

} // namespace

void ScoreSeries::validate() const
{
  if (static_cast<Eigen::Index>(author_ids.size()) != values.size())
    throw DataError("score series '" + label + "' has mismatched lengths");
  if (!values.allFinite())
    throw DataError("score series '" + label + "' contains non-finite values");
}

ScoreSeries read_scores(const std::filesystem::path& path, std::string_view column, std::string label)
{
  const io::CsvTable t = io::read_csv(path);
  if (t.header.size() < 2)
    throw DataError(path.string() + ": expected author_id and a score column");
  const std::size_t a = t.column("author_id");
  const std::size_t v = column.empty() ? (a == 0 ? 1 : 0) : t.column(column);
  ScoreSeries s;
  s.label = label.empty() ? t.header[v] : std::move(label);
  s.values.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    s.author_ids.push_back(t.rows[i].at(a));
    s.values(static_cast<Eigen::Index>(i)) = io::parse_double(t.rows[i].at(v));
  }
  s.validate();
  return s;
}

std::string scores_to_csv(const ScoreSeries& s)
{
  std::string out = "author_id," + io::csv_escape(s.label.empty() ? "score" : s.label) + "\n";
  for (Eigen::Index i = 0; i < s.size(); ++i)
    out += io::csv_escape(s.author_ids[static_cast<std::size_t>(i)]) + ',' + io::format_double(s.values(i)) + '\n';
  return out;
}

std::pair<ScoreSeries, ScoreSeries> align(const ScoreSeries& a, const ScoreSeries& b)
{
  a.validate();
  b.validate();
  std::unordered_map<std::string, Eigen::Index> pos;
  for (std::size_t i = 0; i < b.author_ids.size(); ++i)
    if (!pos.emplace(b.author_ids[i], static_cast<Eigen::Index>(i)).second)
      throw DataError("duplicate author '" + b.author_ids[i] + "' in series '" + b.label + "'");
  ScoreSeries ra{ {}, {}, a.label }, rb{ {}, {}, b.label };
  std::vector<double> va, vb;
  for (std::size_t i = 0; i < a.author_ids.size(); ++i) {
    auto it = pos.find(a.author_ids[i]);
    if (it == pos.end())
      continue;
    ra.author_ids.push_back(a.author_ids[i]);
    rb.author_ids.push_back(a.author_ids[i]);
    va.push_back(a.values(static_cast<Eigen::Index>(i)));
    vb.push_back(b.values(it->second));
  }
  ra.values = Eigen::Map<Eigen::VectorXd>(va.data(), static_cast<Eigen::Index>(va.size()));
  rb.values = Eigen::Map<Eigen::VectorXd>(vb.data(), static_cast<Eigen::Index>(vb.size()));
  return { ra, rb };
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b)
{
  if (a.size() != b.size() || a.size() < 2)
    throw DataError("pearson needs two equal-length series of at least 2 values");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = da.square().sum(), sbb = db.square().sum();
  if (!(saa > 0.0) || !(sbb > 0.0))
    throw NumericalError("correlation undefined: a series has zero variance");
  return std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

Correlation pearson_with_se(const ScoreSeries& a, const ScoreSeries& b)
{
  auto [ra, rb] = align(a, b);
  if (ra.size() < 3)
    throw DataError("pearson_with_se needs at least 3 common authors");
  Correlation c;
  c.n = static_cast<long>(ra.size());
  c.rho = pearson(ra.values, rb.values);
  c.se = std::sqrt(std::max(0.0, 1.0 - c.rho * c.rho) / (static_cast<double>(c.n) - 2.0));
  return c;
}

double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& x)
{
  if (x.size() < 2)
    throw DataError("bandwidth needs at least 2 values");
  const double sd = sample_sd(x);
  const double iqr = quantile7(x, 0.75) - quantile7(x, 0.25);
  double lo = std::min(sd, iqr / 1.34);
  if (!(lo > 0.0))
    lo = sd > 0.0 ? sd : (x(0) != 0.0 ? std::abs(x(0)) : 1.0);
  return 0.9 * lo * std::pow(static_cast<double>(x.size()), -0.2);
}

double kde_density(const Eigen::Ref<const Eigen::VectorXd>& data, double h, double t)
{
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  const Eigen::ArrayXd z = (t - data.array()) / h;
  return inv_sqrt_2pi * (-0.5 * z.square()).exp().sum() / (static_cast<double>(data.size()) * h);
}

double kde_cdf(const Eigen::Ref<const Eigen::VectorXd>& data, double h, double t)
{
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    acc += 0.5 * std::erfc(-(t - data(i)) / (h * std::sqrt(2.0)));
  return acc / static_cast<double>(data.size());
}

KdeSplit kde_split(const Eigen::Ref<const Eigen::VectorXd>& values)
{
  if (values.size() < 50)
    throw DataError("kde_split needs at least 50 scores");
  if (!values.allFinite())
    throw DataError("kde_split: non-finite scores");
  KdeSplit s;
  s.bandwidth = silverman_bandwidth(values);
  const double lo = values.minCoeff() - 3.0 * s.bandwidth;
  const double hi = values.maxCoeff() + 3.0 * s.bandwidth;
  s.grid = Eigen::VectorXd::LinSpaced(kKdeGridPoints, lo, hi);
  s.density.resize(kKdeGridPoints);
  for (int i = 0; i < kKdeGridPoints; ++i)
    s.density(i) = kde_density(values, s.bandwidth, s.grid(i));

  // A mode must rise kMinModeProminence of the peak above the col separating it from higher ground.
  const auto& d = s.density;
  const double min_rise = kMinModeProminence * d.maxCoeff();
  std::vector<int> modes;
  for (int i = 1; i + 1 < kKdeGridPoints; ++i) {
    if (!(d(i) > d(i - 1) && d(i) >= d(i + 1)))
      continue;
    double col = -1.0;
    double low = d(i);
    for (int j = i - 1; j >= 0 && col < 0.0; --j) {
      if (d(j) > d(i))
        col = low;
      low = std::min(low, d(j));
    }
    double col_right = -1.0;
    low = d(i);
    for (int j = i + 1; j < kKdeGridPoints && col_right < 0.0; ++j) {
      if (d(j) > d(i))
        col_right = low;
      low = std::min(low, d(j));
    }
    col = std::max({ col, col_right, 0.0 });
    if (d(i) - col >= min_rise)
      modes.push_back(i);
  }
  if (modes.size() < 2)
    throw NumericalError("density is unimodal; no split between modes");
  std::vector<int> top = modes;
  std::partial_sort(top.begin(), top.begin() + 2, top.end(),
                    [&](int a, int b) { return s.density(a) > s.density(b) || (s.density(a) == s.density(b) && a < b); });
  int a = std::min(top[0], top[1]), b = std::max(top[0], top[1]);
  int m = a + 1;
  for (int i = a + 1; i < b; ++i)
    if (s.density(i) < s.density(m))
      m = i;

  auto f = [&](double t) { return kde_density(values, s.bandwidth, t); };
  auto neg = [&](double t) { return -f(t); };
  s.left_peak = golden_max(f, s.grid(a - 1), s.grid(a + 1));
  s.right_peak = golden_max(f, s.grid(b - 1), s.grid(b + 1));
  s.minimum = golden_max(neg, s.grid(m - 1), s.grid(m + 1));
  return s;
}

KdeSplit kde_split(const ScoreSeries& scores)
{
  scores.validate();
  return kde_split(scores.values);
}

std::string_view to_string(Ideology l)
{
  switch (l) {
    case Ideology::liberal:
      return "liberal";
    case Ideology::moderate:
      return "moderate";
    case Ideology::conservative:
      return "conservative";
  }
  return "moderate";
}

Ideology parse_ideology(std::string_view s)
{
  if (s == "liberal")
    return Ideology::liberal;
  if (s == "moderate")
    return Ideology::moderate;
  if (s == "conservative")
    return Ideology::conservative;
  throw DataError("unknown ideology label '" + std::string(s) + "'");
}

ModerateBand moderate_band(const Eigen::Ref<const Eigen::VectorXd>& values, const KdeSplit& split, double fraction)
{
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("moderate fraction must lie in (0, 1)");
  if (!(split.left_peak < split.minimum && split.minimum < split.right_peak))
    throw NumericalError("split minimum does not lie between its peaks");
  const double h = split.bandwidth;
  auto cdf = [&](double t) { return kde_cdf(values, h, t); };
  const double at_min = cdf(split.minimum);
  const double left_area = at_min - cdf(split.left_peak);
  const double right_area = cdf(split.right_peak) - at_min;
  ModerateBand band;
  band.lower = bisect([&](double t) { return (at_min - cdf(t)) - fraction * left_area; }, split.left_peak,
                      split.minimum);
  band.upper = bisect([&](double t) { return (cdf(t) - at_min) - fraction * right_area; }, split.minimum,
                      split.right_peak);
  return band;
}

std::vector<IdeologyLabel> classify_moderates(const ScoreSeries& scores, const KdeSplit& split, double fraction)
{
  scores.validate();
  const ModerateBand band = moderate_band(scores.values, split, fraction);
  std::vector<IdeologyLabel> out;
  out.reserve(scores.author_ids.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double v = scores.values(i);
    Ideology l = Ideology::moderate;
    if (v < band.lower)
      l = Ideology::liberal;
    else if (v > band.upper)
      l = Ideology::conservative;
    out.push_back({ scores.author_ids[static_cast<std::size_t>(i)], l });
  }
  return out;
}

std::vector<IdeologyLabel> read_labels_csv(const std::filesystem::path& path)
{
  const io::CsvTable t = io::read_csv(path);
  const std::size_t a = t.column("author_id"), l = t.column("label");
  std::vector<IdeologyLabel> out;
  for (const auto& row : t.rows)
    out.push_back({ row.at(a), parse_ideology(row.at(l)) });
  return out;
}

std::string labels_to_csv(const std::vector<IdeologyLabel>& labels)
{
  std::string out = "author_id,label\n";
  for (const auto& l : labels)
    out += io::csv_escape(l.author_id) + ',' + std::string(to_string(l.label)) + '\n';
  return out;
}

Eigen::Matrix3i confusion_matrix(const std::vector<IdeologyLabel>& a, const std::vector<IdeologyLabel>& b)
{
  std::unordered_map<std::string, Ideology> lb;
  for (const auto& l : b)
    if (!lb.emplace(l.author_id, l.label).second)
      throw DataError("duplicate author '" + l.author_id + "' in labeling");
  if (a.size() != b.size())
    throw DataError("labelings cover different author sets");
  Eigen::Matrix3i m = Eigen::Matrix3i::Zero();
  std::unordered_map<std::string, bool> seen;
  for (const auto& l : a) {
    auto it = lb.find(l.author_id);
    if (it == lb.end())
      throw DataError("author '" + l.author_id + "' missing from the second labeling");
    if (!seen.emplace(l.author_id, true).second)
      throw DataError("duplicate author '" + l.author_id + "' in labeling");
    m(static_cast<int>(l.label), static_cast<int>(it->second)) += 1;
  }
  return m;
}

ExpectedCountTest expected_count_test(const Eigen::Matrix3i& matrix, int row, int col, double level)
{
  constexpr int mod = 1;
  if (row < 0 || row > 2 || col < 0 || col > 2)
    throw ConfigError("expected_count_test: cell index out of range");
  if ((row == mod) == (col == mod))
    throw ConfigError("expected_count_test: exactly one of row and column must be the moderate label");
  if ((matrix.array() < 0).any())
    throw DataError("expected_count_test: negative counts");

  ExpectedCountTest t;
  int target = 0;
  double target_marg = 0.0, other_marg = 0.0;
  if (row == mod) {
    target = col;
    t.trials = matrix.row(mod).sum() - matrix(mod, mod);
    target_marg = matrix.col(target).sum();
    other_marg = matrix.col(2 - target).sum();
  } else {
    target = row;
    t.trials = matrix.col(mod).sum() - matrix(mod, mod);
    target_marg = matrix.row(target).sum();
    other_marg = matrix.row(2 - target).sum();
  }
  t.observed = matrix(row, col);
  if (t.trials <= 0 || target_marg <= 0.0 || other_marg + target_marg <= 0.0)
    throw NumericalError("expected_count_test: degenerate test (zero marginal)");
  t.share = target_marg / (target_marg + other_marg);
  const double n = static_cast<double>(t.trials);
  t.expected = n * t.share;
  const double var = n * t.share * (1.0 - t.share);
  const double tail = 0.5 * (1.0 - level);
  if (var >= 25.0) {
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - tail);
    t.ci_low = t.expected - z * std::sqrt(var);
    t.ci_high = t.expected + z * std::sqrt(var);
  } else {
    t.exact = true;
    // Equal-tail limits: at most `tail` of the mass lies strictly outside each one.
    const boost::math::binomial_distribution<double> dist(n, t.share);
    long lo = 0;
    while (lo < t.trials && boost::math::cdf(dist, static_cast<double>(lo)) <= tail)
      ++lo;
    long hi = t.trials;
    while (hi > 0 && boost::math::cdf(boost::math::complement(dist, static_cast<double>(hi - 1))) <= tail)
      --hi;
    t.ci_low = static_cast<double>(lo);
    t.ci_high = static_cast<double>(hi);
  }
  const double obs = static_cast<double>(t.observed);
  t.rejected = obs < t.ci_low || obs > t.ci_high;
  return t;
}

int quadrant(double x, double y, double x_axis, double y_axis)
{
  const bool right = x >= x_axis, up = y >= y_axis;
  if (right && up)
    return 1;
  if (!right && up)
    return 2;
  if (!right)
    return 3;
  return 4;
}

ResidualSelection top_residual_selection(const ScoreSeries& x, const ScoreSeries& y, int count,
                                         std::optional<double> x_axis, std::optional<double> y_axis)
{
  auto [ax, ay] = align(x, y);
  const Eigen::Index n = ax.size();
  if (count < 0 || count > n)
    throw ConfigError("residual count must lie in [0, n]");
  if (n < 2)
    throw DataError("top_residual_selection needs at least 2 common authors");
  const Eigen::ArrayXd dx = ax.values.array() - ax.values.mean();
  const double sxx = dx.square().sum();
  if (!(sxx > 0.0))
    throw NumericalError("OLS undefined: x has zero variance");
  ResidualSelection sel;
  sel.slope = (dx * (ay.values.array() - ay.values.mean())).sum() / sxx;
  sel.intercept = ay.values.mean() - sel.slope * ax.values.mean();
  sel.x_axis = x_axis ? *x_axis : kde_split(ax.values).minimum;
  sel.y_axis = y_axis ? *y_axis : kde_split(ay.values).minimum;

  Eigen::VectorXd res = ay.values.array() - (sel.intercept + sel.slope * ax.values.array());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(res(a)) > std::abs(res(b)); });
  for (int i = 0; i < count; ++i) {
    const Eigen::Index k = order[static_cast<std::size_t>(i)];
    Residual r;
    r.author_id = ax.author_ids[static_cast<std::size_t>(k)];
    r.x = ax.values(k);
    r.y = ay.values(k);
    r.residual = res(k);
    r.quadrant = quadrant(r.x, r.y, sel.x_axis, sel.y_axis);
    sel.quadrant_counts[static_cast<std::size_t>(r.quadrant - 1)] += 1;
    sel.top.push_back(std::move(r));
  }
  return sel;
}

std::string residuals_to_csv(const ResidualSelection& sel)
{
  std::string out = "author_id,x,y,residual,quadrant\n";
  for (const auto& r : sel.top)
    out += io::csv_escape(r.author_id) + ',' + io::format_double(r.x) + ',' + io::format_double(r.y) + ',' +
           io::format_double(r.residual) + ',' + std::to_string(r.quadrant) + '\n';
  return out;
}

ScoreSeries thermometer(const ScoreSeries& scores)
{
  scores.validate();
  if (scores.size() < 2)
    throw DataError("thermometer needs at least 2 scores");
  const double lo = scores.values.minCoeff(), hi = scores.values.maxCoeff();
  if (!(hi > lo))
    throw NumericalError("thermometer: scores have a degenerate range");
  ScoreSeries out = scores;
  out.values = 100.0 * (scores.values.array() - lo) / (hi - lo);
  out.values = out.values.cwiseMax(0.0).cwiseMin(100.0);
  return out;
}

} // namespace semscale
