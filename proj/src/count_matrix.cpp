#include "semscale/count_matrix.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <unordered_map>

namespace semscale {

std::string_view to_string(Parameterization p)
{
  return p == Parameterization::total ? "total" : "per_item";
}

Parameterization parse_parameterization(std::string_view s)
{
  if (s == "total")
    return Parameterization::total;
  if (s == "per_item")
    return Parameterization::per_item;
  throw ConfigError("unknown parameterization '" + std::string(s) + "'");
}

Eigen::MatrixXi CountMatrix::trials() const
{
  if (parameterization == Parameterization::per_item) {
    if (!y_item)
      throw DataError("per_item matrix without per-item totals");
    return *y_item;
  }
  return y.replicate(1, x.cols());
}

bool CountMatrix::is_conservative_column(Eigen::Index j) const
{
  const auto& id = column_ids.at(static_cast<std::size_t>(j));
  return id.size() >= kConservativeSuffix.size() &&
         id.compare(id.size() - kConservativeSuffix.size(), kConservativeSuffix.size(), kConservativeSuffix) == 0;
}

std::string CountMatrix::column_group(Eigen::Index j) const
{
  const auto& id = column_ids.at(static_cast<std::size_t>(j));
  auto slash = id.rfind('/');
  return slash == std::string::npos ? id : id.substr(0, slash);
}

Eigen::VectorXi CountMatrix::conservative_totals() const
{
  Eigen::VectorXi out = Eigen::VectorXi::Zero(n());
  for (Eigen::Index j = 0; j < k(); ++j)
    if (is_conservative_column(j))
      out += x.col(j);
  return out;
}

Eigen::VectorXi CountMatrix::liberal_totals() const
{
  Eigen::VectorXi out = Eigen::VectorXi::Zero(n());
  for (Eigen::Index j = 0; j < k(); ++j)
    if (!is_conservative_column(j))
      out += x.col(j);
  return out;
}

void CountMatrix::validate() const
{
  if (static_cast<std::size_t>(x.rows()) != author_ids.size() || y.size() != x.rows())
    throw DataError("count matrix row count mismatch");
  if (static_cast<std::size_t>(x.cols()) != column_ids.size())
    throw DataError("count matrix column count mismatch");
  if (x.size() > 0 && x.minCoeff() < 0)
    throw DataError("negative count in matrix");
  if (y.size() > 0 && y.minCoeff() <= 0)
    throw DataError("author with no documents in matrix");
  if (parameterization == Parameterization::per_item &&
      (!y_item || y_item->rows() != x.rows() || y_item->cols() != x.cols()))
    throw DataError("per_item matrix needs per-item totals of matching shape");
  Eigen::MatrixXi t = trials();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (x(i, j) > t(i, j))
        throw DataError("count exceeds trials for author " + author_ids[static_cast<std::size_t>(i)] +
                        ", column " + column_ids[static_cast<std::size_t>(j)]);
}

MatrixBuild build_count_matrix(const std::vector<StanceLabel>& labels,
                               const std::vector<TaggedDocument>& docs,
                               const MatrixOptions& options,
                               const ItemCatalog* catalog)
{
  MatrixBuild out;
  std::unordered_map<std::string, const TaggedDocument*> by_id;
  for (const auto& d : docs)
    if (!by_id.emplace(d.document.doc_id, &d).second)
      throw DataError("duplicate doc_id '" + d.document.doc_id + "'");

  // Groups and their scales.
  std::vector<std::string> groups;
  std::map<std::string, std::string> scale_of;
  auto group_of = [&](const std::string& item) { return catalog ? catalog->group_of(item) : item; };
  if (catalog) {
    groups = catalog->groups();
    for (const auto& g : groups)
      scale_of[g] = catalog->scale_of_group(g);
  } else {
    std::set<std::string> ids;
    for (const auto& d : docs)
      ids.insert(d.item_ids.begin(), d.item_ids.end());
    groups.assign(ids.begin(), ids.end());
    for (const auto& g : groups)
      scale_of[g] = "default";
  }
  std::map<std::string, std::size_t> group_index;
  for (std::size_t g = 0; g < groups.size(); ++g)
    group_index[groups[g]] = g;

  // Resolve (doc, group) -> stance votes.
  std::map<std::pair<std::string, std::string>, std::array<int, 3>> votes;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& l : labels) {
    auto it = by_id.find(l.doc_id);
    if (it == by_id.end())
      throw DataError("label references unknown document '" + l.doc_id + "'");
    if (!it->second->item_ids.count(l.item_id))
      throw DataError("label for document '" + l.doc_id + "' on untagged item '" + l.item_id + "'");
    if (!seen.emplace(l.doc_id, l.item_id).second)
      throw DataError("duplicate label for ('" + l.doc_id + "', '" + l.item_id + "')");
    auto g = group_of(l.item_id);
    if (!group_index.count(g))
      throw DataError("label item '" + l.item_id + "' maps to no known group");
    auto& v = votes[{ l.doc_id, g }];
    v[static_cast<int>(l.label)] += 1;
  }

  struct AuthorAcc
  {
    int docs = 0;
    std::vector<int> lib, con, total;
    std::map<std::string, std::set<std::string>> scale_docs;
  };
  std::map<std::string, AuthorAcc> authors;
  for (const auto& d : docs) {
    auto& a = authors[d.document.author_id];
    if (a.lib.empty()) {
      a.lib.assign(groups.size(), 0);
      a.con.assign(groups.size(), 0);
      a.total.assign(groups.size(), 0);
    }
    a.docs += 1;
  }
  for (const auto& [key, v] : votes) {
    const auto& [doc_id, g] = key;
    const auto& author = by_id.at(doc_id)->document.author_id;
    auto& a = authors.at(author);
    int best = 0;
    for (int s = 1; s < 3; ++s)
      if (v[s] > v[best])
        best = s;
    auto gi = group_index.at(g);
    a.total[gi] += 1;
    if (best == static_cast<int>(Stance::conservative))
      a.con[gi] += 1;
    else if (best == static_cast<int>(Stance::liberal))
      a.lib[gi] += 1;
    a.scale_docs[scale_of.at(g)].insert(doc_id);
  }

  std::set<std::string> scales;
  for (const auto& g : groups)
    scales.insert(scale_of.at(g));

  std::vector<std::string> kept;
  std::size_t below_activity = 0;
  std::size_t empty_rows = 0;
  for (const auto& [id, a] : authors) {
    if (a.docs == 0) {
      ++empty_rows;
      continue;
    }
    if (options.parameterization == Parameterization::per_item &&
        std::all_of(a.total.begin(), a.total.end(), [](int t) { return t == 0; })) {
      ++empty_rows;
      continue;
    }
    bool active = true;
    if (options.min_activity > 0)
      for (const auto& s : scales) {
        auto it = a.scale_docs.find(s);
        int c = it == a.scale_docs.end() ? 0 : static_cast<int>(it->second.size());
        if (c < options.min_activity)
          active = false;
      }
    if (!active) {
      ++below_activity;
      continue;
    }
    kept.push_back(id);
  }
  if (empty_rows)
    out.warnings.push_back("excluded " + std::to_string(empty_rows) + " author(s) with zero trials");
  if (below_activity)
    out.warnings.push_back("excluded " + std::to_string(below_activity) + " author(s) below min_activity " +
                           std::to_string(options.min_activity));

  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto kfull = static_cast<Eigen::Index>(2 * groups.size());
  Eigen::MatrixXi x(n, kfull);
  Eigen::MatrixXi yi(n, kfull);
  Eigen::VectorXi y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = authors.at(kept[static_cast<std::size_t>(i)]);
    y(i) = a.docs;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      auto c = static_cast<Eigen::Index>(2 * g);
      x(i, c) = a.lib[g];
      x(i, c + 1) = a.con[g];
      yi(i, c) = a.total[g];
      yi(i, c + 1) = a.total[g];
    }
  }

  std::vector<Eigen::Index> cols;
  std::vector<std::string> dropped;
  for (Eigen::Index c = 0; c < kfull; ++c) {
    auto g = groups[static_cast<std::size_t>(c / 2)];
    auto id = g + std::string(c % 2 == 0 ? kLiberalSuffix : kConservativeSuffix);
    if (n > 0 && x.col(c).sum() > 0) {
      cols.push_back(c);
      out.matrix.column_ids.push_back(id);
    } else {
      dropped.push_back(id);
    }
  }
  if (!dropped.empty()) {
    std::string msg = "dropped " + std::to_string(dropped.size()) + " all-zero column(s):";
    for (const auto& d : dropped)
      msg += " " + d;
    out.warnings.push_back(msg);
  }

  auto& m = out.matrix;
  m.author_ids = kept;
  m.parameterization = options.parameterization;
  m.y = y;
  m.x.resize(n, static_cast<Eigen::Index>(cols.size()));
  Eigen::MatrixXi yk(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    m.x.col(static_cast<Eigen::Index>(c)) = x.col(cols[c]);
    yk.col(static_cast<Eigen::Index>(c)) = yi.col(cols[c]);
  }
  if (options.parameterization == Parameterization::per_item)
    m.y_item = yk;
  m.validate();
  return out;
}

namespace {

// Groups in column order, each once.
std::vector<std::pair<std::string, Eigen::Index>> group_columns(const CountMatrix& m)
{
  std::vector<std::pair<std::string, Eigen::Index>> out;
  for (Eigen::Index j = 0; j < m.k(); ++j) {
    auto g = m.column_group(j);
    if (std::none_of(out.begin(), out.end(), [&](const auto& p) { return p.first == g; }))
      out.emplace_back(g, j);
  }
  return out;
}

} // namespace

std::string count_matrix_to_csv(const CountMatrix& m)
{
  io::CsvTable t;
  t.header.push_back("author_id");
  t.header.insert(t.header.end(), m.column_ids.begin(), m.column_ids.end());
  auto gcols = group_columns(m);
  if (m.parameterization == Parameterization::per_item)
    for (const auto& [g, j] : gcols)
      t.header.push_back(g + "/n");
  t.header.push_back("y");
  for (Eigen::Index i = 0; i < m.n(); ++i) {
    std::vector<std::string> row{ m.author_ids[static_cast<std::size_t>(i)] };
    for (Eigen::Index j = 0; j < m.k(); ++j)
      row.push_back(std::to_string(m.x(i, j)));
    if (m.parameterization == Parameterization::per_item)
      for (const auto& [g, j] : gcols)
        row.push_back(std::to_string((*m.y_item)(i, j)));
    row.push_back(std::to_string(m.y(i)));
    t.rows.push_back(std::move(row));
  }
  return io::to_csv(t);
}

CountMatrix count_matrix_from_csv(const io::CsvTable& t)
{
  if (t.header.size() < 2 || t.header.front() != "author_id" || t.header.back() != "y")
    throw DataError("count matrix CSV must start with author_id and end with y");
  CountMatrix m;
  std::vector<std::size_t> xcols, ncols;
  for (std::size_t c = 1; c + 1 < t.header.size(); ++c) {
    const auto& h = t.header[c];
    if (h.size() > 2 && h.compare(h.size() - 2, 2, "/n") == 0)
      ncols.push_back(c);
    else
      xcols.push_back(c);
  }
  m.column_ids.reserve(xcols.size());
  for (auto c : xcols)
    m.column_ids.push_back(t.header[c]);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto k = static_cast<Eigen::Index>(xcols.size());
  m.x.resize(n, k);
  m.y.resize(n);
  std::map<std::string, std::size_t> ncol_of;
  for (auto c : ncols)
    ncol_of[t.header[c].substr(0, t.header[c].size() - 2)] = c;
  if (!ncols.empty()) {
    m.parameterization = Parameterization::per_item;
    m.y_item = Eigen::MatrixXi(n, k);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    m.author_ids.push_back(row[0]);
    for (Eigen::Index j = 0; j < k; ++j)
      m.x(i, j) = static_cast<int>(io::parse_int(row[xcols[static_cast<std::size_t>(j)]]));
    m.y(i) = static_cast<int>(io::parse_int(row.back()));
    if (m.y_item)
      for (Eigen::Index j = 0; j < k; ++j) {
        auto it = ncol_of.find(m.column_group(j));
        if (it == ncol_of.end())
          throw DataError("per-item total missing for " + m.column_ids[static_cast<std::size_t>(j)]);
        (*m.y_item)(i, j) = static_cast<int>(io::parse_int(row[it->second]));
      }
  }
  m.validate();
  return m;
}

CountMatrix read_count_matrix(const std::filesystem::path& path)
{
  return count_matrix_from_csv(io::read_csv(path));
}

CountMatrix select_groups(const CountMatrix& m, const std::vector<std::string>& groups)
{
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < m.k(); ++j)
    if (std::find(groups.begin(), groups.end(), m.column_group(j)) != groups.end())
      cols.push_back(j);
  if (cols.empty())
    throw DataError("no matrix columns belong to the selected groups");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < m.n(); ++i) {
    int labeled = 0;
    for (Eigen::Index j : cols)
      labeled += m.x(i, j);
    if (labeled > 0)
      rows.push_back(i);
  }
  if (rows.empty())
    throw DataError("no author has labeled documents in the selected groups");
  CountMatrix out;
  out.parameterization = m.parameterization;
  const auto n = static_cast<Eigen::Index>(rows.size()), k = static_cast<Eigen::Index>(cols.size());
  out.x.resize(n, k);
  out.y.resize(n);
  if (m.y_item)
    out.y_item = Eigen::MatrixXi(n, k);
  for (Eigen::Index j = 0; j < k; ++j)
    out.column_ids.push_back(m.column_ids[static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])]);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    out.author_ids.push_back(m.author_ids[static_cast<std::size_t>(i)]);
    out.y(r) = m.y(i);
    for (Eigen::Index j = 0; j < k; ++j) {
      out.x(r, j) = m.x(i, cols[static_cast<std::size_t>(j)]);
      if (m.y_item)
        (*out.y_item)(r, j) = (*m.y_item)(i, cols[static_cast<std::size_t>(j)]);
    }
  }
  out.validate();
  return out;
}

} // namespace semscale
