#include "semscale/wordfish.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace semscale {

void WordCountMatrix::validate() const
{
  if (counts.rows() != static_cast<Eigen::Index>(author_ids.size()) ||
      counts.cols() != static_cast<Eigen::Index>(vocab.size()))
    throw DataError("word count matrix dimensions disagree with its labels");
  if (counts.size() == 0)
    throw DataError("word count matrix is empty");
  if ((counts.array() < 0.0).any())
    throw DataError("word counts must be nonnegative");
  if ((counts.rowwise().sum().array() <= 0.0).any() || (counts.colwise().sum().array() <= 0.0).any())
    throw DataError("word count matrix has an all-zero row or column");
}

WordCountMatrix build_word_counts(const std::vector<Document>& docs, int prune_min_docs)
{
  std::vector<std::vector<std::string>> tokens(docs.size());
  std::map<std::string, int> doc_freq;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::istringstream in(lowercase(normalize_text(docs[d].text)));
    std::set<std::string> seen;
    for (std::string t; in >> t;) {
      tokens[d].push_back(t);
      seen.insert(t);
    }
    for (const auto& t : seen)
      ++doc_freq[t];
  }
  std::map<std::string, Eigen::Index> col;
  for (const auto& [t, f] : doc_freq)
    if (f >= prune_min_docs)
      col.emplace(t, 0);
  if (col.empty())
    throw DataError("vocabulary is empty after pruning terms found in fewer than " + std::to_string(prune_min_docs) +
                    " documents");
  WordCountMatrix w;
  for (auto& [t, j] : col) {
    j = static_cast<Eigen::Index>(w.vocab.size());
    w.vocab.push_back(t);
  }
  std::map<std::string, std::map<Eigen::Index, double>> rows;
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (const auto& t : tokens[d]) {
      auto it = col.find(t);
      if (it != col.end())
        rows[docs[d].author_id][it->second] += 1.0;
    }
  w.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(w.vocab.size()));
  Eigen::Index i = 0;
  for (const auto& [author, cells] : rows) {
    w.author_ids.push_back(author);
    for (const auto& [j, c] : cells)
      w.counts(i, j) = c;
    ++i;
  }
  // Terms used only by dropped authors cannot exist: every counted token belongs to some row.
  w.validate();
  return w;
}

double wordfish_log_likelihood(const Eigen::MatrixXd& counts, const Eigen::VectorXd& author_fe,
                               const Eigen::VectorXd& word_fe, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& omega)
{
  double ll = 0.0;
  for (Eigen::Index j = 0; j < counts.cols(); ++j)
    for (Eigen::Index i = 0; i < counts.rows(); ++i) {
      const double eta = author_fe(i) + word_fe(j) + beta(j) * omega(i);
      const double c = counts(i, j);
      ll += c * eta - std::exp(eta) - std::lgamma(c + 1.0);
    }
  return ll;
}

namespace {

struct State
{
  Eigen::VectorXd a, psi, beta, omega;
};

// Maximizes sum_t c_t (u + z_t v) - exp(o_t + u + z_t v) - v^2 / (2 s^2) over (u, v).
// Returns the new (u, v); never decreases the objective.
std::pair<double, double> newton_pair(const Eigen::Ref<const Eigen::VectorXd>& c,
                                      const Eigen::Ref<const Eigen::VectorXd>& offset,
                                      const Eigen::Ref<const Eigen::VectorXd>& z, double u, double v, double prior_sd,
                                      int steps)
{
  const double prec = 1.0 / (prior_sd * prior_sd);
  auto objective = [&](double uu, double vv) {
    const Eigen::ArrayXd eta = offset.array() + uu + z.array() * vv;
    return (c.array() * eta - eta.exp()).sum() - 0.5 * prec * vv * vv;
  };
  double f = objective(u, v);
  for (int s = 0; s < steps; ++s) {
    const Eigen::ArrayXd lam = (offset.array() + u + z.array() * v).exp();
    const Eigen::ArrayXd r = c.array() - lam;
    const double gu = r.sum();
    const double gv = (r * z.array()).sum() - prec * v;
    const double huu = lam.sum();
    const double huv = (lam * z.array()).sum();
    const double hvv = (lam * z.array().square()).sum() + prec;
    const double det = huu * hvv - huv * huv;
    double du, dv;
    if (det > 1e-300 * std::max(1.0, huu * hvv) && huu > 0.0) {
      du = (hvv * gu - huv * gv) / det;
      dv = (huu * gv - huv * gu) / det;
    } else {
      du = huu > 0.0 ? gu / huu : 0.0;
      dv = gv / hvv;
    }
    if (!std::isfinite(du) || !std::isfinite(dv))
      break;
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      const double fn = objective(u + t * du, v + t * dv);
      if (std::isfinite(fn) && fn >= f) {
        u += t * du;
        v += t * dv;
        moved = fn > f;
        f = fn;
        break;
      }
    }
    if (!moved || std::abs(gu) + std::abs(gv) < 1e-10)
      break;
  }
  return { u, v };
}

double penalized(const Eigen::MatrixXd& c, const State& s, const WordfishConfig& cfg)
{
  return wordfish_log_likelihood(c, s.a, s.psi, s.beta, s.omega) -
         0.5 * s.beta.squaredNorm() / (cfg.beta_prior_sd * cfg.beta_prior_sd) -
         0.5 * s.omega.squaredNorm() / (cfg.omega_prior_sd * cfg.omega_prior_sd);
}

void pin_word_fe(State& s)
{
  const double m = s.psi.mean();
  s.psi.array() -= m;
  s.a.array() += m;
}

// Moves along the likelihood's flat directions to the penalty optimum: omega - mu with psi + beta mu,
// then omega c with beta / c.
void balance(State& s, const WordfishConfig& cfg)
{
  const double mu = s.omega.mean();
  s.psi += s.beta * mu;
  s.omega.array() -= mu;
  const double wo = s.omega.squaredNorm() / (cfg.omega_prior_sd * cfg.omega_prior_sd);
  const double wb = s.beta.squaredNorm() / (cfg.beta_prior_sd * cfg.beta_prior_sd);
  if (wo > 0.0 && wb > 0.0) {
    const double c = std::pow(wb / wo, 0.25);
    s.omega *= c;
    s.beta /= c;
  }
  pin_word_fe(s);
}

State initial_state(const Eigen::MatrixXd& c)
{
  const Eigen::Index n = c.rows(), m = c.cols();
  State s;
  Eigen::VectorXd rs = c.rowwise().sum();
  s.a = rs.array().log();
  s.a.array() -= s.a.mean();
  s.psi = (c.colwise().mean().transpose().array() + 1e-3).log();
  Eigen::MatrixXd z(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      z(i, j) = std::log(c(i, j) + 0.1) - s.a(i) - s.psi(j);
  z.rowwise() -= z.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  s.omega = svd.matrixU().col(0);
  const double mu = s.omega.mean();
  s.omega.array() -= mu;
  double sd = std::sqrt(s.omega.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, n - 1)));
  if (!(sd > 0.0)) {
    s.omega.setZero();
    sd = 1.0;
  }
  s.omega /= sd;
  const double on = s.omega.squaredNorm();
  s.beta = on > 0.0 ? Eigen::VectorXd(z.transpose() * s.omega / on) : Eigen::VectorXd::Zero(m);
  s.beta = s.beta.cwiseMax(-3.0).cwiseMin(3.0);
  pin_word_fe(s);
  return s;
}

} // namespace

WordfishResult fit_wordfish(const WordCountMatrix& counts, const WordfishConfig& config)
{
  counts.validate();
  if (config.max_iter <= 0 || !(config.tol > 0.0) || !(config.beta_prior_sd > 0.0) || !(config.omega_prior_sd > 0.0))
    throw ConfigError("wordfish: max_iter, tol and prior sds must be positive");
  const Eigen::MatrixXd& c = counts.counts;
  const Eigen::Index n = c.rows(), m = c.cols();

  std::size_t anchor = 0;
  if (config.anchor_author) {
    auto it = std::find(counts.author_ids.begin(), counts.author_ids.end(), *config.anchor_author);
    if (it == counts.author_ids.end())
      throw ConfigError("wordfish anchor author '" + *config.anchor_author + "' not in the matrix");
    anchor = static_cast<std::size_t>(it - counts.author_ids.begin());
  } else {
    anchor = static_cast<std::size_t>(std::min_element(counts.author_ids.begin(), counts.author_ids.end()) -
                                      counts.author_ids.begin());
  }

  WordfishResult r;
  State s = initial_state(c);
  double f = penalized(c, s, config);
  r.trace.push_back(f);
  for (int it = 0; it < config.max_iter; ++it) {
    // Word block: (psi_j, beta_j) given authors.
    for (Eigen::Index j = 0; j < m; ++j) {
      auto [u, v] = newton_pair(c.col(j), s.a, s.omega, s.psi(j), s.beta(j), config.beta_prior_sd,
                                config.newton_steps);
      s.psi(j) = u;
      s.beta(j) = v;
    }
    pin_word_fe(s);
    // Author block: (a_i, omega_i) given words.
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [u, v] = newton_pair(c.row(i).transpose(), s.psi, s.beta, s.a(i), s.omega(i), config.omega_prior_sd,
                                config.newton_steps);
      s.a(i) = u;
      s.omega(i) = v;
    }
    balance(s, config);
    const double fn = penalized(c, s, config);
    r.trace.push_back(fn);
    r.iterations = it + 1;
    const double gain = fn - f;
    f = fn;
    if (gain < config.tol * (1.0 + std::abs(fn))) {
      r.converged = true;
      break;
    }
  }

  // Standardize omega; the linear predictor is unchanged.
  const double mu = s.omega.mean();
  const double sd = std::sqrt((s.omega.array() - mu).square().sum() / static_cast<double>(std::max<Eigen::Index>(1, n - 1)));
  if (!(sd > 0.0))
    throw NumericalError("wordfish: estimated positions have zero variance");
  s.psi += s.beta * mu;
  s.omega = (s.omega.array() - mu) / sd;
  s.beta *= sd;
  pin_word_fe(s);
  if (s.omega(static_cast<Eigen::Index>(anchor)) < 0.0) {
    s.omega = -s.omega;
    s.beta = -s.beta;
  }

  r.author_ids = counts.author_ids;
  r.vocab = counts.vocab;
  r.omega = s.omega;
  r.author_fe = s.a;
  r.word_fe = s.psi;
  r.beta = s.beta;
  r.log_likelihood = wordfish_log_likelihood(c, s.a, s.psi, s.beta, s.omega);
  return r;
}

std::string wordfish_authors_csv(const WordfishResult& r)
{
  std::string out = "author_id,omega,fe\n";
  for (std::size_t i = 0; i < r.author_ids.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out += io::csv_escape(r.author_ids[i]) + ',' + io::format_double(r.omega(k)) + ',' +
           io::format_double(r.author_fe(k)) + '\n';
  }
  return out;
}

std::string wordfish_words_csv(const WordfishResult& r)
{
  std::string out = "term,beta,fe\n";
  for (std::size_t j = 0; j < r.vocab.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    out += io::csv_escape(r.vocab[j]) + ',' + io::format_double(r.beta(k)) + ',' + io::format_double(r.word_fe(k)) +
           '\n';
  }
  return out;
}

} // namespace semscale
