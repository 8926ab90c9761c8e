#include "semscale/synth.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"
#include "semscale/sampler.hpp"
#include "semscale/scale_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace semscale {

namespace {

std::string pad_id(const std::string& prefix, int i, int count)
{
  const int width = std::max(2, static_cast<int>(std::to_string(std::max(1, count)).size()));
  std::string s = std::to_string(i + 1);
  return prefix + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

int draw_doc_count(const DocCountSpec& spec, std::mt19937_64& rng)
{
  const double m = spec.mean - 1.0;
  if (m <= 0.0)
    return 1;
  double lambda = m;
  if (spec.family == DocCountFamily::negative_binomial) {
    std::gamma_distribution<double> g(spec.dispersion, m / spec.dispersion);
    lambda = g(rng);
  }
  if (lambda <= 0.0)
    return 1;
  std::poisson_distribution<long long> p(lambda);
  const long long z = p(rng);
  return static_cast<int>(std::min<long long>(z, 1LL << 30)) + 1;
}

int draw_binomial(int trials, double p, std::mt19937_64& rng)
{
  if (trials <= 0 || p <= 0.0)
    return 0;
  if (p >= 1.0)
    return trials;
  std::binomial_distribution<int> b(trials, p);
  return b(rng);
}

} // namespace

void SynthConfig::validate() const
{
  if (n_authors < 0 || n_items < 0)
    throw ConfigError("synth: n_authors and n_items must be nonnegative");
  if (!(mixture.sd_left > 0.0) || !(mixture.sd_right > 0.0))
    throw ConfigError("synth: mixture sds must be positive");
  if (!(mixture.weight_left > 0.0 && mixture.weight_left < 1.0))
    throw ConfigError("synth: mixture weight must lie in (0, 1)");
  if (!(doc_count.mean >= 1.0))
    throw ConfigError("synth: mean document count must be at least 1");
  if (doc_count.family == DocCountFamily::negative_binomial && !(doc_count.dispersion > 0.0))
    throw ConfigError("synth: dispersion must be positive");
  if (!(delta.sd >= 0.0) || !(alpha.sd >= 0.0))
    throw ConfigError("synth: item parameter sds must be nonnegative");
  if (!(label_flip_rate >= 0.0 && label_flip_rate <= 0.5))
    throw ConfigError("synth: label flip rate must lie in [0, 0.5]");
}

SynthConfig default_synth_config()
{
  return SynthConfig{};
}

SynthTruth generate(const SynthConfig& config)
{
  config.validate();
  const int n = config.n_authors, g = config.n_items, k = 2 * g;
  SynthTruth t;
  t.theta_true.resize(n);
  t.delta_true.resize(k);
  t.alpha_true.resize(k);

  std::mt19937_64 item_rng(chain_seed(config.seed, -1));
  std::normal_distribution<double> nd(config.delta.mean, config.delta.sd);
  std::normal_distribution<double> na(config.alpha.mean, config.alpha.sd);
  for (int j = 0; j < g; ++j) {
    t.groups.push_back(pad_id("item", j, g));
    const double dl = nd(item_rng), dc = nd(item_rng);
    const double al = na(item_rng), ac = na(item_rng);
    t.delta_true(2 * j) = (j == 0 && config.heavy_item_delta) ? *config.heavy_item_delta : dl;
    t.delta_true(2 * j + 1) = (j == 0 && config.heavy_item_delta) ? *config.heavy_item_delta : dc;
    t.alpha_true(2 * j) = -std::abs(al);
    t.alpha_true(2 * j + 1) = std::abs(ac);
  }

  CountMatrix& m = t.matrix;
  m.parameterization = Parameterization::total;
  m.x = Eigen::MatrixXi::Zero(n, k);
  m.y.resize(n);
  for (int j = 0; j < g; ++j) {
    m.column_ids.push_back(t.groups[static_cast<std::size_t>(j)] + std::string(kLiberalSuffix));
    m.column_ids.push_back(t.groups[static_cast<std::size_t>(j)] + std::string(kConservativeSuffix));
  }
  for (int i = 0; i < n; ++i) {
    m.author_ids.push_back(pad_id("a", i, n));
    std::mt19937_64 rng(chain_seed(config.seed, i));
    std::bernoulli_distribution left(config.mixture.weight_left);
    std::normal_distribution<double> z(0.0, 1.0);
    const bool is_left = left(rng);
    const double theta = is_left ? config.mixture.mean_left + config.mixture.sd_left * z(rng)
                                 : config.mixture.mean_right + config.mixture.sd_right * z(rng);
    t.theta_true(i) = theta;
    const int y = draw_doc_count(config.doc_count, rng);
    m.y(i) = y;
    for (int j = 0; j < g; ++j) {
      const int lib = 2 * j, con = 2 * j + 1;
      int xc = draw_binomial(y, response_prob(t.delta_true(con), t.alpha_true(con), theta), rng);
      int xl = draw_binomial(y, response_prob(t.delta_true(lib), t.alpha_true(lib), theta), rng);
      xl = std::min(xl, y - xc);
      if (config.label_flip_rate > 0.0) {
        const int fc = draw_binomial(xc, config.label_flip_rate, rng);
        const int fl = draw_binomial(xl, config.label_flip_rate, rng);
        xc += fl - fc;
        xl += fc - fl;
      }
      m.x(i, con) = xc;
      m.x(i, lib) = xl;
    }
  }
  m.validate();
  return t;
}

std::string truth_authors_csv(const SynthTruth& truth)
{
  std::string out = "author_id,theta,y\n";
  for (std::size_t i = 0; i < truth.matrix.author_ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out += io::csv_escape(truth.matrix.author_ids[i]) + ',' + io::format_double(truth.theta_true(r)) + ',' +
           std::to_string(truth.matrix.y(r)) + '\n';
  }
  return out;
}

std::string truth_items_csv(const SynthTruth& truth)
{
  std::string out = "column_id,delta,alpha\n";
  for (std::size_t j = 0; j < truth.matrix.column_ids.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    out += io::csv_escape(truth.matrix.column_ids[j]) + ',' + io::format_double(truth.delta_true(c)) + ',' +
           io::format_double(truth.alpha_true(c)) + '\n';
  }
  return out;
}

std::string synth_keyword(const std::string& group)
{
  return "topic" + group.substr(group.find_first_of("0123456789"));
}

namespace {

// Even items are framed so that supporting the keyword is the conservative stance.
Stance support_side(std::size_t item)
{
  return item % 2 == 0 ? Stance::conservative : Stance::liberal;
}

} // namespace

ItemCatalog synth_catalog(const SynthTruth& truth)
{
  std::vector<ItemSpec> items;
  for (std::size_t j = 0; j < truth.groups.size(); ++j) {
    const std::string& gid = truth.groups[j];
    ItemSpec s;
    s.id = gid;
    s.group = gid;
    s.scale = "synthetic";
    s.rule = KeywordRule{ gid, { synth_keyword(gid) }, MatchMode::word_boundary };
    s.hypotheses = expand_hypotheses(gid, kDefaultAffectTemplate, synth_keyword(gid), support_side(j));
    items.push_back(std::move(s));
  }
  return ItemCatalog(std::move(items));
}

std::vector<MockRule> synth_mock_rules(const SynthTruth& truth, const DocumentTemplates& templates)
{
  std::vector<MockRule> rules;
  for (std::size_t j = 0; j < truth.groups.size(); ++j) {
    const std::string& gid = truth.groups[j];
    const Stance on_support = support_side(j);
    const Stance on_oppose = on_support == Stance::conservative ? Stance::liberal : Stance::conservative;
    for (const auto& p : templates.support_phrases)
      rules.push_back({ p + " " + synth_keyword(gid), gid, on_support });
    for (const auto& p : templates.oppose_phrases)
      rules.push_back({ p + " " + synth_keyword(gid), gid, on_oppose });
  }
  return rules;
}

std::vector<Document> generate_documents(const SynthTruth& truth, const DocumentTemplates& templates,
                                         std::uint64_t seed)
{
  if (templates.support_phrases.empty() || templates.oppose_phrases.empty() || templates.neutral_sentences.empty())
    throw ConfigError("document templates need support, oppose and neutral phrases");
  if (templates.filler_min < 0 || templates.filler_max < templates.filler_min)
    throw ConfigError("document templates: invalid filler range");
  if (templates.filler_max > 0 && templates.filler_words.empty())
    throw ConfigError("document templates: filler words missing");
  const CountMatrix& m = truth.matrix;
  if (static_cast<Eigen::Index>(truth.groups.size()) * 2 != m.k())
    throw ConfigError("truth groups do not match the matrix columns");
  std::vector<Document> docs;
  for (Eigen::Index i = 0; i < m.n(); ++i) {
    std::mt19937_64 rng(chain_seed(seed ^ 0x5EED5EED5EED5EEDULL, static_cast<int>(i)));
    const int y = m.y(i);
    std::vector<std::vector<std::string>> sentences(static_cast<std::size_t>(y));
    std::vector<int> load(static_cast<std::size_t>(y), 0);
    std::vector<int> idx(static_cast<std::size_t>(y));
    for (std::size_t j = 0; j < truth.groups.size(); ++j) {
      const std::string kw = synth_keyword(truth.groups[j]);
      const bool support_is_con = support_side(j) == Stance::conservative;
      const int xl = m.x(i, static_cast<Eigen::Index>(2 * j));
      const int xc = m.x(i, static_cast<Eigen::Index>(2 * j + 1));
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return load[static_cast<std::size_t>(a)] < load[static_cast<std::size_t>(b)]; });
      for (int t = 0; t < xc + xl; ++t) {
        const bool con = t < xc;
        const auto& phrases = (con == support_is_con) ? templates.support_phrases : templates.oppose_phrases;
        std::uniform_int_distribution<std::size_t> pick(0, phrases.size() - 1);
        const auto d = static_cast<std::size_t>(idx[static_cast<std::size_t>(t)]);
        sentences[d].push_back(phrases[pick(rng)] + " " + kw);
        ++load[d];
      }
    }
    const double theta = truth.theta_true(i);
    const double p_right = 1.0 / (1.0 + std::exp(-2.0 * theta));
    std::bernoulli_distribution use_lean(templates.lean);
    std::bernoulli_distribution right(p_right);
    std::uniform_int_distribution<int> nfill(templates.filler_min, templates.filler_max);
    for (int d = 0; d < y; ++d) {
      auto& s = sentences[static_cast<std::size_t>(d)];
      if (s.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, templates.neutral_sentences.size() - 1);
        s.push_back(templates.neutral_sentences[pick(rng)]);
      }
      std::string tail;
      const int count = nfill(rng);
      for (int w = 0; w < count; ++w) {
        const std::vector<std::string>* pool = &templates.filler_words;
        if (use_lean(rng)) {
          const bool r = right(rng);
          const auto& lean_pool = r ? templates.right_words : templates.left_words;
          if (!lean_pool.empty())
            pool = &lean_pool;
        }
        std::uniform_int_distribution<std::size_t> pick(0, pool->size() - 1);
        tail += (tail.empty() ? "" : " ") + (*pool)[pick(rng)];
      }
      std::string text;
      for (std::size_t q = 0; q < s.size(); ++q)
        text += (q ? " " : "") + s[q] + (q + 1 == s.size() && !tail.empty() ? " " + tail : std::string()) + ".";
      Document doc;
      doc.doc_id = m.author_ids[static_cast<std::size_t>(i)] + "-" + std::to_string(d + 1);
      doc.author_id = m.author_ids[static_cast<std::size_t>(i)];
      doc.text = std::move(text);
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

WordfishTruth generate_wordfish(const WordfishSynthConfig& config)
{
  if (config.n_authors < 2 || config.n_words < 1)
    throw ConfigError("wordfish synth needs at least 2 authors and 1 word");
  std::mt19937_64 rng(chain_seed(config.seed, 0));
  std::normal_distribution<double> z(0.0, 1.0);
  const Eigen::Index n = config.n_authors, m = config.n_words;
  WordfishTruth t;
  t.omega.resize(n);
  t.author_fe.resize(n);
  t.word_fe.resize(m);
  t.beta.resize(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    t.omega(i) = z(rng);
    t.author_fe(i) = config.author_fe.mean + config.author_fe.sd * z(rng);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    t.word_fe(j) = config.word_fe.mean + config.word_fe.sd * z(rng);
    t.beta(j) = config.beta.mean + config.beta.sd * z(rng);
  }
  Eigen::MatrixXd c(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      std::poisson_distribution<int> p(std::exp(t.author_fe(i) + t.word_fe(j) + t.beta(j) * t.omega(i)));
      c(i, j) = p(rng);
    }
  // Guarantee no empty rows or columns.
  for (Eigen::Index i = 0; i < n; ++i)
    if (c.row(i).sum() == 0.0)
      c(i, 0) = 1.0;
  for (Eigen::Index j = 0; j < m; ++j)
    if (c.col(j).sum() == 0.0)
      c(0, j) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i)
    t.counts.author_ids.push_back(pad_id("w", static_cast<int>(i), static_cast<int>(n)));
  for (Eigen::Index j = 0; j < m; ++j)
    t.counts.vocab.push_back(pad_id("term", static_cast<int>(j), static_cast<int>(m)));
  t.counts.counts = std::move(c);
  t.counts.validate();
  return t;
}

} // namespace semscale
