#include "semscale/pipeline.hpp"

#include "semscale/classifier.hpp"
#include "semscale/corpus.hpp"
#include "semscale/error.hpp"
#include "semscale/io.hpp"
#include "semscale/items.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <fcntl.h>
#include <fstream>
#include <set>
#include <unistd.h>

namespace semscale {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

namespace {

void check_keys(const YAML::Node& node, const std::string& section, std::initializer_list<std::string_view> allowed)
{
  if (!node)
    return;
  if (!node.IsMap())
    throw ConfigError("config section '" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

template <typename T>
void get(const YAML::Node& node, const char* key, T& out, const std::string& section)
{
  if (!node || !node[key] || node[key].IsNull())
    return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

void get_path(const YAML::Node& node, const char* key, fs::path& out, const std::string& section)
{
  std::string s;
  get(node, key, s, section);
  if (!s.empty())
    out = s;
}

Prior parse_prior(const YAML::Node& node, const std::string& section)
{
  Prior p;
  check_keys(node, section, { "family", "location", "scale" });
  std::string fam;
  get(node, "family", fam, section);
  if (!fam.empty())
    p.family = parse_prior_family(fam);
  get(node, "location", p.location, section);
  get(node, "scale", p.scale, section);
  return p;
}

void parse_normal(const YAML::Node& node, NormalSpec& s, const std::string& section)
{
  check_keys(node, section, { "mean", "sd" });
  get(node, "mean", s.mean, section);
  get(node, "sd", s.sd, section);
}

RunConfig from_yaml(const YAML::Node& root, const fs::path& base)
{
  if (!root.IsMap())
    throw ConfigError("config root must be a mapping");
  check_keys(root, "",
             { "seed", "paths", "corpus", "classifier", "model", "sampler", "map", "diagnostics", "analysis",
               "wordfish", "simulate" });
  RunConfig c;
  c.base_dir = base;
  if (root["seed"] && !root["seed"].IsNull()) {
    try {
      c.seed = root["seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError("seed must be an unsigned integer");
    }
    c.has_seed = true;
  }

  const auto paths = root["paths"];
  check_keys(paths, "paths", { "corpus", "items", "mock_rules", "abbreviations", "output_dir" });
  get_path(paths, "corpus", c.paths.corpus, "paths");
  get_path(paths, "items", c.paths.items, "paths");
  get_path(paths, "mock_rules", c.paths.mock_rules, "paths");
  get_path(paths, "abbreviations", c.paths.abbreviations, "paths");
  get_path(paths, "output_dir", c.paths.output_dir, "paths");

  const auto corpus = root["corpus"];
  check_keys(corpus, "corpus", { "explode_newsletters" });
  get(corpus, "explode_newsletters", c.explode_newsletters, "corpus");

  const auto cl = root["classifier"];
  check_keys(cl, "classifier", { "endpoint", "batch_size", "max_in_flight", "max_retries", "backoff_ms", "timeout_ms" });
  get(cl, "endpoint", c.classifier.endpoint, "classifier");
  get(cl, "batch_size", c.classifier.options.batch_size, "classifier");
  get(cl, "max_in_flight", c.classifier.options.max_in_flight, "classifier");
  get(cl, "max_retries", c.classifier.options.max_retries, "classifier");
  long backoff = c.classifier.options.backoff.count();
  get(cl, "backoff_ms", backoff, "classifier");
  c.classifier.options.backoff = std::chrono::milliseconds(backoff);
  get(cl, "timeout_ms", c.classifier.timeout_ms, "classifier");

  const auto model = root["model"];
  check_keys(model, "model", { "parameterization", "min_activity", "priors", "scale", "theta_prior_from_sign" });
  std::string param;
  get(model, "parameterization", param, "model");
  if (!param.empty())
    c.model.parameterization = parse_parameterization(param);
  get(model, "min_activity", c.model.min_activity, "model");
  get(model, "scale", c.model.scale, "model");
  get(model, "theta_prior_from_sign", c.model.theta_prior_from_sign, "model");
  if (model && model["priors"]) {
    const auto pr = model["priors"];
    check_keys(pr, "model.priors", { "delta", "alpha", "theta" });
    c.model.priors.delta = parse_prior(pr["delta"], "model.priors.delta");
    c.model.priors.alpha = parse_prior(pr["alpha"], "model.priors.alpha");
    c.model.priors.theta = parse_prior(pr["theta"], "model.priors.theta");
  }

  const auto s = root["sampler"];
  check_keys(s, "sampler",
             { "chains", "warmup", "sampling", "max_tree_depth", "target_accept", "threads", "init_jitter",
               "divergence_threshold", "init_buffer", "term_buffer", "base_window", "metric" });
  get(s, "chains", c.sampler.chains, "sampler");
  get(s, "warmup", c.sampler.warmup_iters, "sampler");
  get(s, "sampling", c.sampler.sampling_iters, "sampler");
  get(s, "max_tree_depth", c.sampler.max_tree_depth, "sampler");
  get(s, "target_accept", c.sampler.target_accept, "sampler");
  get(s, "threads", c.sampler.threads, "sampler");
  get(s, "init_jitter", c.init.init_jitter, "sampler");
  get(s, "divergence_threshold", c.sampler.divergence_threshold, "sampler");
  get(s, "init_buffer", c.sampler.init_buffer, "sampler");
  get(s, "term_buffer", c.sampler.term_buffer, "sampler");
  get(s, "base_window", c.sampler.base_window, "sampler");
  std::string metric;
  get(s, "metric", metric, "sampler");
  if (!metric.empty())
    c.sampler.metric = parse_metric_kind(metric);

  const auto mp = root["map"];
  check_keys(mp, "map", { "max_iter", "tol", "history" });
  get(mp, "max_iter", c.map.max_iter, "map");
  get(mp, "tol", c.map.tol, "map");
  get(mp, "history", c.map.history, "map");

  const auto d = root["diagnostics"];
  check_keys(d, "diagnostics",
             { "max_rhat", "min_ess", "max_divergences", "max_depth_saturations", "trace_points", "raftery_q",
               "raftery_r", "raftery_s" });
  get(d, "max_rhat", c.diagnostics.thresholds.max_rhat, "diagnostics");
  get(d, "min_ess", c.diagnostics.thresholds.min_ess, "diagnostics");
  get(d, "max_divergences", c.diagnostics.thresholds.max_divergences, "diagnostics");
  get(d, "max_depth_saturations", c.diagnostics.thresholds.max_depth_saturations, "diagnostics");
  get(d, "trace_points", c.diagnostics.thresholds.trace_points, "diagnostics");
  get(d, "raftery_q", c.diagnostics.raftery_q, "diagnostics");
  get(d, "raftery_r", c.diagnostics.raftery_r, "diagnostics");
  get(d, "raftery_s", c.diagnostics.raftery_s, "diagnostics");

  const auto a = root["analysis"];
  check_keys(a, "analysis", { "estimate", "references", "human_labels", "moderate_fraction", "residual_count" });
  get(a, "estimate", c.analysis.estimate, "analysis");
  get_path(a, "human_labels", c.analysis.human_labels, "analysis");
  get(a, "moderate_fraction", c.analysis.moderate_fraction, "analysis");
  get(a, "residual_count", c.analysis.residual_count, "analysis");
  if (a && a["references"]) {
    if (!a["references"].IsSequence())
      throw ConfigError("analysis.references must be a list");
    for (const auto& r : a["references"]) {
      check_keys(r, "analysis.references[]", { "path", "column", "label" });
      ReferenceScores ref;
      get_path(r, "path", ref.path, "analysis.references");
      get(r, "column", ref.column, "analysis.references");
      get(r, "label", ref.label, "analysis.references");
      if (ref.path.empty())
        throw ConfigError("analysis.references entries need a path");
      if (ref.label.empty())
        ref.label = ref.path.stem().string();
      c.analysis.references.push_back(std::move(ref));
    }
  }

  const auto w = root["wordfish"];
  check_keys(w, "wordfish", { "prune_min_docs", "max_iter", "tol", "anchor_author" });
  get(w, "prune_min_docs", c.wordfish.prune_min_docs, "wordfish");
  get(w, "max_iter", c.wordfish.fit.max_iter, "wordfish");
  get(w, "tol", c.wordfish.fit.tol, "wordfish");
  std::string anchor;
  get(w, "anchor_author", anchor, "wordfish");
  if (!anchor.empty())
    c.wordfish.fit.anchor_author = anchor;

  const auto sim = root["simulate"];
  check_keys(sim, "simulate",
             { "n_authors", "n_items", "mixture", "doc_count", "delta", "alpha", "heavy_item_delta",
               "label_flip_rate", "seed", "documents", "lean" });
  auto& sc = c.simulate.synth;
  get(sim, "n_authors", sc.n_authors, "simulate");
  get(sim, "n_items", sc.n_items, "simulate");
  if (sim && sim["mixture"]) {
    const auto m = sim["mixture"];
    check_keys(m, "simulate.mixture", { "mean_left", "mean_right", "sd_left", "sd_right", "weight_left" });
    get(m, "mean_left", sc.mixture.mean_left, "simulate.mixture");
    get(m, "mean_right", sc.mixture.mean_right, "simulate.mixture");
    get(m, "sd_left", sc.mixture.sd_left, "simulate.mixture");
    get(m, "sd_right", sc.mixture.sd_right, "simulate.mixture");
    get(m, "weight_left", sc.mixture.weight_left, "simulate.mixture");
  }
  if (sim && sim["doc_count"]) {
    const auto dc = sim["doc_count"];
    check_keys(dc, "simulate.doc_count", { "family", "mean", "dispersion" });
    std::string fam;
    get(dc, "family", fam, "simulate.doc_count");
    if (fam == "poisson")
      sc.doc_count.family = DocCountFamily::poisson;
    else if (fam == "negative_binomial")
      sc.doc_count.family = DocCountFamily::negative_binomial;
    else if (!fam.empty())
      throw ConfigError("unknown document count family '" + fam + "'");
    get(dc, "mean", sc.doc_count.mean, "simulate.doc_count");
    get(dc, "dispersion", sc.doc_count.dispersion, "simulate.doc_count");
  }
  if (sim && sim["delta"])
    parse_normal(sim["delta"], sc.delta, "simulate.delta");
  if (sim && sim["alpha"])
    parse_normal(sim["alpha"], sc.alpha, "simulate.alpha");
  if (sim && sim["heavy_item_delta"]) {
    if (sim["heavy_item_delta"].IsNull())
      sc.heavy_item_delta.reset();
    else
      sc.heavy_item_delta = sim["heavy_item_delta"].as<double>();
  }
  get(sim, "label_flip_rate", sc.label_flip_rate, "simulate");
  get(sim, "documents", c.simulate.documents, "simulate");
  get(sim, "lean", c.simulate.templates.lean, "simulate");
  if (sim && sim["seed"])
    get(sim, "seed", sc.seed, "simulate");
  else if (c.has_seed)
    sc.seed = c.seed;

  c.sampler.seed = c.seed;
  return c;
}

YAML::Node apply_override(YAML::Node root, const std::string& spec)
{
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + spec + "' must look like section.key=value");
  const std::string key = spec.substr(0, eq), value = spec.substr(eq + 1);
  std::vector<std::string> parts;
  for (std::size_t start = 0;;) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos)
      break;
    start = dot + 1;
  }
  std::vector<YAML::Node> chain{ root };
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next || next.IsNull())
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
    chain.push_back(chain.back()[parts[i]]);
  }
  chain.back()[parts.back()] = YAML::Load(value);
  return root;
}

} // namespace

fs::path RunConfig::resolve(const fs::path& p) const
{
  if (p.empty() || p.is_absolute())
    return p;
  return (base_dir / p).lexically_normal();
}

fs::path RunConfig::out(const fs::path& rel) const
{
  return resolve(paths.output_dir) / rel;
}

fs::path RunConfig::run_dir() const
{
  return out(fs::path(std::string(to_string(model.parameterization))) / model.scale);
}

fs::path RunConfig::matrix_path() const
{
  return out("matrix_" + std::string(to_string(model.parameterization)) + ".csv");
}

void RunConfig::validate() const
{
  if (!has_seed)
    throw ConfigError("config must set a seed");
  sampler.validate();
  if (model.min_activity < 0)
    throw ConfigError("model.min_activity must be nonnegative");
  for (const Prior* p : { &model.priors.delta, &model.priors.alpha, &model.priors.theta })
    if (!(p->scale > 0.0))
      throw ConfigError("prior scales must be positive");
  if (model.scale.empty())
    throw ConfigError("model.scale must be 'all' or a scale name");
  if (!(init.init_jitter >= 0.0))
    throw ConfigError("sampler.init_jitter must be nonnegative");
  if (map.max_iter <= 0 || !(map.tol > 0.0) || map.history <= 0)
    throw ConfigError("map settings must be positive");
  if (classifier.options.batch_size == 0 || classifier.options.max_in_flight == 0 || classifier.options.max_retries < 0)
    throw ConfigError("classifier batch_size and max_in_flight must be positive");
  if (analysis.estimate != "mcmc" && analysis.estimate != "map")
    throw ConfigError("analysis.estimate must be 'mcmc' or 'map'");
  if (!(analysis.moderate_fraction > 0.0 && analysis.moderate_fraction < 1.0))
    throw ConfigError("analysis.moderate_fraction must lie in (0, 1)");
  if (analysis.residual_count < 0)
    throw ConfigError("analysis.residual_count must be nonnegative");
  if (wordfish.prune_min_docs < 1)
    throw ConfigError("wordfish.prune_min_docs must be positive");
  simulate.synth.validate();
}

RunConfig parse_run_config(std::string_view yaml, const fs::path& base_dir)
{
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  RunConfig c = from_yaml(root, base_dir);
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides)
{
  if (!fs::exists(path))
    throw ConfigError("config file not found: " + path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError(path.string() + ": invalid YAML: " + e.what());
  }
  if (!root || root.IsNull())
    root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides)
    root = apply_override(root, o);
  RunConfig c = from_yaml(root, fs::absolute(path).parent_path());
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path)
{
  return load_run_config(path, {});
}

// ---------------------------------------------------------------- lock

OutputLock::OutputLock(const fs::path& dir)
{
  fs::create_directories(dir);
  path_ = dir / ".semscale.lock";
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    if (errno != EEXIST)
      throw ConfigError("cannot create lock file " + path_.string());
    long holder = 0;
    {
      std::ifstream in(path_);
      in >> holder;
    }
    if (holder > 0 && (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM))
      throw ConfigError("output directory " + dir.string() + " is locked by process " + std::to_string(holder));
    fs::remove(path_); // stale lock
  }
  throw ConfigError("cannot acquire lock " + path_.string());
}

OutputLock::~OutputLock()
{
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------- manifests

namespace {

json prior_json(const Prior& p)
{
  return { { "family", std::string(to_string(p.family)) }, { "location", p.location }, { "scale", p.scale } };
}

json model_json(const RunConfig& c)
{
  return { { "parameterization", std::string(to_string(c.model.parameterization)) },
           { "min_activity", c.model.min_activity },
           { "scale", c.model.scale },
           { "theta_prior_from_sign", c.model.theta_prior_from_sign },
           { "priors",
             { { "delta", prior_json(c.model.priors.delta) },
               { "alpha", prior_json(c.model.priors.alpha) },
               { "theta", prior_json(c.model.priors.theta) } } } };
}

json sampler_json(const RunConfig& c)
{
  const auto& s = c.sampler;
  return { { "chains", s.chains },
           { "warmup", s.warmup_iters },
           { "sampling", s.sampling_iters },
           { "max_tree_depth", s.max_tree_depth },
           { "target_accept", s.target_accept },
           { "divergence_threshold", s.divergence_threshold },
           { "init_buffer", s.init_buffer },
           { "term_buffer", s.term_buffer },
           { "base_window", s.base_window },
           { "metric", std::string(to_string(s.metric)) },
           { "init_jitter", c.init.init_jitter },
           { "seed", s.seed } };
}

json synth_json(const RunConfig& c)
{
  const auto& s = c.simulate.synth;
  json j = { { "n_authors", s.n_authors },
             { "n_items", s.n_items },
             { "mixture",
               { { "mean_left", s.mixture.mean_left },
                 { "mean_right", s.mixture.mean_right },
                 { "sd_left", s.mixture.sd_left },
                 { "sd_right", s.mixture.sd_right },
                 { "weight_left", s.mixture.weight_left } } },
             { "doc_count",
               { { "family", s.doc_count.family == DocCountFamily::poisson ? "poisson" : "negative_binomial" },
                 { "mean", s.doc_count.mean },
                 { "dispersion", s.doc_count.dispersion } } },
             { "delta", { { "mean", s.delta.mean }, { "sd", s.delta.sd } } },
             { "alpha", { { "mean", s.alpha.mean }, { "sd", s.alpha.sd } } },
             { "heavy_item_delta", s.heavy_item_delta ? json(*s.heavy_item_delta) : json(nullptr) },
             { "label_flip_rate", s.label_flip_rate },
             { "seed", s.seed },
             { "documents", c.simulate.documents },
             { "lean", c.simulate.templates.lean } };
  return j;
}

std::string rel_name(const RunConfig& c, const fs::path& p)
{
  const fs::path root = c.resolve(c.paths.output_dir);
  auto r = p.lexically_relative(root);
  if (!r.empty() && r.native().rfind("..", 0) != 0)
    return r.generic_string();
  return p.generic_string();
}

class Stage
{
public:
  Stage(const RunConfig& cfg, std::string name, json config, const StageOptions& opt)
    : cfg_(cfg), name_(std::move(name)), config_(std::move(config)), opt_(opt),
      start_(std::chrono::steady_clock::now())
  {
    result_.stage = name_;
  }

  // A configured input file; absent files are configuration errors.
  void config_input(const fs::path& p, const std::string& what)
  {
    if (p.empty())
      throw ConfigError(name_ + ": " + what + " path is not configured");
    if (!fs::exists(p))
      throw ConfigError(name_ + ": " + what + " not found: " + p.string());
    add_input(p);
  }

  // An artifact produced by an earlier stage.
  void artifact_input(const fs::path& p, const std::string& producer)
  {
    if (!fs::exists(p))
      throw MissingInputError(name_ + ": missing " + p.string() + " (run the '" + producer + "' stage first)");
    add_input(p);
  }

  bool up_to_date(const std::vector<fs::path>& outputs)
  {
    if (opt_.force)
      return false;
    const fs::path mpath = manifest_path();
    if (!fs::exists(mpath))
      return false;
    json m;
    try {
      m = json::parse(io::read_file(mpath));
    } catch (const std::exception&) {
      return false;
    }
    if (m.value("fingerprint", std::string()) != fingerprint())
      return false;
    if (!m.contains("outputs") || m["outputs"].size() != outputs.size())
      return false;
    for (const auto& o : outputs) {
      const auto key = rel_name(cfg_, o);
      if (!fs::exists(o) || !m["outputs"].contains(key) || m["outputs"][key] != hash_path(o))
        return false;
    }
    result_.skipped = true;
    result_.outputs = outputs;
    result_.messages.push_back(name_ + ": up to date");
    return true;
  }

  StageResult finish(const std::vector<fs::path>& outputs)
  {
    const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    m["stage"] = name_;
    m["version"] = std::string(kVersion);
    m["seed"] = cfg_.seed;
    m["config"] = config_;
    m["inputs"] = inputs_;
    json outs = json::object();
    for (const auto& o : outputs)
      outs[rel_name(cfg_, o)] = hash_path(o);
    m["outputs"] = outs;
    m["fingerprint"] = fingerprint();
    m["wall_time_s"] = wall;
    io::write_file(manifest_path(), m.dump(2) + "\n");
    result_.outputs = outputs;
    return result_;
  }

  StageResult skipped() const { return result_; }
  void message(std::string m) { result_.messages.push_back(std::move(m)); }

private:
  static std::string hash_path(const fs::path& p)
  {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file())
          files.push_back(e.path());
      std::sort(files.begin(), files.end());
      std::string acc;
      for (const auto& f : files)
        acc += f.lexically_relative(p).generic_string() + ' ' + io::sha256_file(f) + '\n';
      return io::sha256_hex(acc);
    }
    return io::sha256_file(p);
  }

  void add_input(const fs::path& p) { inputs_[p.generic_string()] = hash_path(p); }

  std::string fingerprint() const
  {
    json f = { { "version", std::string(kVersion) }, { "config", config_ }, { "inputs", inputs_ } };
    return io::sha256_hex(f.dump());
  }

  fs::path manifest_path() const { return cfg_.out(fs::path("manifests") / (name_ + ".json")); }

  const RunConfig& cfg_;
  std::string name_;
  json config_;
  StageOptions opt_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object();
  StageResult result_;
};

std::string run_key(const RunConfig& c)
{
  return std::string(to_string(c.model.parameterization)) + "-" + c.model.scale;
}

} // namespace

// ---------------------------------------------------------------- stages

StageResult cmd_tag(const RunConfig& cfg, const StageOptions& opt)
{
  json conf = { { "explode_newsletters", cfg.explode_newsletters } };
  Stage st(cfg, "tag", conf, opt);
  const fs::path corpus = cfg.resolve(cfg.paths.corpus), items = cfg.resolve(cfg.paths.items);
  st.config_input(items, "items");
  st.config_input(corpus, "corpus");
  if (!cfg.paths.abbreviations.empty())
    st.config_input(cfg.resolve(cfg.paths.abbreviations), "abbreviations");
  const fs::path out = cfg.out("tagged.jsonl");
  if (st.up_to_date({ out }))
    return st.skipped();

  const ItemCatalog catalog = load_item_catalog(items);
  const AbbreviationSet abbrevs =
    cfg.paths.abbreviations.empty() ? default_abbreviations() : load_abbreviations(cfg.resolve(cfg.paths.abbreviations));
  std::vector<Document> docs;
  for (auto& d : read_corpus(corpus)) {
    if (cfg.explode_newsletters && d.source == DocumentSource::newsletter_sentence &&
        split_sentences(d.text, abbrevs).size() > 1) {
      for (auto& s : explode_newsletter(d, abbrevs))
        docs.push_back(std::move(s));
    } else {
      docs.push_back(std::move(d));
    }
  }
  const auto tagged = tag_documents(docs, catalog.rules());
  io::write_file(out, tagged_to_jsonl(tagged));
  std::size_t n_tagged = 0;
  for (const auto& t : tagged)
    n_tagged += t.item_ids.empty() ? 0 : 1;
  st.message("tag: " + std::to_string(tagged.size()) + " documents, " + std::to_string(n_tagged) + " tagged");
  return st.finish({ out });
}

StageResult cmd_classify(const RunConfig& cfg, const StageOptions& opt)
{
  const auto& o = cfg.classifier.options;
  json conf = { { "endpoint", cfg.classifier.endpoint },
                { "batch_size", o.batch_size },
                { "max_in_flight", o.max_in_flight },
                { "max_retries", o.max_retries },
                { "backoff_ms", o.backoff.count() },
                { "timeout_ms", cfg.classifier.timeout_ms } };
  Stage st(cfg, "classify", conf, opt);
  const fs::path items = cfg.resolve(cfg.paths.items);
  st.config_input(items, "items");
  const bool mock = cfg.classifier.endpoint == "mock";
  if (mock)
    st.config_input(cfg.resolve(cfg.paths.mock_rules), "mock_rules");
  const fs::path tagged_path = cfg.out("tagged.jsonl");
  st.artifact_input(tagged_path, "tag");
  const fs::path out = cfg.out("labels.jsonl"), dead = cfg.out("dead_letters.jsonl");
  if (st.up_to_date({ out, dead }))
    return st.skipped();

  const ItemCatalog catalog = load_item_catalog(items);
  const auto tagged = read_tagged(tagged_path);
  std::unique_ptr<ClassifierClient> client;
  if (mock) {
    client = std::make_unique<MockClassifier>(catalog, load_mock_rules(cfg.resolve(cfg.paths.mock_rules)));
  } else {
    HttpClassifierConfig hc;
    hc.endpoint = cfg.classifier.endpoint;
    hc.timeout = std::chrono::milliseconds(cfg.classifier.timeout_ms);
    hc.bearer_token = cfg.classifier.token;
    client = std::make_unique<HttpClassifier>(hc);
  }
  const ClassifyResult r = classify_corpus(tagged, catalog, *client, o);
  io::write_file(out, labels_to_jsonl(r.labels));
  io::write_file(dead, dead_letters_to_jsonl(r.dead_letters));
  st.message("classify: " + std::to_string(r.labels.size()) + " labels, " + std::to_string(r.dead_letters.size()) +
             " dead letters");
  return st.finish({ out, dead });
}

StageResult cmd_matrix(const RunConfig& cfg, const StageOptions& opt)
{
  json conf = { { "parameterization", std::string(to_string(cfg.model.parameterization)) },
                { "min_activity", cfg.model.min_activity } };
  Stage st(cfg, "matrix_" + std::string(to_string(cfg.model.parameterization)), conf, opt);
  const fs::path items = cfg.resolve(cfg.paths.items);
  st.config_input(items, "items");
  st.artifact_input(cfg.out("tagged.jsonl"), "tag");
  st.artifact_input(cfg.out("labels.jsonl"), "classify");
  const fs::path out = cfg.matrix_path();
  if (st.up_to_date({ out }))
    return st.skipped();
  const ItemCatalog catalog = load_item_catalog(items);
  MatrixOptions mo;
  mo.parameterization = cfg.model.parameterization;
  mo.min_activity = cfg.model.min_activity;
  const auto build =
    build_count_matrix(read_labels(cfg.out("labels.jsonl")), read_tagged(cfg.out("tagged.jsonl")), mo, &catalog);
  for (const auto& w : build.warnings)
    st.message("matrix: warning: " + w);
  io::write_file(out, count_matrix_to_csv(build.matrix));
  st.message("matrix: " + std::to_string(build.matrix.n()) + " authors x " + std::to_string(build.matrix.k()) +
             " columns");
  return st.finish({ out });
}

namespace {

CountMatrix scale_matrix(const RunConfig& cfg, const CountMatrix& full)
{
  if (cfg.model.scale == "all")
    return full;
  const fs::path items = cfg.resolve(cfg.paths.items);
  if (!fs::exists(items))
    throw ConfigError("model.scale '" + cfg.model.scale + "' needs the items catalog: " + items.string());
  const ItemCatalog catalog = load_item_catalog(items);
  std::vector<std::string> groups;
  for (const auto& g : catalog.groups())
    if (catalog.scale_of_group(g) == cfg.model.scale)
      groups.push_back(g);
  if (groups.empty())
    throw ConfigError("no items belong to scale '" + cfg.model.scale + "'");
  return select_groups(full, groups);
}

PriorSpec effective_priors(const RunConfig& cfg, const CountMatrix& m)
{
  PriorSpec p = cfg.model.priors;
  if (cfg.model.theta_prior_from_sign)
    p.theta_location = initialize_theta(m);
  return p;
}

std::string theta_csv_header() { return "author_id,theta"; }

std::string item_params_csv(const CountMatrix& m, const Eigen::VectorXd& delta, const Eigen::VectorXd& alpha)
{
  std::string out = "column_id,delta,alpha\n";
  for (std::size_t j = 0; j < m.column_ids.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    out += io::csv_escape(m.column_ids[j]) + ',' + io::format_double(delta(c)) + ',' + io::format_double(alpha(c)) +
           '\n';
  }
  return out;
}

json draws_manifest(const PosteriorDraws& d, const RunConfig& cfg, const CountMatrix& m)
{
  json j;
  j["chains"] = d.chains();
  j["iterations"] = d.iterations();
  j["dimension"] = d.dimension();
  j["layout"] = "delta[1..k], alpha[1..k], theta[1..n]";
  j["n_authors"] = m.n();
  j["n_columns"] = m.k();
  j["names"] = d.names;
  j["chain_seeds"] = d.chain_seeds;
  j["step_size"] = d.step_size;
  json mass = json::array();
  for (const auto& v : d.mass_diag)
    mass.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  j["mass_diag"] = mass;
  j["metric"] = std::string(to_string(d.metric));
  j["divergence_count"] = d.divergence_count;
  j["depth_saturation_count"] = d.depth_saturation_count;
  j["warmup_divergence_count"] = d.warmup_divergence_count;
  j["sampler"] = sampler_json(cfg);
  return j;
}

} // namespace

std::string draws_chain_csv(const PosteriorDraws& draws, int chain)
{
  const auto& d = draws.draws.at(static_cast<std::size_t>(chain));
  const auto& s = draws.stats.at(static_cast<std::size_t>(chain));
  std::string out = "iteration,lp__,accept_stat__,treedepth__,n_leapfrog__,divergent__";
  for (const auto& n : draws.names)
    out += ',' + io::csv_escape(n);
  out += '\n';
  for (Eigen::Index it = 0; it < d.rows(); ++it) {
    out += std::to_string(it + 1) + ',' + io::format_double(s.lp(it)) + ',' + io::format_double(s.accept_stat(it)) +
           ',' + std::to_string(s.tree_depth(it)) + ',' + std::to_string(s.n_leapfrog(it)) + ',' +
           std::to_string(s.divergent(it));
    for (Eigen::Index k = 0; k < d.cols(); ++k)
      out += ',' + io::format_double(d(it, k));
    out += '\n';
  }
  return out;
}

PosteriorDraws read_draws(const fs::path& dir)
{
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath))
    throw MissingInputError("missing draws manifest " + mpath.string() + " (run the 'fit' stage first)");
  json m;
  try {
    m = json::parse(io::read_file(mpath));
  } catch (const json::exception& e) {
    throw DataError("draws manifest " + mpath.string() + " is corrupt: " + e.what());
  }
  PosteriorDraws d;
  const int chains = m.at("chains").get<int>();
  const long iters = m.at("iterations").get<long>();
  d.names = m.at("names").get<std::vector<std::string>>();
  d.chain_seeds = m.at("chain_seeds").get<std::vector<std::uint64_t>>();
  d.step_size = m.at("step_size").get<std::vector<double>>();
  d.divergence_count = m.at("divergence_count").get<std::vector<int>>();
  d.depth_saturation_count = m.at("depth_saturation_count").get<std::vector<int>>();
  d.warmup_divergence_count = m.at("warmup_divergence_count").get<std::vector<int>>();
  d.metric = parse_metric_kind(m.value("metric", std::string("diagonal")));
  for (const auto& v : m.at("mass_diag")) {
    auto vec = v.get<std::vector<double>>();
    d.mass_diag.push_back(Eigen::Map<Eigen::VectorXd>(vec.data(), static_cast<Eigen::Index>(vec.size())));
  }
  const auto dim = static_cast<Eigen::Index>(d.names.size());
  for (int c = 0; c < chains; ++c) {
    const fs::path p = dir / ("chain_" + std::to_string(c + 1) + ".csv");
    if (!fs::exists(p))
      throw MissingInputError("missing draws file " + p.string());
    const auto lines = io::read_lines(p);
    if (lines.empty() || static_cast<long>(lines.size()) - 1 != iters)
      throw DataError("draws file " + p.string() + " is truncated: expected " + std::to_string(iters) +
                      " iterations, found " + std::to_string(lines.empty() ? 0 : lines.size() - 1));
    Eigen::MatrixXd x(iters, dim);
    DrawStats s;
    s.lp.resize(iters);
    s.accept_stat.resize(iters);
    s.tree_depth.resize(iters);
    s.n_leapfrog.resize(iters);
    s.divergent.resize(iters);
    const auto header = io::csv_split(lines[0]);
    if (static_cast<Eigen::Index>(header.size()) != dim + 6)
      throw DataError("draws file " + p.string() + " has an unexpected header");
    for (long r = 0; r < iters; ++r) {
      const auto f = io::csv_split(lines[static_cast<std::size_t>(r + 1)]);
      if (static_cast<Eigen::Index>(f.size()) != dim + 6)
        throw DataError("draws file " + p.string() + " row " + std::to_string(r + 1) + " is malformed");
      s.lp(r) = io::parse_double(f[1]);
      s.accept_stat(r) = io::parse_double(f[2]);
      s.tree_depth(r) = static_cast<int>(io::parse_int(f[3]));
      s.n_leapfrog(r) = static_cast<int>(io::parse_int(f[4]));
      s.divergent(r) = static_cast<int>(io::parse_int(f[5]));
      for (Eigen::Index k = 0; k < dim; ++k)
        x(r, k) = io::parse_double(f[static_cast<std::size_t>(k + 6)]);
    }
    d.draws.push_back(std::move(x));
    d.stats.push_back(std::move(s));
  }
  return d;
}

StageResult cmd_fit(const RunConfig& cfg, FitMode mode, const StageOptions& opt)
{
  const bool mcmc = mode == FitMode::mcmc;
  json conf = { { "mode", mcmc ? "mcmc" : "map" }, { "model", model_json(cfg) } };
  if (mcmc)
    conf["sampler"] = sampler_json(cfg);
  else
    conf["map"] = { { "max_iter", cfg.map.max_iter }, { "tol", cfg.map.tol }, { "history", cfg.map.history } };
  Stage st(cfg, std::string("fit_") + (mcmc ? "mcmc_" : "map_") + run_key(cfg), conf, opt);
  const fs::path mpath = cfg.matrix_path();
  st.artifact_input(mpath, "matrix");
  const fs::path dir = cfg.run_dir() / (mcmc ? "mcmc" : "map");
  const fs::path est = dir / "estimates.csv", items = dir / "items.csv", summary = dir / "summary.json";
  const fs::path draws_dir = dir / "draws";
  std::vector<fs::path> outputs{ est, items, summary };
  if (mcmc)
    outputs.push_back(draws_dir);
  if (st.up_to_date(outputs))
    return st.skipped();

  const CountMatrix matrix = scale_matrix(cfg, read_count_matrix(mpath));
  const PriorSpec priors = effective_priors(cfg, matrix);
  const Eigen::Index n = matrix.n(), k = matrix.k();

  if (!mcmc) {
    const MapResult r = fit_map(matrix, priors, cfg.map);
    std::string e = theta_csv_header() + "\n";
    for (Eigen::Index i = 0; i < n; ++i)
      e += io::csv_escape(matrix.author_ids[static_cast<std::size_t>(i)]) + ',' + io::format_double(r.state.theta(i)) +
           '\n';
    io::write_file(est, e);
    io::write_file(items, item_params_csv(matrix, r.state.params.delta, r.state.params.alpha));
    json s = { { "log_posterior", r.log_posterior },
               { "grad_max_norm", r.grad_max_norm },
               { "iterations", r.iterations },
               { "converged", r.converged },
               { "status", r.status },
               { "n_authors", n },
               { "n_columns", k } };
    io::write_file(summary, s.dump(2) + "\n");
    st.message("fit(map): " + std::string(r.converged ? "converged" : "NOT converged") + " after " +
               std::to_string(r.iterations) + " iterations, log posterior " + io::format_double(r.log_posterior));
    return st.finish(outputs);
  }

  PosteriorDraws d = run_semantic_scale(matrix, priors, cfg.sampler, cfg.init);
  fs::remove_all(draws_dir);
  for (int c = 0; c < d.chains(); ++c)
    io::write_file(draws_dir / ("chain_" + std::to_string(c + 1) + ".csv"), draws_chain_csv(d, c));
  io::write_file(draws_dir / "manifest.json", draws_manifest(d, cfg, matrix).dump(2) + "\n");

  std::string e = "author_id,theta,sd,q2.5,q97.5\n";
  std::string it = "column_id,delta,alpha\n";
  std::vector<ParamDiagnostics> summ(static_cast<std::size_t>(d.dimension()));
  for (Eigen::Index p = 0; p < d.dimension(); ++p) {
    Eigen::MatrixXd x = d.parameter(p);
    Eigen::VectorXd flat = Eigen::Map<Eigen::VectorXd>(x.data(), x.size());
    auto& s = summ[static_cast<std::size_t>(p)];
    s.mean = flat.mean();
    s.sd = flat.size() > 1 ? std::sqrt((flat.array() - s.mean).square().sum() / (flat.size() - 1.0)) : 0.0;
    s.q025 = quantile(flat, 0.025);
    s.q975 = quantile(flat, 0.975);
  }
  for (Eigen::Index j = 0; j < k; ++j)
    it += io::csv_escape(matrix.column_ids[static_cast<std::size_t>(j)]) + ',' +
          io::format_double(summ[static_cast<std::size_t>(j)].mean) + ',' +
          io::format_double(summ[static_cast<std::size_t>(k + j)].mean) + '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = summ[static_cast<std::size_t>(2 * k + i)];
    e += io::csv_escape(matrix.author_ids[static_cast<std::size_t>(i)]) + ',' + io::format_double(s.mean) + ',' +
         io::format_double(s.sd) + ',' + io::format_double(s.q025) + ',' + io::format_double(s.q975) + '\n';
  }
  io::write_file(est, e);
  io::write_file(items, it);
  int div = 0, sat = 0;
  for (int c = 0; c < d.chains(); ++c) {
    div += d.divergence_count[static_cast<std::size_t>(c)];
    sat += d.depth_saturation_count[static_cast<std::size_t>(c)];
  }
  json s = { { "chains", d.chains() },
             { "iterations", d.iterations() },
             { "divergences", div },
             { "depth_saturations", sat },
             { "step_size", d.step_size },
             { "n_authors", n },
             { "n_columns", k } };
  io::write_file(summary, s.dump(2) + "\n");
  st.message("fit(mcmc): " + std::to_string(d.chains()) + " chains x " + std::to_string(d.iterations()) +
             " draws, " + std::to_string(div) + " divergences, " + std::to_string(sat) + " depth saturations");
  return st.finish(outputs);
}

StageResult cmd_diagnose(const RunConfig& cfg, const StageOptions& opt)
{
  const auto& t = cfg.diagnostics.thresholds;
  json conf = { { "max_rhat", t.max_rhat },
                { "min_ess", t.min_ess },
                { "max_divergences", t.max_divergences },
                { "max_depth_saturations", t.max_depth_saturations },
                { "trace_points", t.trace_points },
                { "raftery", { cfg.diagnostics.raftery_q, cfg.diagnostics.raftery_r, cfg.diagnostics.raftery_s } } };
  Stage st(cfg, "diagnose_" + run_key(cfg), conf, opt);
  const fs::path draws_dir = cfg.run_dir() / "mcmc" / "draws";
  st.artifact_input(draws_dir / "manifest.json", "fit --mode mcmc");
  st.artifact_input(draws_dir, "fit --mode mcmc");
  const fs::path dir = cfg.run_dir() / "diagnostics";
  const fs::path rj = dir / "report.json", rc = dir / "report.csv", tr = dir / "trace.csv", rl = dir / "raftery.csv";
  if (st.up_to_date({ rj, rc, tr, rl }))
    return st.skipped();

  const PosteriorDraws d = read_draws(draws_dir);
  const DiagnosticReport rep = diagnostic_report(d, t);
  io::write_file(rj, report_to_json(rep, t));
  io::write_file(rc, report_to_csv(rep));
  io::write_file(tr, trace_to_csv(d, t.trace_points));

  // Raftery-Lewis on the first chain, treated as the pilot run.
  std::string raf = "parameter,burn_in,total,lower_bound,thin,dependence_factor\n";
  const long nmin = raftery_nmin(cfg.diagnostics.raftery_q, cfg.diagnostics.raftery_r, cfg.diagnostics.raftery_s);
  if (d.iterations() < nmin) {
    st.message("diagnose: Raftery-Lewis skipped, pilot of " + std::to_string(d.iterations()) + " draws is shorter than " +
               std::to_string(nmin));
  } else {
    for (Eigen::Index p = 0; p < d.dimension(); ++p) {
      const Eigen::VectorXd pilot = d.draws[0].col(p);
      try {
        const auto r = raftery_lewis(pilot, cfg.diagnostics.raftery_q, cfg.diagnostics.raftery_r,
                                     cfg.diagnostics.raftery_s);
        raf += io::csv_escape(d.names[static_cast<std::size_t>(p)]) + ',' + std::to_string(r.burn_in) + ',' +
               std::to_string(r.total) + ',' + std::to_string(r.lower_bound) + ',' + std::to_string(r.thin) + ',' +
               io::format_double(r.dependence_factor) + '\n';
      } catch (const DataError&) {
        raf += io::csv_escape(d.names[static_cast<std::size_t>(p)]) + ",NA,NA," + std::to_string(nmin) + ",NA,NA\n";
      }
    }
  }
  io::write_file(rl, raf);
  std::string msg = std::string("diagnose: ") + (rep.pass ? "PASS" : "FAIL");
  if (rep.max_rhat)
    msg += ", max R-hat " + io::format_double(*rep.max_rhat) + " (" + rep.max_rhat_param + ")";
  if (rep.min_ess)
    msg += ", min bulk ESS " + io::format_double(*rep.min_ess) + " (" + rep.min_ess_param + ")";
  msg += ", divergences " + std::to_string(rep.divergences) + ", depth saturations " +
         std::to_string(rep.depth_saturations);
  for (const auto& r : rep.reasons)
    msg += "; failed: " + r;
  st.message(msg);
  return st.finish({ rj, rc, tr, rl });
}

namespace {

json correlation_json(const Correlation& c)
{
  return { { "rho", c.rho }, { "se", c.se }, { "n", c.n } };
}

std::string density_csv(const std::string& label, const KdeSplit& s)
{
  std::string out;
  for (Eigen::Index i = 0; i < s.grid.size(); ++i)
    out += io::csv_escape(label) + ',' + io::format_double(s.grid(i)) + ',' + io::format_double(s.density(i)) + '\n';
  return out;
}

std::string safe_label(std::string s)
{
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_')
      ch = '_';
  return s;
}

} // namespace

StageResult cmd_analyze(const RunConfig& cfg, const StageOptions& opt)
{
  json refs = json::array();
  for (const auto& r : cfg.analysis.references)
    refs.push_back({ { "path", cfg.resolve(r.path).generic_string() }, { "column", r.column }, { "label", r.label } });
  json conf = { { "estimate", cfg.analysis.estimate },
                { "references", refs },
                { "human_labels", cfg.analysis.human_labels.generic_string() },
                { "moderate_fraction", cfg.analysis.moderate_fraction },
                { "residual_count", cfg.analysis.residual_count } };
  Stage st(cfg, "analyze_" + run_key(cfg), conf, opt);
  const fs::path est = cfg.run_dir() / cfg.analysis.estimate / "estimates.csv";
  st.artifact_input(est, cfg.analysis.estimate == "mcmc" ? "fit --mode mcmc" : "fit --mode map");
  for (const auto& r : cfg.analysis.references)
    st.config_input(cfg.resolve(r.path), "reference scores '" + r.label + "'");
  if (!cfg.analysis.human_labels.empty())
    st.config_input(cfg.resolve(cfg.analysis.human_labels), "human labels");
  const fs::path dir = cfg.run_dir() / "analysis";
  const fs::path summary = dir / "summary.json", corr = dir / "correlations.csv", labels = dir / "labels.csv",
                 therm = dir / "thermometer.csv", dens = dir / "density.csv", scores = dir / "scores.csv";
  std::vector<fs::path> outputs{ summary, corr, labels, therm, dens, scores };
  for (const auto& r : cfg.analysis.references) {
    outputs.push_back(dir / ("confusion_" + safe_label(r.label) + ".csv"));
    outputs.push_back(dir / ("residuals_" + safe_label(r.label) + ".csv"));
  }
  if (st.up_to_date(outputs))
    return st.skipped();

  ScoreSeries sem = read_scores(est, "theta", "semantic");
  std::vector<ScoreSeries> series{ sem };
  for (const auto& r : cfg.analysis.references)
    series.push_back(read_scores(cfg.resolve(r.path), r.column, r.label));

  json sj;
  sj["n_authors"] = sem.size();
  std::string corr_csv = "a,b,rho,se,n\n";
  for (std::size_t a = 0; a < series.size(); ++a)
    for (std::size_t b = a + 1; b < series.size(); ++b) {
      const Correlation c = pearson_with_se(series[a], series[b]);
      corr_csv += io::csv_escape(series[a].label) + ',' + io::csv_escape(series[b].label) + ',' +
                  io::format_double(c.rho) + ',' + io::format_double(c.se) + ',' + std::to_string(c.n) + '\n';
      sj["correlations"][series[a].label + "~" + series[b].label] = correlation_json(c);
    }

  std::string dens_csv = "series,x,density\n";
  std::string labels_csv = "series,author_id,label\n";
  std::map<std::string, std::vector<IdeologyLabel>> label_sets;
  std::map<std::string, KdeSplit> splits;
  for (const auto& s : series) {
    try {
      KdeSplit k = kde_split(s);
      const ModerateBand band = moderate_band(s.values, k, cfg.analysis.moderate_fraction);
      auto ls = classify_moderates(s, k, cfg.analysis.moderate_fraction);
      dens_csv += density_csv(s.label, k);
      for (const auto& l : ls)
        labels_csv += io::csv_escape(s.label) + ',' + io::csv_escape(l.author_id) + ',' +
                      std::string(to_string(l.label)) + '\n';
      int counts[3] = { 0, 0, 0 };
      for (const auto& l : ls)
        ++counts[static_cast<int>(l.label)];
      sj["kde"][s.label] = { { "minimum", k.minimum },
                             { "left_peak", k.left_peak },
                             { "right_peak", k.right_peak },
                             { "bandwidth", k.bandwidth },
                             { "moderate_band", { band.lower, band.upper } },
                             { "liberal", counts[0] },
                             { "moderate", counts[1] },
                             { "conservative", counts[2] } };
      label_sets[s.label] = std::move(ls);
      splits[s.label] = std::move(k);
    } catch (const NumericalError& e) {
      sj["kde"][s.label] = { { "error", e.what() } };
      st.message("analyze: " + s.label + ": " + e.what());
    } catch (const DataError& e) {
      sj["kde"][s.label] = { { "error", e.what() } };
      st.message("analyze: " + s.label + ": " + e.what());
    }
  }

  for (std::size_t r = 1; r < series.size(); ++r) {
    const std::string& lab = series[r].label;
    const fs::path cpath = dir / ("confusion_" + safe_label(lab) + ".csv");
    const fs::path rpath = dir / ("residuals_" + safe_label(lab) + ".csv");
    std::string conf_csv = "semantic\\" + lab + ",liberal,moderate,conservative\n";
    if (label_sets.count("semantic") && label_sets.count(lab)) {
      // Restrict both labelings to common authors.
      auto [a, b] = align(sem, series[r]);
      std::set<std::string> common(a.author_ids.begin(), a.author_ids.end());
      std::vector<IdeologyLabel> la, lb;
      for (const auto& l : label_sets["semantic"])
        if (common.count(l.author_id))
          la.push_back(l);
      for (const auto& l : label_sets[lab])
        if (common.count(l.author_id))
          lb.push_back(l);
      const Eigen::Matrix3i cm = confusion_matrix(la, lb);
      const char* names[3] = { "liberal", "moderate", "conservative" };
      for (int i = 0; i < 3; ++i)
        conf_csv += std::string(names[i]) + ',' + std::to_string(cm(i, 0)) + ',' + std::to_string(cm(i, 1)) + ',' +
                    std::to_string(cm(i, 2)) + '\n';
      json tests = json::object();
      const std::pair<int, int> cells[4] = { { 1, 0 }, { 1, 2 }, { 0, 1 }, { 2, 1 } };
      for (auto [row, col] : cells) {
        const std::string key = std::string(names[row]) + "/" + names[col];
        try {
          const auto t = expected_count_test(cm, row, col);
          tests[key] = { { "observed", t.observed },  { "expected", t.expected }, { "ci_low", t.ci_low },
                         { "ci_high", t.ci_high },    { "rejected", t.rejected }, { "trials", t.trials },
                         { "share", t.share },        { "exact", t.exact } };
        } catch (const NumericalError& e) {
          tests[key] = { { "error", e.what() } };
        }
      }
      sj["expected_count_tests"][lab] = tests;
    }
    io::write_file(cpath, conf_csv);

    std::string res_csv = "author_id,x,y,residual,quadrant\n";
    try {
      std::optional<double> xa, ya;
      if (splits.count(lab))
        xa = splits[lab].minimum;
      if (splits.count("semantic"))
        ya = splits["semantic"].minimum;
      auto [a, b] = align(sem, series[r]);
      const int count = std::min<int>(cfg.analysis.residual_count, static_cast<int>(a.size()));
      const auto sel = top_residual_selection(series[r], sem, count, xa ? xa : std::optional<double>(b.values.mean()),
                                              ya ? ya : std::optional<double>(a.values.mean()));
      res_csv = residuals_to_csv(sel);
      sj["residuals"][lab] = { { "intercept", sel.intercept },
                               { "slope", sel.slope },
                               { "quadrant_counts", sel.quadrant_counts } };
    } catch (const Error& e) {
      sj["residuals"][lab] = { { "error", e.what() } };
    }
    io::write_file(rpath, res_csv);
  }

  if (!cfg.analysis.human_labels.empty()) {
    const auto human = read_labels_csv(cfg.resolve(cfg.analysis.human_labels));
    ScoreSeries hs{ {}, Eigen::VectorXd(static_cast<Eigen::Index>(human.size())), "human" };
    for (std::size_t i = 0; i < human.size(); ++i) {
      hs.author_ids.push_back(human[i].author_id);
      hs.values(static_cast<Eigen::Index>(i)) = static_cast<double>(static_cast<int>(human[i].label) - 1);
    }
    for (const auto& s : series) {
      try {
        sj["human_label_correlations"][s.label] = correlation_json(pearson_with_se(s, hs));
      } catch (const Error& e) {
        sj["human_label_correlations"][s.label] = { { "error", e.what() } };
      }
    }
  }

  io::write_file(corr, corr_csv);
  io::write_file(labels, labels_csv);
  io::write_file(dens, dens_csv);
  io::write_file(scores, scores_to_csv(sem));
  io::write_file(therm, scores_to_csv(thermometer(sem)));
  io::write_file(summary, sj.dump(2) + "\n");
  st.message("analyze: wrote report bundle to " + dir.string());
  return st.finish(outputs);
}

StageResult cmd_simulate(const RunConfig& cfg, const StageOptions& opt)
{
  Stage st(cfg, "simulate", synth_json(cfg), opt);
  const fs::path dir = cfg.out("synth");
  const fs::path m = dir / "count_matrix.csv", ta = dir / "truth_authors.csv", ti = dir / "truth_items.csv";
  std::vector<fs::path> outputs{ m, ta, ti };
  const fs::path corpus = dir / "corpus.jsonl", items = dir / "items.yaml", rules = dir / "mock_rules.yaml";
  if (cfg.simulate.documents) {
    outputs.push_back(corpus);
    outputs.push_back(items);
    outputs.push_back(rules);
  }
  if (st.up_to_date(outputs))
    return st.skipped();
  const SynthTruth truth = generate(cfg.simulate.synth);
  io::write_file(m, count_matrix_to_csv(truth.matrix));
  io::write_file(ta, truth_authors_csv(truth));
  io::write_file(ti, truth_items_csv(truth));
  if (cfg.simulate.documents) {
    io::write_file(corpus, corpus_to_jsonl(generate_documents(truth, cfg.simulate.templates, cfg.simulate.synth.seed)));
    io::write_file(items, item_catalog_to_yaml(synth_catalog(truth)));
    io::write_file(rules, mock_rules_to_yaml(synth_mock_rules(truth, cfg.simulate.templates)));
  }
  st.message("simulate: " + std::to_string(truth.matrix.n()) + " authors, " + std::to_string(truth.matrix.k()) +
             " columns, " + std::to_string(truth.matrix.y.sum()) + " documents");
  return st.finish(outputs);
}

StageResult cmd_wordfish(const RunConfig& cfg, const StageOptions& opt)
{
  const auto& w = cfg.wordfish;
  json conf = { { "prune_min_docs", w.prune_min_docs },
                { "max_iter", w.fit.max_iter },
                { "tol", w.fit.tol },
                { "anchor_author", w.fit.anchor_author ? json(*w.fit.anchor_author) : json(nullptr) } };
  Stage st(cfg, "wordfish", conf, opt);
  const fs::path corpus = cfg.resolve(cfg.paths.corpus);
  st.config_input(corpus, "corpus");
  const fs::path dir = cfg.out("wordfish");
  const fs::path a = dir / "authors.csv", wd = dir / "words.csv", s = dir / "summary.json";
  if (st.up_to_date({ a, wd, s }))
    return st.skipped();
  const WordCountMatrix counts = build_word_counts(read_corpus(corpus), w.prune_min_docs);
  const WordfishResult r = fit_wordfish(counts, w.fit);
  io::write_file(a, wordfish_authors_csv(r));
  io::write_file(wd, wordfish_words_csv(r));
  json sj = { { "n_authors", counts.author_ids.size() },
              { "n_terms", counts.vocab.size() },
              { "iterations", r.iterations },
              { "converged", r.converged },
              { "log_likelihood", r.log_likelihood } };
  io::write_file(s, sj.dump(2) + "\n");
  st.message("wordfish: " + std::to_string(counts.author_ids.size()) + " authors x " +
             std::to_string(counts.vocab.size()) + " terms, " + (r.converged ? "converged" : "NOT converged") +
             " after " + std::to_string(r.iterations) + " iterations");
  return st.finish({ a, wd, s });
}

} // namespace semscale
