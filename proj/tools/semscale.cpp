#include "semscale/error.hpp"
#include "semscale/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

struct Options
{
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir, parameterization, endpoint, scale, estimate;
  std::optional<int> chains, warmup, sampling, threads;
  std::string mode = "mcmc";
  bool force = false;
  bool quiet = false;
};

template <typename T>
void push(std::vector<std::string>& out, const char* key, const std::optional<T>& v)
{
  if (!v)
    return;
  if constexpr (std::is_same_v<T, std::string>)
    out.push_back(std::string(key) + "=\"" + *v + "\"");
  else
    out.push_back(std::string(key) + "=" + std::to_string(*v));
}

semscale::RunConfig load(const Options& o)
{
  std::vector<std::string> ov = o.overrides;
  push(ov, "seed", o.seed);
  push(ov, "paths.output_dir", o.output_dir);
  push(ov, "model.parameterization", o.parameterization);
  push(ov, "model.scale", o.scale);
  push(ov, "classifier.endpoint", o.endpoint);
  push(ov, "analysis.estimate", o.estimate);
  push(ov, "sampler.chains", o.chains);
  push(ov, "sampler.warmup", o.warmup);
  push(ov, "sampler.sampling", o.sampling);
  push(ov, "sampler.threads", o.threads);
  semscale::RunConfig cfg = semscale::load_run_config(o.config, ov);
  if (const char* url = std::getenv("SEMSCALE_CLASSIFIER_URL"); url && *url && !o.endpoint)
    cfg.classifier.endpoint = url;
  if (const char* tok = std::getenv("SEMSCALE_CLASSIFIER_TOKEN"); tok && *tok)
    cfg.classifier.token = tok;
  return cfg;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Semantic scaling: stance counts to Bayesian ideal points" };
  app.set_version_flag("--version", std::string(semscale::kVersion));
  app.require_subcommand(1);

  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "run configuration (YAML)")->required();
    sub->add_option("--set", o.overrides, "override a config key, e.g. sampler.chains=2");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--output-dir", o.output_dir, "output directory");
    sub->add_flag("--force", o.force, "rerun even when outputs are up to date");
    sub->add_flag("-q,--quiet", o.quiet, "suppress progress messages");
  };

  auto* tag = app.add_subcommand("tag", "tag documents with scaling items");
  auto* classify = app.add_subcommand("classify", "label tagged documents with stances");
  auto* matrix = app.add_subcommand("matrix", "aggregate labels into the count matrix");
  auto* fit = app.add_subcommand("fit", "fit the scaling model");
  auto* diagnose = app.add_subcommand("diagnose", "convergence diagnostics for posterior draws");
  auto* analyze = app.add_subcommand("analyze", "validation analyses against reference scores");
  auto* simulate = app.add_subcommand("simulate", "generate synthetic fixtures");
  auto* wordfish = app.add_subcommand("wordfish", "fit the Wordfish baseline");
  for (auto* s : { tag, classify, matrix, fit, diagnose, analyze, simulate, wordfish })
    common(s);

  classify->add_option("--endpoint", o.endpoint, "classifier URL or 'mock'");
  for (auto* s : { matrix, fit, diagnose, analyze })
    s->add_option("--parameterization", o.parameterization, "total or per_item");
  for (auto* s : { fit, diagnose, analyze })
    s->add_option("--scale", o.scale, "'all' or a scale name from the items catalog");
  fit->add_option("--mode", o.mode, "map or mcmc")->check(CLI::IsMember({ "map", "mcmc" }));
  fit->add_option("--chains", o.chains, "number of chains");
  fit->add_option("--warmup", o.warmup, "warmup iterations per chain");
  fit->add_option("--sampling", o.sampling, "sampling iterations per chain");
  fit->add_option("--threads", o.threads, "worker threads (0 = one per chain)");
  analyze->add_option("--estimate", o.estimate, "map or mcmc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const semscale::RunConfig cfg = load(o);
    semscale::OutputLock lock(cfg.resolve(cfg.paths.output_dir));
    const semscale::StageOptions opt{ o.force };
    semscale::StageResult r;
    if (tag->parsed())
      r = semscale::cmd_tag(cfg, opt);
    else if (classify->parsed())
      r = semscale::cmd_classify(cfg, opt);
    else if (matrix->parsed())
      r = semscale::cmd_matrix(cfg, opt);
    else if (fit->parsed())
      r = semscale::cmd_fit(cfg, o.mode == "map" ? semscale::FitMode::map : semscale::FitMode::mcmc, opt);
    else if (diagnose->parsed())
      r = semscale::cmd_diagnose(cfg, opt);
    else if (analyze->parsed())
      r = semscale::cmd_analyze(cfg, opt);
    else if (simulate->parsed())
      r = semscale::cmd_simulate(cfg, opt);
    else if (wordfish->parsed())
      r = semscale::cmd_wordfish(cfg, opt);
    if (!o.quiet)
      for (const auto& m : r.messages)
        std::cerr << m << '\n';
    return 0;
  } catch (const semscale::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const semscale::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const semscale::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
