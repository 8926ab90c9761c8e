#pragma once

#include "semscale/analysis.hpp"
#include "semscale/count_matrix.hpp"
#include "semscale/diagnostics.hpp"
#include "semscale/sampler.hpp"
#include "semscale/scale_model.hpp"
#include "semscale/stance.hpp"
#include "semscale/synth.hpp"
#include "semscale/wordfish.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace semscale {

inline constexpr std::string_view kVersion = "0.1.0";

struct ReferenceScores
{
  std::filesystem::path path;
  std::string column; // empty: second column
  std::string label;
};

struct RunConfig
{
  std::filesystem::path base_dir; // relative paths resolve against this

  std::uint64_t seed = 0;
  bool has_seed = false;

  struct Paths
  {
    std::filesystem::path corpus;
    std::filesystem::path items;
    std::filesystem::path mock_rules;
    std::filesystem::path abbreviations;
    std::filesystem::path output_dir = "out";
  } paths;

  bool explode_newsletters = true;

  struct Classifier
  {
    std::string endpoint = "mock";
    std::string token;
    ClassifyOptions options;
    long timeout_ms = 30000;
  } classifier;

  struct Model
  {
    Parameterization parameterization = Parameterization::total;
    int min_activity = 5;
    PriorSpec priors;
    std::string scale = "all"; // or one scale name from the item catalog
    bool theta_prior_from_sign = false;
  } model;

  ChainConfig sampler;
  OptimConfig map;
  ScaleRunOptions init;

  struct Diagnostics
  {
    DiagnosticThresholds thresholds;
    double raftery_q = 0.025;
    double raftery_r = 0.005;
    double raftery_s = 0.95;
  } diagnostics;

  struct Analysis
  {
    std::string estimate = "mcmc"; // or "map"
    std::vector<ReferenceScores> references;
    std::filesystem::path human_labels;
    double moderate_fraction = 0.25;
    int residual_count = 100;
  } analysis;

  struct Wordfish
  {
    int prune_min_docs = 5;
    WordfishConfig fit;
  } wordfish;

  struct Simulate
  {
    SynthConfig synth;
    bool documents = true;
    DocumentTemplates templates;
  } simulate;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path out(const std::filesystem::path& rel) const;
  // Directory of one (parameterization, scale) run.
  std::filesystem::path run_dir() const;
  std::filesystem::path matrix_path() const;

  // Throws ConfigError on invalid values or a missing seed.
  void validate() const;
};

// Loads YAML; relative paths resolve against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view yaml, const std::filesystem::path& base_dir);

// "section.key=value" overrides, applied to the YAML before parsing.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

// Holds <output_dir>/.semscale.lock for the lifetime of the object. Throws ConfigError when another
// live process holds it.
class OutputLock
{
public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

private:
  std::filesystem::path path_;
};

struct StageResult
{
  std::string stage;
  bool skipped = false; // inputs, config and outputs unchanged since the last manifest
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> messages;
};

struct StageOptions
{
  bool force = false;
};

enum class FitMode
{
  map,
  mcmc
};

StageResult cmd_tag(const RunConfig& cfg, const StageOptions& opt = {});
StageResult cmd_classify(const RunConfig& cfg, const StageOptions& opt = {});
StageResult cmd_matrix(const RunConfig& cfg, const StageOptions& opt = {});
StageResult cmd_fit(const RunConfig& cfg, FitMode mode, const StageOptions& opt = {});
StageResult cmd_diagnose(const RunConfig& cfg, const StageOptions& opt = {});
StageResult cmd_analyze(const RunConfig& cfg, const StageOptions& opt = {});
StageResult cmd_simulate(const RunConfig& cfg, const StageOptions& opt = {});
StageResult cmd_wordfish(const RunConfig& cfg, const StageOptions& opt = {});

// Per-chain draws CSV: iteration, sampler statistics, then parameters.
std::string draws_chain_csv(const PosteriorDraws& draws, int chain);
// Reads the draws directory written by cmd_fit. Truncated or missing chain files throw DataError.
PosteriorDraws read_draws(const std::filesystem::path& dir);

} // namespace semscale
