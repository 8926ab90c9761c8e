#include "semscale/io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <map>
#include <set>

using namespace semscale;
namespace fs = std::filesystem;

namespace {

struct Run
{
  int code = -1;
  std::string err;
};

Run cli(const std::string& args, const fs::path& scratch)
{
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(SEMSCALE_CLI) + " " + args + " 2> " + err.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fs::exists(err) ? io::read_file(err) : "";
  return r;
}

const char* kSynthConfig = R"(seed: 11
paths:
  corpus: out/synth/corpus.jsonl
  items: out/synth/items.yaml
  mock_rules: out/synth/mock_rules.yaml
  output_dir: out
classifier:
  endpoint: mock
model:
  min_activity: 0
sampler:
  chains: 4
  warmup: 500
  sampling: 500
  metric: dense
simulate:
  n_authors: 60
  n_items: 3
  doc_count:
    family: poisson
    mean: 20
)";

const std::vector<std::string> kStages{ "simulate", "tag", "classify", "matrix", "fit --mode map",
                                        "fit --mode mcmc", "diagnose", "analyze", "wordfish" };

void run_pipeline(const fs::path& dir)
{
  io::write_file(dir / "run.yaml", kSynthConfig);
  for (const auto& s : kStages) {
    const Run r = cli(s + " -q -c " + (dir / "run.yaml").string(), dir);
    INFO(s << ": " << r.err);
    REQUIRE(r.code == 0);
  }
}

// Every file under out/ except run manifests, which record paths and wall time.
std::map<std::string, std::string> primary_outputs(const fs::path& out)
{
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file())
      continue;
    const std::string rel = fs::relative(e.path(), out).generic_string();
    if (rel.rfind("manifests/", 0) == 0)
      continue;
    files[rel] = io::sha256_file(e.path());
  }
  return files;
}

Eigen::VectorXd theta_column(const fs::path& csv)
{
  const auto t = io::read_csv(csv);
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = io::parse_double(t.rows[i][t.column("theta")]);
  return v;
}

struct Pipeline
{
  testing::TempDir dir;
  Pipeline() { run_pipeline(dir.path()); }
};

const Pipeline& shared_pipeline()
{
  static const Pipeline p;
  return p;
}

} // namespace

TEST_CASE("tag on the fixture corpus matches the golden file")
{
  testing::TempDir tmp;
  const Run r = cli("tag -q -c " + testing::fixture("twitter_run.yaml").string() + " --output-dir " + tmp.path().string(),
                    tmp.path());
  REQUIRE(r.code == 0);
  const auto got = io::read_lines(tmp / "tagged.jsonl");
  const auto golden = io::read_lines(testing::fixture("golden/tagged.jsonl"));
  REQUIRE(got.size() == golden.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto g = nlohmann::json::parse(golden[i]), t = nlohmann::json::parse(got[i]);
    CHECK(t["doc_id"] == g["doc_id"]);
    CHECK(t["item_ids"].get<std::set<std::string>>() == g["item_ids"].get<std::set<std::string>>());
  }
}

TEST_CASE("config errors exit 2")
{
  testing::TempDir tmp;
  io::write_file(tmp / "corpus.jsonl", "");
  io::write_file(tmp / "run.yaml", "seed: 1\npaths:\n  corpus: corpus.jsonl\n  items: no_such_items.yaml\n");
  Run r = cli("tag -c " + (tmp / "run.yaml").string(), tmp.path());
  CHECK(r.code == 2);
  CHECK(r.err.find("no_such_items.yaml") != std::string::npos);

  io::write_file(tmp / "bad.yaml", "seed: 1\nsampler:\n  chainz: 4\n");
  CHECK(cli("fit -c " + (tmp / "bad.yaml").string(), tmp.path()).code == 2);
  io::write_file(tmp / "noseed.yaml", "paths:\n  output_dir: out\n");
  CHECK(cli("simulate -c " + (tmp / "noseed.yaml").string(), tmp.path()).code == 2);
  CHECK(cli("tag -c " + (tmp / "absent.yaml").string(), tmp.path()).code == 2);
  CHECK(cli("frobnicate", tmp.path()).code == 2);
}

TEST_CASE("empty corpus gives empty output")
{
  testing::TempDir tmp;
  io::write_file(tmp / "corpus.jsonl", "");
  fs::copy_file(testing::fixture("twitter_items.yaml"), tmp / "items.yaml");
  io::write_file(tmp / "run.yaml", "seed: 1\npaths:\n  corpus: corpus.jsonl\n  items: items.yaml\n  output_dir: out\n");
  const Run r = cli("tag -q -c " + (tmp / "run.yaml").string(), tmp.path());
  CHECK(r.code == 0);
  CHECK(io::read_file(tmp / "out/tagged.jsonl").empty());
}

TEST_CASE("missing upstream artifacts exit 3 naming the stage")
{
  testing::TempDir tmp;
  io::write_file(tmp / "run.yaml", kSynthConfig);
  Run r = cli("fit --mode map -c " + (tmp / "run.yaml").string(), tmp.path());
  CHECK(r.code == 3);
  CHECK(r.err.find("matrix") != std::string::npos);
  r = cli("diagnose -c " + (tmp / "run.yaml").string(), tmp.path());
  CHECK(r.code == 3);
  CHECK(r.err.find("fit") != std::string::npos);
}

TEST_CASE("lock file blocks a second process")
{
  testing::TempDir tmp;
  io::write_file(tmp / "run.yaml", kSynthConfig);
  fs::create_directories(tmp / "out");
  io::write_file(tmp / "out/.semscale.lock", std::to_string(::getpid()) + "\n");
  Run r = cli("simulate -c " + (tmp / "run.yaml").string(), tmp.path());
  CHECK(r.code == 2);
  CHECK(r.err.find("locked") != std::string::npos);

  // A lock left by a process that has exited is stale.
  const pid_t child = ::fork();
  if (child == 0)
    ::_exit(0);
  ::waitpid(child, nullptr, 0);
  io::write_file(tmp / "out/.semscale.lock", std::to_string(child) + "\n");
  r = cli("simulate -q -c " + (tmp / "run.yaml").string(), tmp.path());
  CHECK(r.code == 0);
  CHECK(!fs::exists(tmp / "out/.semscale.lock"));
}

TEST_CASE("full synthetic pipeline")
{
  const auto& p = shared_pipeline();
  const fs::path out = p.dir / "out";
  const auto report = nlohmann::json::parse(io::read_file(out / "total/all/diagnostics/report.json"));
  CHECK(report["pass"].get<bool>());

  // MAP and posterior mean agree.
  const Eigen::VectorXd map = theta_column(out / "total/all/map/estimates.csv");
  const Eigen::VectorXd mcmc = theta_column(out / "total/all/mcmc/estimates.csv");
  CHECK(oracle::pearson(map, mcmc) >= 0.99);

  // The mock round trip rebuilds the simulated matrix.
  CHECK(io::read_file(out / "matrix_total.csv") == io::read_file(out / "synth/count_matrix.csv"));

  const auto truth = io::read_csv(out / "synth/truth_authors.csv");
  Eigen::VectorXd theta(static_cast<Eigen::Index>(truth.rows.size()));
  for (std::size_t i = 0; i < truth.rows.size(); ++i)
    theta(static_cast<Eigen::Index>(i)) = io::parse_double(truth.rows[i][1]);
  CHECK(std::abs(oracle::pearson(mcmc, theta)) >= 0.9);
}

TEST_CASE("reruns are byte-identical and re-entrant")
{
  const auto& p = shared_pipeline();
  const fs::path out = p.dir / "out";
  const auto first = primary_outputs(out);
  CHECK(first.count("total/all/mcmc/draws/chain_1.csv") == 1);
  CHECK(first.count("total/all/analysis/summary.json") == 1);

  testing::TempDir other;
  run_pipeline(other.path());
  CHECK(primary_outputs(other / "out") == first);

  // Delete downstream artifacts and rerun the stages that produce them.
  fs::remove_all(out / "total/all/diagnostics");
  fs::remove(out / "total/all/mcmc/estimates.csv");
  fs::remove(out / "matrix_total.csv");
  for (const auto& s : { "matrix", "fit --mode mcmc", "diagnose" })
    REQUIRE(cli(std::string(s) + " -q -c " + (p.dir / "run.yaml").string(), p.dir.path()).code == 0);
  CHECK(primary_outputs(out) == first);

  // An up-to-date stage is skipped and touches nothing.
  const auto before = fs::last_write_time(out / "total/all/mcmc/estimates.csv");
  REQUIRE(cli("fit --mode mcmc -c " + (p.dir / "run.yaml").string(), p.dir.path()).code == 0);
  CHECK(fs::last_write_time(out / "total/all/mcmc/estimates.csv") == before);
}

TEST_CASE("interrupted draws exit 3")
{
  const auto& p = shared_pipeline();
  testing::TempDir tmp;
  fs::copy(p.dir / "out", tmp / "out", fs::copy_options::recursive);
  fs::copy_file(p.dir / "run.yaml", tmp / "run.yaml");
  const fs::path chain = tmp / "out/total/all/mcmc/draws/chain_3.csv";
  auto lines = io::read_lines(chain);
  std::string cut;
  for (std::size_t i = 0; i < lines.size() / 2; ++i)
    cut += lines[i] + "\n";
  io::write_file(chain, cut);
  const Run r = cli("diagnose --force -c " + (tmp / "run.yaml").string(), tmp.path());
  CHECK(r.code == 3);
}

TEST_CASE("commands do not modify their inputs")
{
  const auto& p = shared_pipeline();
  const fs::path out = p.dir / "out";
  const auto corpus = io::sha256_file(out / "synth/corpus.jsonl");
  const auto labels = io::sha256_file(out / "labels.jsonl");
  REQUIRE(cli("matrix --force -q -c " + (p.dir / "run.yaml").string(), p.dir.path()).code == 0);
  REQUIRE(cli("tag --force -q -c " + (p.dir / "run.yaml").string(), p.dir.path()).code == 0);
  CHECK(io::sha256_file(out / "synth/corpus.jsonl") == corpus);
  CHECK(io::sha256_file(out / "labels.jsonl") == labels);
}
