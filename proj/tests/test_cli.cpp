#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lisest/checkpoint.hpp"
#include "lisest/cli.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace lisest;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lisest");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Values of one named column of a CSV file.
std::vector<std::string> csv_column(const fs::path& p, const std::string& name) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  const auto idx = std::find(header.begin(), header.end(), name) - header.begin();
  std::vector<std::string> col;
  while (std::getline(is, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (long i = 0; i <= idx; ++i) std::getline(ls, cell, ',');
    col.push_back(cell);
  }
  return col;
}

const char* kScalar = "scalar a=1 c=1 q=1 r=1";

}  // namespace

TEST_CASE("simulate writes one CSV per estimator and replays byte for byte") {
  const fs::path dir = testing_util::scratch_dir("cli-sim");
  const auto r = run_cli({"simulate", "--generate", "power-system s=10 M=500 horizon=500", "--trials", "8",
                          "--horizon", "30", "--seed", "5", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "rmse_distributed.csv"));
  CHECK(fs::exists(dir / "rmse_centralized.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  const Json meta = load_json(dir / "metadata.json");
  CHECK(meta["config"]["trials"] == 8);
  CHECK(meta["config"]["horizon"] == 30);

  const fs::path again = testing_util::scratch_dir("cli-sim-replay");
  const auto r2 = run_cli({"simulate", "--config", (dir / "metadata.json").string(), "--out", again.string()});
  REQUIRE(r2.code == 0);
  CHECK(slurp(dir / "rmse_distributed.csv") == slurp(again / "rmse_distributed.csv"));
  CHECK(slurp(dir / "rmse_centralized.csv") == slurp(again / "rmse_centralized.csv"));
}

TEST_CASE("flags override the config file") {
  const fs::path dir = testing_util::scratch_dir("cli-precedence");
  cli::RunConfig c;
  c.command = "simulate";
  c.generate = kScalar;
  c.trials = 7;
  c.horizon = 5;
  c.out = dir.string();
  save_json(dir / "config.json", cli::to_json(c));
  REQUIRE(run_cli({"simulate", "--config", (dir / "config.json").string(), "--trials", "3"}).code == 0);
  const Json meta = load_json(dir / "metadata.json");
  CHECK(meta["config"]["trials"] == 3);
  CHECK(meta["config"]["horizon"] == 5);
}

TEST_CASE("usage errors exit with 1") {
  const fs::path dir = testing_util::scratch_dir("cli-errors");
  auto r = run_cli({"simulate", "--generate", kScalar, "--trials", "0", "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
  CHECK(run_cli({"simulate", "--model", (dir / "missing.json").string(), "--out", dir.string()}).code == 1);
  CHECK(run_cli({"simulate", "--out", dir.string()}).code == 1);
  CHECK(run_cli({"simulate", "--generate", "scalar a=1 bogus=2", "--out", dir.string()}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"simulate", "--generate", kScalar, "--policy", "sideways", "--out", dir.string()}).code == 1);
}

TEST_CASE("stability verdicts and exit codes") {
  const fs::path dir = testing_util::scratch_dir("cli-stability");
  auto yes = run_cli({"stability", "--generate", kScalar, "--out", dir.string()});
  CHECK(yes.code == 0);
  Json doc = load_json(dir / "stability.json");
  CHECK(doc["verdict"] == "yes");
  CHECK(doc["boundedness"]["spectral_radius"].get<double>() == doctest::Approx(0.1459).epsilon(1e-3));

  auto no = run_cli({"stability", "--generate", "scalar a=2 c=0", "--out", dir.string()});
  CHECK(no.code == 2);
  CHECK(load_json(dir / "stability.json")["verdict"] == "no");

  auto ps = run_cli({"stability", "--generate", "power-system s=4 switch=0", "--out", dir.string()});
  CHECK(ps.code == 0);
  doc = load_json(dir / "stability.json");
  CHECK(doc["verdict"] == "yes");
  CHECK(doc["distributed_lmi"].size() == 4);
  CHECK(ps.out.find("row") != std::string::npos);

  auto sweep = run_cli({"stability", "--generate", kScalar, "--sweep", "0,0.5,1", "--out", dir.string()});
  CHECK(sweep.code == 0);
  CHECK(load_json(dir / "stability.json")["sweep"]["rows"].size() == 3);
}

TEST_CASE("steady checkpoint") {
  const fs::path a = testing_util::scratch_dir("cli-steady-a");
  const fs::path b = testing_util::scratch_dir("cli-steady-b");
  const auto r = run_cli({"steady", "--generate", kScalar, "--out", a.string()});
  REQUIRE(r.code == 0);
  const SteadyState st = steady_from_json(load_json(a / "steady.json"));
  CHECK(st.p_bar(0, 0) == doctest::Approx(oracle::golden()).epsilon(1e-10));
  CHECK(st.k.k[0](0, 0) == doctest::Approx(oracle::golden() - 1.0).epsilon(1e-6));

  REQUIRE(run_cli({"steady", "--generate", kScalar, "--init-scale", "50", "--out", b.string()}).code == 0);
  const SteadyState other = steady_from_json(load_json(b / "steady.json"));
  CHECK(oracle::max_abs(st.p_bar - other.p_bar) < 1e-8);

  // the checkpoint drives the steady estimator
  const auto sim = run_cli({"simulate", "--generate", kScalar, "--estimators", "steady", "--steady",
                            (a / "steady.json").string(), "--trials", "4", "--horizon", "10", "--out", b.string()});
  CHECK(sim.code == 0);
  CHECK(fs::exists(b / "rmse_steady.csv"));

  const fs::path c = testing_util::scratch_dir("cli-steady-c");
  const auto refuse = run_cli({"steady", "--generate", "scalar a=2 c=0", "--out", c.string()});
  CHECK(refuse.code == 2);
  CHECK(refuse.err.find("diverged") != std::string::npos);
  CHECK_FALSE(fs::exists(c / "steady.json"));
}

TEST_CASE("markov-verify") {
  const fs::path dir = testing_util::scratch_dir("cli-markov");
  auto r = run_cli({"markov-verify", "--generate", "random s=3 nmax=3", "--seed", "4", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto dev = csv_column(dir / "markov.csv", "max_abs_deviation");
  CHECK(dev.size() == 26);
  for (const auto& d : dev) CHECK(std::stod(d) < 1e-11);

  // block-diagonal model: deviation is exactly zero
  Matrix diag = Matrix::Zero(3, 3);
  diag.diagonal() << 0.5, -0.9, 1.1;
  save_model(dir / "diag.json", testing_util::scalar_network(diag));
  REQUIRE(run_cli({"markov-verify", "--model", (dir / "diag.json").string(), "--out", dir.string()}).code == 0);
  for (const auto& d : csv_column(dir / "markov.csv", "max_abs_deviation")) CHECK(std::stod(d) == 0.0);

  // one-way coupling: a column of the transition table sums to 1/2
  Matrix oneway(2, 2);
  oneway << 0.5, 0.3, 0.0, 0.4;
  save_model(dir / "oneway.json", testing_util::scalar_network(oneway));
  auto flagged = run_cli({"markov-verify", "--model", (dir / "oneway.json").string(), "--out", dir.string()});
  CHECK(flagged.code == 0);
  CHECK(flagged.out.find("sums to 0.5") != std::string::npos);
  CHECK(flagged.out.find("sub-stochastic") != std::string::npos);
}

TEST_CASE("help") {
  const auto r = run_cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("simulate") != std::string::npos);
}
