#include <doctest.h>

#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mbsim/lp.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/reports.hpp"
#include "support.hpp"

using namespace mbsim;
using mbsim::testing::reference_instance;
using mbsim::testing::TempDir;

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(MBSIM_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

// Small in-process run, K=3 N=4.
std::string small_config(const std::string& extra = "") {
  return "scenario:\n"
         "  users: 3\n  bands: 4\n  ttis: 12\n  seed: 4\n"
         "  channel: {model: random_walk, step: 2}\n"
         "  traffic: {model: bernoulli_burst, p: 0.5, bits: 1500}\n"
         "  initial_backlog: 800\n"
         "heuristics: [maxci, greedy]\n"
         "bench: [in-process, self]\n" +
         extra;
}

std::string reference_config(const fs::path& dir) {
  spit(dir / "channel.csv", "tti,user,band,cqi\n0,0,0,10\n0,0,1,9\n0,1,0,8\n0,1,1,1\n");
  return "scenario:\n"
         "  users: 2\n  bands: 2\n  ttis: 1\n"
         "  rate_table: [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15]\n"
         "  channel: {model: trace, path: channel.csv}\n"
         "  traffic: {model: constant, bits: 0}\n"
         "  initial_backlog: [10, 8]\n";
}

}  // namespace

TEST_CASE("solve writes the reference optimum") {
  TempDir dir("cli");
  spit(dir.path() / "ref.lp", write_lp(build_ilp(reference_instance())));
  const auto sol = dir.path() / "ref.xml";
  REQUIRE(run("solve --lp " + (dir.path() / "ref.lp").string() + " --out " + sol.string(),
              dir.path() / "log") == 0);
  CHECK(slurp(sol).find("objectiveValue=\"17\"") != std::string::npos);
}

TEST_CASE("solve handles the 1x1 sample") {
  TempDir dir("cli");
  SnapshotInstance one;
  one.rates = {{5}};
  one.backlog = {Backlog::unbounded()};
  spit(dir.path() / "one.lp", write_lp(build_ilp(one)));
  REQUIRE(run("solve --lp " + (dir.path() / "one.lp").string() + " --out " +
                  (dir.path() / "one.xml").string(),
              dir.path() / "log") == 0);
  CHECK(slurp(dir.path() / "one.xml").find("objectiveValue=\"5\"") != std::string::npos);
}

TEST_CASE("malformed LP exits with 2") {
  TempDir dir("cli");
  spit(dir.path() / "bad.lp", "\\ mbs_t0\nMinimize\n obj: + 1 s_0\nEnd\n");
  CHECK(run("solve --lp " + (dir.path() / "bad.lp").string() + " --out " +
                (dir.path() / "x.xml").string(),
            dir.path() / "log") == 2);
  CHECK(slurp(dir.path() / "log").find("line 2") != std::string::npos);
  CHECK(run("solve --lp /nonexistent.lp --out " + (dir.path() / "x.xml").string(),
            dir.path() / "log") == 2);
}

TEST_CASE("usage errors exit with 2") {
  TempDir dir("cli");
  CHECK(run("", dir.path() / "log") == 2);
  CHECK(run("twin", dir.path() / "log") == 2);
  CHECK(run("frobnicate", dir.path() / "log") == 2);
  CHECK(run("twin --config /nonexistent.yaml", dir.path() / "log") == 2);
  CHECK(run("--help", dir.path() / "log") == 0);
}

TEST_CASE("template without {lp} exits with 2") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml",
       small_config("solver: {backend: external, command: \"solver {sol}\"}\n"));
  CHECK(run("twin --config " + (dir.path() / "run.yaml").string(), dir.path() / "log") == 2);
}

TEST_CASE("unwritable output directory exits with 2") {
  if (geteuid() == 0) return;  // root writes anywhere
  TempDir dir("cli");
  fs::create_directories(dir.path() / "locked");
  fs::permissions(dir.path() / "locked", fs::perms::owner_read | fs::perms::owner_exec);
  spit(dir.path() / "run.yaml", small_config());
  CHECK(run("twin --config " + (dir.path() / "run.yaml").string() + " --out " +
                (dir.path() / "locked" / "out").string(),
            dir.path() / "log") == 2);
}

TEST_CASE("output path that is a file exits with 2") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", small_config());
  spit(dir.path() / "taken", "");
  CHECK(run("twin --config " + (dir.path() / "run.yaml").string() + " --out " +
                (dir.path() / "taken").string(),
            dir.path() / "log") == 2);
}

TEST_CASE("failing solver in the loop exits with 3") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml",
       small_config("solver: {backend: external, command: \"false {lp} {sol}\"}\n"));
  CHECK(run("twin --config " + (dir.path() / "run.yaml").string() + " --out " +
                (dir.path() / "out").string(),
            dir.path() / "log") == 3);
}

TEST_CASE("failing solver in snapshot mode leaves unsolved rows") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml",
       small_config("solver: {backend: external, command: \"false {lp} {sol}\"}\n"));
  REQUIRE(run("snapshots --config " + (dir.path() / "run.yaml").string() + " --out " +
                  (dir.path() / "out").string(),
              dir.path() / "log") == 0);
  const auto report = slurp(dir.path() / "out" / "maxci" / "snapshot_report.csv");
  CHECK(report.find("unsolved") != std::string::npos);
}

TEST_CASE("twin on the reference writes ratio 10/17") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", reference_config(dir.path()));
  REQUIRE(run("twin --config " + (dir.path() / "run.yaml").string() + " --out " +
                  (dir.path() / "out").string(),
              dir.path() / "log") == 0);
  const auto twin = slurp(dir.path() / "out" / "twin.csv");
  CHECK(twin == "tti,heur_obj,opt_obj,ratio\n0,10,17,0.5882352941176471\n");
  CHECK(fs::exists(dir.path() / "out" / "summary.json"));
  CHECK(fs::exists(dir.path() / "out" / "metrics_optimal.csv"));
}

TEST_CASE("snapshots on the reference export and solve the TTI") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", reference_config(dir.path()));
  REQUIRE(run("snapshots --config " + (dir.path() / "run.yaml").string() + " --out " +
                  (dir.path() / "out").string(),
              dir.path() / "log") == 0);
  CHECK(slurp(dir.path() / "out" / "snapshot_report.csv").find("0,10,17,") != std::string::npos);
  CHECK(fs::exists(dir.path() / "out" / "snapshots" / snapshot_file_name(0)));
}

TEST_CASE("reruns produce identical non-timing files") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", small_config());
  const auto config = (dir.path() / "run.yaml").string();
  REQUIRE(run("twin --config " + config + " --out " + (dir.path() / "a").string(),
              dir.path() / "log") == 0);
  REQUIRE(run("twin --config " + config + " --out " + (dir.path() / "b").string(),
              dir.path() / "log") == 0);
  for (const char* h : {"maxci", "greedy"}) {
    CHECK(slurp(dir.path() / "a" / h / "twin.csv") == slurp(dir.path() / "b" / h / "twin.csv"));
  }
}

TEST_CASE("seed override changes the run") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", small_config());
  const auto config = (dir.path() / "run.yaml").string();
  REQUIRE(run("twin --config " + config + " --out " + (dir.path() / "a").string(),
              dir.path() / "log") == 0);
  REQUIRE(run("twin --config " + config + " --seed 99 --out " + (dir.path() / "b").string(),
              dir.path() / "log") == 0);
  CHECK(slurp(dir.path() / "a" / "maxci" / "twin.csv") !=
        slurp(dir.path() / "b" / "maxci" / "twin.csv"));
}

TEST_CASE("bench times both methods on identical objectives") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", small_config());
  REQUIRE(run("bench --config " + (dir.path() / "run.yaml").string() + " --out " +
                  (dir.path() / "out").string(),
              dir.path() / "log") == 0);
  const auto report = slurp(dir.path() / "out" / "timing_report.csv");
  CHECK(report.rfind("method,phase,mean_us,total_us,count\n", 0) == 0);
  CHECK(report.find("in-process,creation,") != std::string::npos);
  CHECK(report.find("external,reading,") != std::string::npos);
  CHECK(fs::exists(dir.path() / "out" / "metrics_in-process.csv"));
  CHECK(fs::exists(dir.path() / "out" / "metrics_external.csv"));
}

TEST_CASE("replications run in parallel into separate directories") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", small_config("replications: 3\n"));
  const auto config = (dir.path() / "run.yaml").string();
  REQUIRE(run("twin --jobs 3 --config " + config + " --out " + (dir.path() / "p").string(),
              dir.path() / "log") == 0);
  REQUIRE(run("twin --jobs 1 --config " + config + " --out " + (dir.path() / "s").string(),
              dir.path() / "log") == 0);
  for (const char* rep : {"rep_0", "rep_1", "rep_2"}) {
    CHECK(slurp(dir.path() / "p" / rep / "maxci" / "twin.csv") ==
          slurp(dir.path() / "s" / rep / "maxci" / "twin.csv"));
  }
  CHECK(slurp(dir.path() / "p" / "rep_0" / "maxci" / "twin.csv") !=
        slurp(dir.path() / "p" / "rep_1" / "maxci" / "twin.csv"));
}

TEST_CASE("keep-files retains solver exchange files") {
  TempDir dir("cli");
  spit(dir.path() / "run.yaml", small_config("solver: self\n"));
  REQUIRE(run("twin --keep-files --config " + (dir.path() / "run.yaml").string() + " --out " +
                  (dir.path() / "out").string(),
              dir.path() / "log") == 0);
  int lp = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "out")) {
    if (e.path().filename() == "problem.lp") ++lp;
  }
  CHECK(lp == 12);
}
