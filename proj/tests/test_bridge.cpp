#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mbsim/bb.hpp"
#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/solverbridge.hpp"
#include "support.hpp"

using namespace mbsim;
using mbsim::testing::random_instance;
using mbsim::testing::reference_instance;
using mbsim::testing::TempDir;

namespace fs = std::filesystem;

namespace {

ExternalBackend self_exec(const fs::path& workdir) {
  return self_exec_backend(MBSIM_CLI_PATH, workdir);
}

ExternalBackend command(const std::string& tmpl, const fs::path& workdir) {
  ExternalBackend b;
  b.command_template = tmpl;
  b.workdir = workdir;
  return b;
}

bool empty_dir(const fs::path& dir) { return fs::is_empty(dir); }

}  // namespace

TEST_CASE("self-exec solves the reference instance to 17") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  const auto out = solve_external(build_ilp(inst), self_exec(dir.path()), inst);
  CHECK(out.solution.status == SolveStatus::kOptimal);
  CHECK(out.solution.objective == 17.0);
  CHECK(decode_solution(inst, out.solution).served == std::vector<Bits>{9, 8});
  const auto& t = out.timings;
  CHECK(t.creation + t.solving + t.reading <= t.total);
  CHECK(t.solving.count() > 0);
  CHECK(empty_dir(dir.path()));
}

TEST_CASE("external and in-process pathways agree") {
  TempDir dir("bridge");
  std::mt19937_64 rng(2718);
  const auto backend = self_exec(dir.path());
  for (int i = 0; i < 40; ++i) {
    const auto inst = random_instance(rng);
    const auto ext = solve_external(build_ilp(inst), backend, inst);
    const auto inproc = solve_inprocess(build_ilp(inst), BbLimits{});
    CAPTURE(i);
    REQUIRE(ext.solution == inproc.solution);
    REQUIRE(objective_of(inst, decode_solution(inst, ext.solution)) == solve_bb(inst).objective);
  }
}

TEST_CASE("in-process from the model equals in-process from the instance") {
  const auto inst = reference_instance();
  const auto a = solve_inprocess(build_ilp(inst), BbLimits{});
  const auto b = solve_inprocess(inst, BbLimits{});
  CHECK(a.solution == b.solution);
  CHECK(a.timings.creation + a.timings.solving + a.timings.reading <= a.timings.total);
}

TEST_CASE("failing command is a solver error carrying stderr") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  CHECK_THROWS_AS(solve_external(build_ilp(inst), command("false {lp} {sol}", dir.path()), inst),
                  SolverError);
  try {
    solve_external(build_ilp(inst), command("echo broken >&2; exit 4 # {lp} {sol}", dir.path()), inst);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }
}

TEST_CASE("command that writes nothing is a solver error") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  CHECK_THROWS_AS(solve_external(build_ilp(inst), command("true {lp} {sol}", dir.path()), inst),
                  SolverError);
}

TEST_CASE("garbage solution file is a solver error") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  CHECK_THROWS_AS(
      solve_external(build_ilp(inst), command("echo nonsense > {sol} # {lp}", dir.path()), inst),
      SolverError);
}

TEST_CASE("templates missing a placeholder are configuration errors") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  CHECK_THROWS_AS(validate_backend(command("solver {lp}", dir.path())), ConfigError);
  CHECK_THROWS_AS(validate_backend(command("solver {sol}", dir.path())), ConfigError);
  CHECK_THROWS_AS(solve_external(build_ilp(inst), command("solver {lp}", dir.path()), inst),
                  ConfigError);
  CHECK_NOTHROW(validate_backend(self_exec(dir.path())));
  CHECK_NOTHROW(validate_backend(InProcessBackend{}));
}

TEST_CASE("slow command is terminated on timeout") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  auto backend = command("sleep 5 # {lp} {sol}", dir.path());
  backend.timeout = std::chrono::milliseconds(200);
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(solve_external(build_ilp(inst), backend, inst), SolverTimeout);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));
}

TEST_CASE("keep_files leaves the exchange files behind") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  auto backend = self_exec(dir.path());
  backend.keep_files = true;
  solve_external(build_ilp(inst), backend, inst);
  int lp = 0;
  int xml = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir.path())) {
    if (entry.path().filename() == "problem.lp") ++lp;
    if (entry.path().extension() == ".xml") ++xml;
  }
  CHECK(lp == 1);
  CHECK(xml == 1);
}

TEST_CASE("command runs inside its call directory") {
  TempDir dir("bridge");
  const auto inst = reference_instance();
  auto backend = command("pwd > where.txt; cp where.txt " + (dir.path() / "seen.txt").string() +
                             "; false {lp} {sol}",
                         dir.path());
  CHECK_THROWS_AS(solve_external(build_ilp(inst), backend, inst), SolverError);
  std::ifstream seen(dir.path() / "seen.txt");
  std::string where;
  std::getline(seen, where);
  CHECK(fs::path(where).parent_path() == fs::canonical(dir.path()));
}

TEST_CASE("solution conversion lists x then s variables") {
  const auto inst = reference_instance();
  const auto sol = to_lp_solution(inst, solve_bb(inst));
  REQUIRE(sol.values.size() == 6);
  CHECK(sol.values[2] == std::pair<std::string, double>{"x_1_0", 1.0});
  CHECK(sol.values[4] == std::pair<std::string, double>{"s_0", 9.0});
  CHECK(sol.objective == 17.0);
}
