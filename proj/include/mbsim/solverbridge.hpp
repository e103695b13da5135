#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "mbsim/bb.hpp"
#include "mbsim/lp.hpp"
#include "mbsim/solution.hpp"
#include "mbsim/timing.hpp"
#include "mbsim/types.hpp"

namespace mbsim {

// Solve inside the calling process: no files, no spawn.
struct InProcessBackend {
  BbLimits limits;
};

// Solve by writing an LP file, running a command, and reading back a
// solution XML. The template must contain `{lp}` and `{sol}`; they are
// replaced by the shell-quoted absolute file paths.
struct ExternalBackend {
  std::string command_template;
  std::filesystem::path workdir = std::filesystem::temp_directory_path();
  std::chrono::milliseconds timeout{60000};
  bool keep_files = false;
};

using SolverBackend = std::variant<InProcessBackend, ExternalBackend>;

// "in-process" or "external".
std::string_view method_name(const SolverBackend& backend);

// Throws ConfigError for a template missing a placeholder.
void validate_backend(const SolverBackend& backend);

// The binary invoking itself: `<binary> solve --lp {lp} --out {sol}`.
ExternalBackend self_exec_backend(const std::filesystem::path& binary,
                                  const std::filesystem::path& workdir);

// Recovers the MBS instance from an LP model shaped like build_ilp output.
// Rates come from cap_* rows, backlogs from queue_* rows (no row means
// unbounded), the TTI from the `mbs_t<tti>` problem name.
SnapshotInstance instance_from_lp(const LpProblem& problem,
                                  const LpSourceMap* where = nullptr);

// read_lp + instance_from_lp, with line numbers in every error.
SnapshotInstance parse_lp(std::string_view text);

// x_u_b values then s_u values, in build_ilp variable order.
LpSolution to_lp_solution(const SnapshotInstance& inst, const BbResult& result);

struct SolveOutcome {
  LpSolution solution;
  PhaseTimings timings;
};

// Method 1. creation = LP emission and file write, solving = child wall
// time, reading = reading and parsing the solution file. Each call works in
// its own fresh subdirectory of backend.workdir.
SolveOutcome solve_external(const LpProblem& problem,
                            const ExternalBackend& backend,
                            const SnapshotInstance& inst);

// Method 2 from an in-memory model. creation = building the solver's view
// of the model, solving = branch-and-bound, reading = packaging the result.
SolveOutcome solve_inprocess(const LpProblem& problem, const BbLimits& limits);

// Same, straight from the instance.
SolveOutcome solve_inprocess(const SnapshotInstance& inst, const BbLimits& limits);

}  // namespace mbsim
