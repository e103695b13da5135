#include "mbsim/solverbridge.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>
#include <unordered_map>

#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/subprocess.hpp"

namespace mbsim {

std::string_view method_name(const SolverBackend& backend) {
  return std::holds_alternative<InProcessBackend>(backend) ? "in-process" : "external";
}

void validate_backend(const SolverBackend& backend) {
  const auto* external = std::get_if<ExternalBackend>(&backend);
  if (!external) return;
  for (const char* placeholder : {"{lp}", "{sol}"}) {
    if (external->command_template.find(placeholder) == std::string::npos) {
      throw ConfigError("external command template lacks " + std::string(placeholder) +
                        ": " + external->command_template);
    }
  }
  if (external->timeout.count() < 0) throw ConfigError("negative solver timeout");
}

ExternalBackend self_exec_backend(const std::filesystem::path& binary,
                                  const std::filesystem::path& workdir) {
  ExternalBackend backend;
  backend.command_template =
      shell_quote(std::filesystem::absolute(binary).string()) + " solve --lp {lp} --out {sol}";
  backend.workdir = workdir;
  return backend;
}

namespace {

bool is_integral(double v) {
  return std::isfinite(v) && std::trunc(v) == v && std::fabs(v) < 9007199254740992.0;
}

// Line of the first item where `got` departs from `want`, for errors.
std::size_t first_difference(const LpProblem& got, const LpProblem& want,
                             const LpSourceMap* where, std::string& what) {
  auto line = [&](const std::vector<std::size_t>& lines, std::size_t i) -> std::size_t {
    return where && i < lines.size() ? lines[i] : 0;
  };
  if (got.objective != want.objective) {
    what = "objective is not the MBS throughput sum";
    return where ? where->objective_line : 0;
  }
  for (std::size_t i = 0; i < std::max(got.binaries.size(), want.binaries.size()); ++i) {
    if (i >= got.binaries.size() || i >= want.binaries.size() ||
        got.binaries[i] != want.binaries[i]) {
      what = "unexpected binary variable list";
      return line(where ? where->binary_lines : std::vector<std::size_t>{},
                  std::min(i, got.binaries.size() - (got.binaries.empty() ? 0 : 1)));
    }
  }
  for (std::size_t i = 0; i < std::max(got.constraints.size(), want.constraints.size()); ++i) {
    if (i >= want.constraints.size()) {
      what = "unexpected constraint '" + got.constraints[i].name + "'";
      return line(where ? where->constraint_lines : std::vector<std::size_t>{}, i);
    }
    if (i >= got.constraints.size()) {
      what = "missing constraint '" + want.constraints[i].name + "'";
      return 0;
    }
    if (got.constraints[i] != want.constraints[i]) {
      what = "constraint '" + got.constraints[i].name + "' does not match the MBS model";
      return line(where ? where->constraint_lines : std::vector<std::size_t>{}, i);
    }
  }
  for (std::size_t i = 0; i < std::max(got.bounds.size(), want.bounds.size()); ++i) {
    if (i >= got.bounds.size() || i >= want.bounds.size() || got.bounds[i] != want.bounds[i]) {
      what = "unexpected bounds";
      return line(where ? where->bound_lines : std::vector<std::size_t>{},
                  std::min(i, got.bounds.empty() ? 0 : got.bounds.size() - 1));
    }
  }
  what = "problem does not match the MBS model";
  return 0;
}

}  // namespace

SnapshotInstance instance_from_lp(const LpProblem& problem, const LpSourceMap* where) {
  auto fail = [](const std::string& what, std::size_t line) -> ParseError {
    return ParseError("not an MBS model: " + what, line);
  };

  SnapshotInstance inst;
  constexpr std::string_view kPrefix = "mbs_t";
  if (problem.name.rfind(kPrefix, 0) != 0) {
    throw fail("problem name '" + problem.name + "' is not mbs_t<tti>", 1);
  }
  {
    const auto digits = std::string_view(problem.name).substr(kPrefix.size());
    const auto* end = digits.data() + digits.size();
    const auto [ptr, ec] = std::from_chars(digits.data(), end, inst.tti);
    if (digits.empty() || ec != std::errc{} || ptr != end || inst.tti < 0) {
      throw fail("problem name '" + problem.name + "' is not mbs_t<tti>", 1);
    }
  }

  const int K = static_cast<int>(problem.objective.size());
  if (K == 0) throw fail("empty objective", where ? where->objective_line : 0);
  if (problem.binaries.empty() || problem.binaries.size() % K != 0) {
    throw fail("binary count is not a multiple of the user count",
               where && !where->binary_lines.empty() ? where->binary_lines.front() : 0);
  }
  const int N = static_cast<int>(problem.binaries.size()) / K;

  std::unordered_map<std::string, std::pair<int, int>> assign_index;
  for (int u = 0; u < K; ++u) {
    for (int b = 0; b < N; ++b) assign_index.emplace(assign_var(u, b), std::pair{u, b});
  }

  inst.rates.assign(K, std::vector<Bits>(N, 0));
  inst.backlog.assign(K, Backlog::unbounded());
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const auto& c = problem.constraints[i];
    const std::size_t line = where && i < where->constraint_lines.size() ? where->constraint_lines[i] : 0;
    if (c.name.rfind("cap_", 0) == 0) {
      for (const auto& t : c.terms) {
        const auto it = assign_index.find(t.var);
        if (it == assign_index.end()) continue;
        const auto [u, b] = it->second;
        if (!is_integral(t.coeff) || t.coeff > 0) {
          throw fail("rate for " + t.var + " is not a non-negative integer", line);
        }
        inst.rates[u][b] = static_cast<Bits>(-t.coeff);
      }
    } else if (c.name.rfind("queue_", 0) == 0) {
      if (c.terms.size() != 1) throw fail("queue row with several terms", line);
      int u = -1;
      for (int v = 0; v < K; ++v) {
        if (c.terms[0].var == served_var(v)) u = v;
      }
      if (u < 0) throw fail("queue row on unknown variable " + c.terms[0].var, line);
      if (!is_integral(c.rhs) || c.rhs < 0) {
        throw fail("backlog is not a non-negative integer", line);
      }
      inst.backlog[u] = Backlog{static_cast<Bits>(c.rhs)};
    }
  }

  // Anything else about the structure must be exactly what build_ilp emits.
  const LpProblem expected = build_ilp(inst);
  if (!(expected == problem)) {
    std::string what;
    const auto line = first_difference(problem, expected, where, what);
    throw fail(what, line);
  }
  return inst;
}

SnapshotInstance parse_lp(std::string_view text) {
  LpSourceMap where;
  const LpProblem problem = read_lp(text, &where);
  return instance_from_lp(problem, &where);
}

LpSolution to_lp_solution(const SnapshotInstance& inst, const BbResult& result) {
  LpSolution sol;
  sol.status = result.status;
  sol.objective = static_cast<double>(result.objective);
  const int K = inst.num_users();
  const int N = inst.num_bands();
  for (int u = 0; u < K; ++u) {
    for (int b = 0; b < N; ++b) {
      const bool on = result.allocation.assignment[b] == u;
      sol.values.emplace_back(assign_var(u, b), on ? 1.0 : 0.0);
    }
  }
  for (int u = 0; u < K; ++u) {
    sol.values.emplace_back(served_var(u), static_cast<double>(result.allocation.served[u]));
  }
  return sol;
}

namespace {

std::filesystem::path fresh_call_dir(const std::filesystem::path& root, std::int64_t tti) {
  static std::atomic<std::uint64_t> counter{0};
  std::filesystem::create_directories(root);
  while (true) {
    const auto dir = root / ("call_" + std::to_string(getpid()) + "_t" + std::to_string(tti) +
                             "_" + std::to_string(counter++));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

void replace_all(std::string& text, std::string_view from, const std::string& to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
}

// Removes the call directory unless files are to be kept.
class CallDir {
 public:
  CallDir(std::filesystem::path path, bool keep) : path_(std::move(path)), keep_(keep) {}
  ~CallDir() {
    if (!keep_) {
      std::error_code ec;
      std::filesystem::remove_all(path_, ec);
    }
  }
  CallDir(const CallDir&) = delete;
  CallDir& operator=(const CallDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool keep_;
};

}  // namespace

SolveOutcome solve_external(const LpProblem& problem, const ExternalBackend& backend,
                            const SnapshotInstance& inst) {
  validate_backend(backend);
  const auto started = Clock::now();
  Stopwatch watch;
  SolveOutcome out;

  std::error_code ec;
  const auto root = std::filesystem::absolute(backend.workdir, ec);
  CallDir dir(fresh_call_dir(root, inst.tti), backend.keep_files);
  const auto lp_path = dir.path() / "problem.lp";
  const auto sol_path = dir.path() / "solution.xml";
  {
    std::ofstream lp(lp_path, std::ios::binary);
    lp << write_lp(problem);
    if (!lp.flush()) throw SolverError("cannot write " + lp_path.string());
  }
  std::string command = backend.command_template;
  replace_all(command, "{lp}", shell_quote(lp_path.string()));
  replace_all(command, "{sol}", shell_quote(sol_path.string()));
  out.timings.creation = watch.lap();

  const auto result = run_command(command, dir.path(), backend.timeout);
  out.timings.solving = watch.lap();
  if (result.exit_code != 0) {
    throw SolverError("external solver exited with code " + std::to_string(result.exit_code) +
                      (result.stderr_text.empty() ? "" : ": " + result.stderr_text));
  }

  std::ifstream in(sol_path, std::ios::binary);
  if (!in) throw SolverError("external solver wrote no solution file " + sol_path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    out.solution = parse_solution_xml(text.str());
  } catch (const ParseError& e) {
    throw SolverError(std::string("unreadable solution file: ") + e.what());
  }
  out.timings.reading = watch.lap();
  out.timings.total = std::chrono::duration_cast<Micros>(Clock::now() - started);
  return out;
}

SolveOutcome solve_inprocess(const LpProblem& problem, const BbLimits& limits) {
  const auto started = Clock::now();
  Stopwatch watch;
  SolveOutcome out;
  const SnapshotInstance inst = instance_from_lp(problem);
  out.timings.creation = watch.lap();
  const BbResult result = solve_bb(inst, limits);
  out.timings.solving = watch.lap();
  out.solution = to_lp_solution(inst, result);
  out.timings.reading = watch.lap();
  out.timings.total = std::chrono::duration_cast<Micros>(Clock::now() - started);
  return out;
}

SolveOutcome solve_inprocess(const SnapshotInstance& inst, const BbLimits& limits) {
  const auto started = Clock::now();
  Stopwatch watch;
  SolveOutcome out;
  inst.validate();
  out.timings.creation = watch.lap();
  const BbResult result = solve_bb(inst, limits);
  out.timings.solving = watch.lap();
  out.solution = to_lp_solution(inst, result);
  out.timings.reading = watch.lap();
  out.timings.total = std::chrono::duration_cast<Micros>(Clock::now() - started);
  return out;
}

}  // namespace mbsim
