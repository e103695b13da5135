#include "mbsim/app.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mbsim/bb.hpp"
#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/reports.hpp"
#include "mbsim/solution.hpp"

namespace mbsim {

using nlohmann::json;

namespace {

struct Prepared {
  RunConfig cfg;
  std::filesystem::path out;
};

Prepared prepare(const CommandOptions& opts) {
  Prepared p{load_run_config(opts.config), {}};
  if (opts.seed) p.cfg.scenario.seed = *opts.seed;
  if (opts.keep_files) p.cfg.keep_files = true;
  if (opts.jobs < 1) throw ConfigError("--jobs must be >= 1");
  p.out = opts.out ? *opts.out : p.cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(p.out, ec);
  if (ec) throw InputError("cannot create output directory " + p.out.string() + ": " + ec.message());
  // Probe writability up front so a read-only target fails before any work.
  const auto probe = p.out / ".mbsim_write_probe";
  write_text_file(probe, "");
  std::filesystem::remove(probe, ec);
  return p;
}

std::filesystem::path replication_dir(const Prepared& p, int r) {
  return p.cfg.replications == 1 ? p.out : p.out / ("rep_" + std::to_string(r));
}

std::filesystem::path heuristic_dir(const Prepared& p, const std::filesystem::path& rep_dir,
                                    SchedulerKind kind) {
  return p.cfg.heuristics.size() == 1 ? rep_dir : rep_dir / std::string(to_string(kind));
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
}

template <typename Writer, typename Value>
void write_csv(const std::filesystem::path& path, Writer writer, const Value& value) {
  std::ostringstream text;
  writer(text, value);
  write_text_file(path, text.str());
}

// Runs job(0..n-1) on up to `jobs` threads. The first exception, in job
// order, is rethrown after every thread has stopped.
void parallel_for(int n, int jobs, const std::function<void(int)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::min(jobs, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SolverBackend solver_for(const Prepared& p, const BackendSpec& spec,
                         const std::filesystem::path& rep_dir, const CommandOptions& opts) {
  return resolve_backend(spec, opts.self_binary, rep_dir / "solver_work", p.cfg.keep_files);
}

json ratio_stats(const std::vector<double>& ratios) {
  if (ratios.empty()) return json::object();
  double sum = 0.0;
  for (double r : ratios) sum += r;
  return {{"mean", sum / static_cast<double>(ratios.size())},
          {"min", *std::min_element(ratios.begin(), ratios.end())}};
}

void cleanup_workdir(const Prepared& p, const std::filesystem::path& rep_dir) {
  if (p.cfg.keep_files) return;
  std::error_code ec;
  std::filesystem::remove(rep_dir / "solver_work", ec);  // only if empty
}

}  // namespace

void cmd_twin(const CommandOptions& opts, std::ostream& log) {
  const Prepared p = prepare(opts);
  const int R = p.cfg.replications;
  const auto H = p.cfg.heuristics.size();
  std::vector<json> rows(R * H);

  parallel_for(R, opts.jobs, [&](int r) {
    const ScenarioConfig sc = p.cfg.replication(r);
    const auto rep_dir = replication_dir(p, r);
    ensure_dir(rep_dir);
    const Traces traces = make_traces(sc);
    const SolverBackend backend = solver_for(p, p.cfg.solver, rep_dir, opts);
    const RunMetrics optimal = run_in_loop(sc, SchedulerSpec::optimal(backend), traces);
    for (std::size_t h = 0; h < H; ++h) {
      const SchedulerKind kind = p.cfg.heuristics[h];
      const auto dir = heuristic_dir(p, rep_dir, kind);
      ensure_dir(dir);
      const TwinReport report =
          pair_twin(run_in_loop(sc, SchedulerSpec::heuristic(kind), traces), optimal);
      write_csv(dir / "twin.csv", write_twin_csv, report);
      write_csv(dir / ("metrics_" + std::string(to_string(kind)) + ".csv"), write_metrics_csv,
                report.heuristic);
      write_csv(dir / "metrics_optimal.csv", write_metrics_csv, report.optimal);
      rows[r * H + h] = {{"replication", r},
                         {"seed", sc.seed},
                         {"heuristic", to_string(kind)},
                         {"heuristic_bits", report.heuristic.cum_objective},
                         {"optimal_bits", report.optimal.cum_objective},
                         {"cumulative_ratio", report.cumulative_ratio},
                         {"conserved", report.heuristic.conserves() && report.optimal.conserves()}};
    }
    cleanup_workdir(p, rep_dir);
  });

  json summary;
  summary["command"] = "twin";
  summary["method"] = method_name(solver_for(p, p.cfg.solver, p.out, opts));
  summary["runs"] = rows;
  for (auto kind : p.cfg.heuristics) {
    std::vector<double> ratios;
    for (const auto& row : rows) {
      if (row["heuristic"] == to_string(kind)) ratios.push_back(row["cumulative_ratio"]);
    }
    summary["cumulative_ratio"][std::string(to_string(kind))] = ratio_stats(ratios);
  }
  write_text_file(p.out / "summary.json", summary.dump(2) + "\n");
  for (const auto& row : rows) {
    log << "replication " << row["replication"] << " " << row["heuristic"].get<std::string>()
        << ": cumulative ratio " << format_ratio(row["cumulative_ratio"]) << '\n';
  }
}

void cmd_snapshots(const CommandOptions& opts, std::ostream& log) {
  const Prepared p = prepare(opts);
  const int R = p.cfg.replications;
  const auto H = p.cfg.heuristics.size();
  std::vector<json> rows(R * H);

  parallel_for(R, opts.jobs, [&](int r) {
    const ScenarioConfig sc = p.cfg.replication(r);
    const auto rep_dir = replication_dir(p, r);
    ensure_dir(rep_dir);
    const Traces traces = make_traces(sc);
    const SolverBackend backend = solver_for(p, p.cfg.solver, rep_dir, opts);
    for (std::size_t h = 0; h < H; ++h) {
      const SchedulerKind kind = p.cfg.heuristics[h];
      const auto dir = heuristic_dir(p, rep_dir, kind);
      ensure_dir(dir);
      const SnapshotReport report = run_snapshot_mode(sc, SchedulerSpec::heuristic(kind),
                                                      backend, dir / "snapshots", traces);
      write_csv(dir / "snapshot_report.csv", write_snapshot_report_csv, report);
      write_csv(dir / ("metrics_" + std::string(to_string(kind)) + ".csv"), write_metrics_csv,
                report.heuristic);
      json errors = json::array();
      for (const auto& row : report.rows) {
        if (!row.opt_obj) errors.push_back({{"tti", row.tti}, {"error", row.error}});
      }
      rows[r * H + h] = {{"replication", r},
                         {"seed", sc.seed},
                         {"heuristic", to_string(kind)},
                         {"snapshots", report.rows.size()},
                         {"unsolved", report.unsolved},
                         {"cumulative_ratio", report.cumulative_ratio},
                         {"conserved", report.heuristic.conserves()},
                         {"errors", errors}};
    }
    cleanup_workdir(p, rep_dir);
  });

  json summary;
  summary["command"] = "snapshots";
  summary["method"] = method_name(solver_for(p, p.cfg.solver, p.out, opts));
  summary["runs"] = rows;
  for (auto kind : p.cfg.heuristics) {
    std::vector<double> ratios;
    for (const auto& row : rows) {
      if (row["heuristic"] == to_string(kind)) ratios.push_back(row["cumulative_ratio"]);
    }
    summary["cumulative_ratio"][std::string(to_string(kind))] = ratio_stats(ratios);
  }
  write_text_file(p.out / "summary.json", summary.dump(2) + "\n");
  for (const auto& row : rows) {
    log << "replication " << row["replication"] << " " << row["heuristic"].get<std::string>()
        << ": " << row["snapshots"] << " snapshots, " << row["unsolved"]
        << " unsolved, cumulative ratio " << format_ratio(row["cumulative_ratio"]) << '\n';
  }
}

void cmd_bench(const CommandOptions& opts, std::ostream& log) {
  const Prepared p = prepare(opts);
  const ScenarioConfig sc = p.cfg.replication(0);
  const Traces traces = make_traces(sc);

  std::vector<std::string> methods;
  std::vector<RunMetrics> runs;
  for (const auto& spec : p.cfg.bench) {
    const SolverBackend backend = solver_for(p, spec, p.out, opts);
    std::string method(method_name(backend));
    if (std::count(methods.begin(), methods.end(), method) > 0) {
      method += "_" + std::to_string(methods.size());
    }
    runs.push_back(run_in_loop(sc, SchedulerSpec::optimal(backend), traces));
    methods.push_back(method);
    write_csv(p.out / ("metrics_" + method + ".csv"), write_metrics_csv, runs.back());
    log << method << ": " << runs.back().cum_objective << " bits over " << sc.num_ttis
        << " TTIs\n";
  }
  cleanup_workdir(p, p.out);

  const auto reference = runs.front().objectives();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].objectives() != reference) {
      throw ContractError("bench: method " + methods[i] +
                          " produced a different objective series on identical traces");
    }
  }
  std::vector<TaggedRun> tagged;
  for (std::size_t i = 0; i < runs.size(); ++i) tagged.push_back({methods[i], &runs[i]});
  const auto rows = timing_report(tagged);
  write_csv(p.out / "timing_report.csv", write_timing_csv, rows);
  for (std::size_t m = 0; m < rows.size(); m += 3) {
    log << rows[m].method << ": mean creation " << format_ratio(rows[m].mean_us)
        << " us, solving " << format_ratio(rows[m + 1].mean_us) << " us, reading "
        << format_ratio(rows[m + 2].mean_us) << " us\n";
  }

  json summary;
  summary["command"] = "bench";
  summary["methods"] = methods;
  summary["ttis"] = sc.num_ttis;
  summary["objective_series_equal"] = true;
  summary["optimal_bits"] = runs.front().cum_objective;
  write_text_file(p.out / "summary.json", summary.dump(2) + "\n");
}

void cmd_solve(const std::filesystem::path& lp_path, const std::filesystem::path& out_path) {
  LpSourceMap where;
  const LpProblem problem = read_lp(read_text_file(lp_path), &where);
  const SnapshotInstance inst = instance_from_lp(problem, &where);
  const BbResult result = solve_bb(inst);
  const LpSolution solution = to_lp_solution(inst, result);
  write_text_file(out_path, solution_to_xml(solution, problem.name));
  if (result.status != SolveStatus::kOptimal) {
    throw SolverError("search stopped before proving optimality (" +
                      std::string(to_string(result.status)) + ")");
  }
}

int exit_code_of(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return 0;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const RuntimeFailure& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace mbsim
