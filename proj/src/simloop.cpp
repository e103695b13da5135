#include "mbsim/simloop.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/reports.hpp"

namespace mbsim {

std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::kMaxCi: return "maxci";
    case SchedulerKind::kGreedy: return "greedy";
    case SchedulerKind::kPf: return "pf";
    case SchedulerKind::kOptimal: return "optimal";
  }
  return "?";
}

SchedulerKind parse_scheduler_kind(std::string_view name) {
  for (auto kind : {SchedulerKind::kMaxCi, SchedulerKind::kGreedy, SchedulerKind::kPf,
                    SchedulerKind::kOptimal}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown scheduler '" + std::string(name) +
                    "' (expected maxci, greedy, pf or optimal)");
}

SchedulerSpec SchedulerSpec::heuristic(SchedulerKind kind) {
  SchedulerSpec spec;
  spec.kind = kind;
  spec.validate();
  return spec;
}

SchedulerSpec SchedulerSpec::optimal(SolverBackend backend) {
  SchedulerSpec spec;
  spec.kind = SchedulerKind::kOptimal;
  spec.backend = std::move(backend);
  spec.validate();
  return spec;
}

std::string SchedulerSpec::label() const {
  std::string out(to_string(kind));
  if (backend) out += "/" + std::string(method_name(*backend));
  return out;
}

void SchedulerSpec::validate() const {
  if (is_optimal() && !backend) throw ConfigError("optimal scheduler needs a solver backend");
  if (!is_optimal() && backend) {
    throw ConfigError("heuristic scheduler " + std::string(to_string(kind)) +
                      " takes no solver backend");
  }
  if (backend) validate_backend(*backend);
}

namespace {

// Rethrows a runtime failure with the TTI prepended, keeping its type.
[[noreturn]] void rethrow_at(int tti) {
  const std::string where = "tti " + std::to_string(tti) + ": ";
  try {
    throw;
  } catch (const SolverTimeout& e) {
    throw SolverTimeout(where + e.what());
  } catch (const SolverError& e) {
    throw SolverError(where + e.what());
  } catch (const ContractError& e) {
    throw ContractError(where + e.what());
  }
}

Allocation run_heuristic(const SnapshotInstance& inst, const SystemState& state,
                         SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::kMaxCi: return schedule_maxci(inst);
    case SchedulerKind::kGreedy: return schedule_greedy_backlog(inst);
    case SchedulerKind::kPf: return schedule_pf(inst, state.avg_throughput);
    case SchedulerKind::kOptimal: break;
  }
  throw ContractError("run_heuristic called for the optimal scheduler");
}

SolveOutcome solve_with(const LpProblem& problem, const SolverBackend& backend,
                        const SnapshotInstance& inst) {
  if (const auto* in = std::get_if<InProcessBackend>(&backend)) {
    return solve_inprocess(problem, in->limits);
  }
  return solve_external(problem, std::get<ExternalBackend>(backend), inst);
}

// Builds, solves and decodes one instance; phases as in schedule_once, with
// `creation` already holding the time spent producing `inst`.
ScheduleResult solve_optimal(const SnapshotInstance& inst, const SolverBackend& backend,
                             Micros creation, Clock::time_point started) {
  ScheduleResult out;
  Stopwatch watch;
  const LpProblem problem = build_ilp(inst);
  out.timings.creation = creation + watch.lap();
  const SolveOutcome solved = solve_with(problem, backend, inst);
  watch.lap();
  out.timings.creation += solved.timings.creation;
  out.timings.solving = solved.timings.solving;
  out.allocation = decode_solution(inst, solved.solution);
  out.timings.reading = solved.timings.reading + watch.lap();
  out.timings.total = std::chrono::duration_cast<Micros>(Clock::now() - started);
  return out;
}

}  // namespace

ScheduleResult schedule_once(const SystemState& state, const ChannelTrace& channel,
                             const ScenarioConfig& config, const SchedulerSpec& sched) {
  if (state.tti < 0 || state.tti >= config.num_ttis) {
    throw ContractError("schedule_once: tti " + std::to_string(state.tti) +
                        " outside the horizon");
  }
  const auto started = Clock::now();
  Stopwatch watch;
  const SnapshotInstance inst = build_snapshot(state, channel, config);
  const Micros creation = watch.lap();
  try {
    if (sched.is_optimal()) {
      sched.validate();
      return solve_optimal(inst, *sched.backend, creation, started);
    }
    ScheduleResult out;
    out.allocation = run_heuristic(inst, state, sched.kind);
    out.timings.creation = creation;
    out.timings.solving = watch.lap();
    out.timings.total = std::chrono::duration_cast<Micros>(Clock::now() - started);
    return out;
  } catch (const RuntimeFailure&) {
    rethrow_at(state.tti);
  }
}

Traces make_traces(const ScenarioConfig& config) {
  config.validate();
  return Traces{gen_channel_trace(config), gen_traffic_trace(config)};
}

std::vector<Bits> RunMetrics::objectives() const {
  std::vector<Bits> out;
  out.reserve(ttis.size());
  for (const auto& r : ttis) out.push_back(r.objective);
  return out;
}

bool RunMetrics::conserves() const {
  if (ttis.empty()) return true;
  const auto& final_backlog = ttis.back().backlog;
  for (std::size_t u = 0; u < initial_backlog.size(); ++u) {
    if (initial_backlog[u].is_unbounded()) {
      if (!final_backlog[u].is_unbounded()) return false;
      continue;
    }
    if (final_backlog[u].is_unbounded()) return false;
    if (initial_backlog[u].bits() + arrived[u] != final_backlog[u].bits() + cum_served[u]) {
      return false;
    }
  }
  return true;
}

RunMetrics run_in_loop(const ScenarioConfig& config, const SchedulerSpec& sched,
                       const Traces& traces) {
  config.validate();
  sched.validate();
  const int T = config.num_ttis;
  const int K = config.num_users;
  if (traces.channel.num_ttis() < T || traces.channel.num_users() != K ||
      traces.channel.num_bands() != config.num_bands || traces.traffic.num_ttis() < T ||
      traces.traffic.num_users() != K) {
    throw InputError("traces do not match the scenario dimensions");
  }

  RunMetrics metrics;
  metrics.scheduler = sched.label();
  SystemState state = initial_state(config);
  metrics.initial_backlog = state.backlog;
  metrics.arrived.assign(K, 0);
  metrics.cum_served.assign(K, 0);
  metrics.ttis.reserve(T);

  for (int t = 0; t < T; ++t) {
    state = apply_arrivals(std::move(state), traces.traffic, t);
    for (int u = 0; u < K; ++u) metrics.arrived[u] += traces.traffic.bits(t, u);
    ScheduleResult step = schedule_once(state, traces.channel, config, sched);
    state = apply_service(std::move(state), step.allocation, config.pf_alpha);

    TtiRecord rec;
    rec.tti = t;
    rec.served = step.allocation.served;
    rec.objective = std::accumulate(rec.served.begin(), rec.served.end(), Bits{0});
    metrics.cum_objective += rec.objective;
    rec.cum_objective = metrics.cum_objective;
    rec.timings = step.timings;
    if (!sched.is_optimal()) rec.timings = PhaseTimings{.total = step.timings.total};
    rec.backlog = state.backlog;
    for (int u = 0; u < K; ++u) metrics.cum_served[u] += rec.served[u];
    metrics.ttis.push_back(std::move(rec));
  }
  return metrics;
}

double optimality_ratio(Bits heur, Bits opt) {
  if (heur < 0 || opt < 0) throw ContractError("negative objective in optimality ratio");
  if (heur > opt) {
    throw ContractError("dominance violated: heuristic " + std::to_string(heur) +
                        " exceeds optimum " + std::to_string(opt));
  }
  if (opt == 0) return 1.0;
  return static_cast<double>(heur) / static_cast<double>(opt);
}

TwinReport run_twin(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                    const SolverBackend& backend) {
  return run_twin(config, heuristic, backend, make_traces(config));
}

TwinReport run_twin(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                    const SolverBackend& backend, const Traces& traces) {
  if (heuristic.is_optimal()) throw ConfigError("twin run needs a heuristic scheduler");
  return pair_twin(run_in_loop(config, heuristic, traces),
                   run_in_loop(config, SchedulerSpec::optimal(backend), traces));
}

TwinReport pair_twin(RunMetrics heuristic, RunMetrics optimal) {
  if (heuristic.ttis.size() != optimal.ttis.size()) {
    throw ContractError("twin runs differ in length");
  }
  TwinReport report;
  report.heuristic = std::move(heuristic);
  report.optimal = std::move(optimal);
  // The two trajectories diverge, so only the per-TTI quotient is reported;
  // it may exceed 1 once the queues differ.
  for (std::size_t t = 0; t < report.heuristic.ttis.size(); ++t) {
    const Bits h = report.heuristic.ttis[t].objective;
    const Bits o = report.optimal.ttis[t].objective;
    double ratio = 1.0;
    if (o > 0) {
      ratio = static_cast<double>(h) / static_cast<double>(o);
    } else if (h > 0) {
      ratio = std::numeric_limits<double>::infinity();
    }
    report.ratio_series.push_back(ratio);
  }
  const Bits h = report.heuristic.cum_objective;
  const Bits o = report.optimal.cum_objective;
  report.cumulative_ratio = o == 0 ? 1.0 : static_cast<double>(h) / static_cast<double>(o);
  return report;
}

SnapshotReport run_snapshot_mode(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                                 const SolverBackend& backend,
                                 const std::filesystem::path& export_dir) {
  return run_snapshot_mode(config, heuristic, backend, export_dir, make_traces(config));
}

SnapshotReport run_snapshot_mode(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                                 const SolverBackend& backend,
                                 const std::filesystem::path& export_dir, const Traces& traces) {
  if (heuristic.is_optimal()) throw ConfigError("snapshot mode needs a heuristic scheduler");
  validate_backend(backend);
  std::error_code ec;
  std::filesystem::create_directories(export_dir, ec);
  if (ec) throw InputError("cannot create " + export_dir.string() + ": " + ec.message());

  SnapshotReport report;
  report.heuristic = run_in_loop(config, heuristic, traces);

  // Replay the heuristic trajectory to export each TTI's instance.
  SystemState state = initial_state(config);
  Bits heur_solved = 0;
  Bits opt_solved = 0;
  for (const auto& rec : report.heuristic.ttis) {
    state = apply_arrivals(std::move(state), traces.traffic, rec.tti);
    const SnapshotInstance inst = build_snapshot(state, traces.channel, config);
    const auto file = export_dir / snapshot_file_name(rec.tti);
    write_text_file(file, snapshot_to_json(inst));

    SnapshotRow row;
    row.tti = rec.tti;
    row.heur_obj = rec.objective;
    try {
      const SnapshotInstance offline = snapshot_from_json(read_text_file(file));
      const auto solved = solve_optimal(offline, backend, Micros{0}, Clock::now());
      row.opt_obj = objective_of(offline, solved.allocation);
    } catch (const SolverError& e) {
      row.error = e.what();
    }
    if (row.opt_obj) {
      row.ratio = optimality_ratio(row.heur_obj, *row.opt_obj);
      heur_solved += row.heur_obj;
      opt_solved += *row.opt_obj;
    } else {
      ++report.unsolved;
    }
    report.rows.push_back(std::move(row));

    Allocation taken;
    taken.served = rec.served;
    state = apply_service(std::move(state), taken, config.pf_alpha);
  }
  report.cumulative_ratio = optimality_ratio(heur_solved, opt_solved);
  return report;
}

std::vector<TimingRow> timing_report(const std::vector<TaggedRun>& runs) {
  std::vector<TimingRow> rows;
  for (const auto& run : runs) {
    if (!run.metrics) continue;
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const TimingRow& r) { return r.method == run.method; });
    if (it == rows.end()) {
      for (const char* phase : {"creation", "solving", "reading"}) {
        rows.push_back(TimingRow{run.method, phase, 0.0, 0, 0});
      }
      it = rows.end() - 3;
    }
    for (const auto& rec : run.metrics->ttis) {
      it[0].total_us += rec.timings.creation.count();
      it[1].total_us += rec.timings.solving.count();
      it[2].total_us += rec.timings.reading.count();
      for (int p = 0; p < 3; ++p) ++it[p].count;
    }
  }
  if (rows.empty()) throw ContractError("timing report: no optimal runs");
  for (auto& row : rows) {
    row.mean_us = row.count == 0 ? 0.0
                                 : static_cast<double>(row.total_us) / static_cast<double>(row.count);
  }
  return rows;
}

}  // namespace mbsim
