#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mbsim/scenario.hpp"
#include "mbsim/solverbridge.hpp"
#include "mbsim/timing.hpp"
#include "mbsim/types.hpp"

namespace mbsim {

enum class SchedulerKind { kMaxCi, kGreedy, kPf, kOptimal };

std::string_view to_string(SchedulerKind kind);  // maxci, greedy, pf, optimal
SchedulerKind parse_scheduler_kind(std::string_view name);  // ConfigError

struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::kMaxCi;
  std::optional<SolverBackend> backend;  // required for kOptimal only

  static SchedulerSpec heuristic(SchedulerKind kind);
  static SchedulerSpec optimal(SolverBackend backend);

  bool is_optimal() const { return kind == SchedulerKind::kOptimal; }
  // Scheduler name, with the solve method appended for optimal.
  std::string label() const;
  void validate() const;  // ConfigError
};

struct ScheduleResult {
  Allocation allocation;
  PhaseTimings timings;
};

// One scheduling decision for the current state. Does not mutate anything.
// Heuristics: creation = snapshot build, solving = scheduler, reading = 0.
// Optimal: creation = snapshot + model build (+ LP file write), solving =
// solver run, reading = solution read and decode.
ScheduleResult schedule_once(const SystemState& state, const ChannelTrace& channel,
                             const ScenarioConfig& config, const SchedulerSpec& sched);

struct Traces {
  ChannelTrace channel;
  TrafficTrace traffic;
};

// Generated from config.seed, or loaded when the config names trace files.
Traces make_traces(const ScenarioConfig& config);

struct TtiRecord {
  int tti = 0;
  Bits objective = 0;
  Bits cum_objective = 0;
  PhaseTimings timings;
  std::vector<Bits> served;       // [user]
  std::vector<Backlog> backlog;   // [user], after service
};

struct RunMetrics {
  std::string scheduler;
  std::vector<TtiRecord> ttis;
  std::vector<Backlog> initial_backlog;
  std::vector<Bits> arrived;      // [user], total arrivals over the run
  std::vector<Bits> cum_served;   // [user]
  Bits cum_objective = 0;

  std::vector<Bits> objectives() const;
  // initial + arrivals = final + served for every finite-backlog user.
  bool conserves() const;
};

RunMetrics run_in_loop(const ScenarioConfig& config, const SchedulerSpec& sched,
                       const Traces& traces);

// heur / opt; 1 when both are 0. ContractError when heur > opt or either is
// negative.
double optimality_ratio(Bits heur, Bits opt);

struct TwinReport {
  RunMetrics heuristic;
  RunMetrics optimal;
  std::vector<double> ratio_series;
  double cumulative_ratio = 1.0;
};

TwinReport run_twin(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                    const SolverBackend& backend);
TwinReport run_twin(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                    const SolverBackend& backend, const Traces& traces);
// Ratios for two finished runs over the same traces, so one optimal run
// can serve several heuristics.
TwinReport pair_twin(RunMetrics heuristic, RunMetrics optimal);

struct SnapshotRow {
  int tti = 0;
  Bits heur_obj = 0;
  std::optional<Bits> opt_obj;    // empty when the offline solve failed
  std::optional<double> ratio;
  std::string error;
};

struct SnapshotReport {
  RunMetrics heuristic;
  std::vector<SnapshotRow> rows;
  // Over solved rows only; 1 when nothing was served or solved.
  double cumulative_ratio = 1.0;
  int unsolved = 0;
};

// Evolves the system under `heuristic` only. Each TTI's instance is written
// to export_dir/snap_<tti>.json, read back, and solved through `backend`.
// Solver failures mark the row unsolved; the run continues.
SnapshotReport run_snapshot_mode(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                                 const SolverBackend& backend,
                                 const std::filesystem::path& export_dir);
SnapshotReport run_snapshot_mode(const ScenarioConfig& config, const SchedulerSpec& heuristic,
                                 const SolverBackend& backend,
                                 const std::filesystem::path& export_dir, const Traces& traces);

struct TimingRow {
  std::string method;
  std::string phase;  // creation, solving, reading
  double mean_us = 0.0;
  std::int64_t total_us = 0;
  std::int64_t count = 0;
};

struct TaggedRun {
  std::string method;
  const RunMetrics* metrics = nullptr;
};

// Per method (first-appearance order) and phase, mean and total over every
// TTI of every run with that method. ContractError on no runs.
std::vector<TimingRow> timing_report(const std::vector<TaggedRun>& runs);

}  // namespace mbsim
