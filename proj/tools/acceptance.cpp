// Acceptance run: one PASS/FAIL line per criterion, exit 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "mbsim/app.hpp"
#include "mbsim/bb.hpp"
#include "mbsim/config.hpp"
#include "mbsim/lp.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/reports.hpp"
#include "mbsim/simloop.hpp"
#include "mbsim/solverbridge.hpp"

namespace fs = std::filesystem;
using namespace mbsim;

namespace {

constexpr int kInstances = 600;
constexpr double kOracleSeconds = 10.0;
constexpr double kPathwaySeconds = 60.0;
constexpr double kRatioTolerance = 1e-5;
constexpr double kBenchSeconds = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// K <= 4, N <= 5, rates uniform 0..1500, 30% of backlogs unbounded.
std::vector<SnapshotInstance> random_instances(std::uint64_t seed, bool all_unbounded) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> users(1, 4);
  std::uniform_int_distribution<int> bands(1, 5);
  std::uniform_int_distribution<Bits> rate(0, 1500);
  std::uniform_int_distribution<Bits> backlog(0, 3000);
  std::bernoulli_distribution unbounded(0.3);
  std::vector<SnapshotInstance> out(kInstances);
  for (int i = 0; i < kInstances; ++i) {
    auto& inst = out[i];
    inst.tti = i;
    inst.rates.assign(users(rng), std::vector<Bits>(bands(rng)));
    for (auto& row : inst.rates) {
      for (auto& r : row) r = rate(rng);
    }
    for (std::size_t u = 0; u < inst.rates.size(); ++u) {
      inst.backlog.push_back(all_unbounded || unbounded(rng) ? Backlog::unbounded()
                                                             : Backlog{backlog(rng)});
    }
  }
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(path));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream cols(line);
    for (std::string cell; std::getline(cols, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <typename Writer, typename T>
std::string csv_text(Writer write, const T& value) {
  std::ostringstream out;
  write(out, value);
  return out.str();
}

// Metrics CSV with the four timing columns removed.
std::string without_timings(const RunMetrics& m) {
  std::istringstream in(csv_text(write_metrics_csv, m));
  std::string out;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream cols(line);
    for (std::string cell; std::getline(cols, cell, ',');) cells.push_back(cell);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c >= 3 && c <= 6) continue;
      out += cells[c] + ',';
    }
    out += '\n';
  }
  return out;
}

class Acceptance {
 public:
  Acceptance(fs::path configs, fs::path cli, fs::path work)
      : configs_(std::move(configs)), cli_(std::move(cli)), work_(std::move(work)) {}

  int run() {
    instances_ = random_instances(20240611, false);
    check(1, "oracle equivalence", [&] { return oracle(); });
    check(2, "pathway equivalence", [&] { return pathways(); });
    check(3, "reference values", [&] { return reference(); });
    check(4, "uncapped maxci optimality", [&] { return uncapped(); });
    check(5, "snapshot dominance", [&] { return dominance(); });
    check(6, "twin determinism and backend independence", [&] { return twin(); });
    check(9, "phase timing sanity", [&] { return bench(); });
    check(7, "conservation", [&] { return conservation(); });
    check(8, "format round-trips", [&] { return round_trips(); });
    for (const auto& line : lines_) std::cout << line.second << '\n';
    return failures_ == 0 ? 0 : 1;
  }

 private:
  void check(int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures_;
    const std::string line = "criterion " + std::to_string(id) + " " + name + ": " +
                             (o.pass ? "PASS" : "FAIL") + " (" + o.detail + ")";
    auto at = lines_.begin();
    while (at != lines_.end() && at->first < id) ++at;
    lines_.insert(at, {id, line});
  }

  Outcome oracle() {
    const auto start = std::chrono::steady_clock::now();
    int mismatches = 0;
    for (const auto& inst : instances_) {
      if (solve_bb(inst).objective != brute_force_optimal(inst).objective) ++mismatches;
    }
    const double s = seconds_since(start);
    return {mismatches == 0 && s < kOracleSeconds,
            std::to_string(instances_.size()) + " instances, " + std::to_string(mismatches) +
                " mismatches, " + fixed(s) + " s, limit " + fixed(kOracleSeconds, 0) + " s"};
  }

  Outcome pathways() {
    const auto start = std::chrono::steady_clock::now();
    const auto dir = work_ / "pathways";
    fs::create_directories(dir);
    const ExternalBackend backend = self_exec_backend(cli_, dir);
    int mismatches = 0;
    for (const auto& inst : instances_) {
      const auto out = solve_external(build_ilp(inst), backend, inst);
      const Bits ext = objective_of(inst, decode_solution(inst, out.solution));
      if (ext != solve_bb(inst).objective) ++mismatches;
    }
    const double s = seconds_since(start);
    return {mismatches == 0 && s < kPathwaySeconds,
            std::to_string(instances_.size()) + " instances via self-exec, " +
                std::to_string(mismatches) + " mismatches, " + fixed(s) + " s, limit " +
                fixed(kPathwaySeconds, 0) + " s"};
  }

  Outcome reference() {
    SnapshotInstance inst;
    inst.rates = {{10, 9}, {8, 1}};
    inst.backlog = {Backlog{10}, Backlog{8}};
    const Bits maxci = objective_of(inst, schedule_maxci(inst));
    const Bits greedy = objective_of(inst, schedule_greedy_backlog(inst));
    const Bits brute = brute_force_optimal(inst).objective;
    const Bits bb = solve_bb(inst).objective;
    const double ratio = optimality_ratio(maxci, bb);
    const bool ok = maxci == 10 && greedy == 11 && brute == 17 && bb == 17 &&
                    std::abs(ratio - 0.58824) <= kRatioTolerance;
    return {ok, "maxci " + std::to_string(maxci) + ", greedy " + std::to_string(greedy) +
                    ", optimal " + std::to_string(bb) + " (brute force " + std::to_string(brute) +
                    "), ratio " + fixed(ratio, 6)};
  }

  Outcome uncapped() {
    int mismatches = 0;
    for (const auto& inst : random_instances(97, true)) {
      if (objective_of(inst, schedule_maxci(inst)) != brute_force_optimal(inst).objective) {
        ++mismatches;
      }
    }
    return {mismatches == 0, std::to_string(kInstances) + " all-unbounded instances, " +
                                 std::to_string(mismatches) + " mismatches"};
  }

  Outcome dominance() {
    const RunConfig cfg = load_run_config(configs_ / "acceptance.yaml");
    const ScenarioConfig sc = cfg.replication(0);
    const Traces traces = make_traces(sc);
    int rows = 0;
    int violations = 0;
    int unsolved = 0;
    double worst = 1.0;
    std::string per_heuristic;
    for (auto kind : cfg.heuristics) {
      const auto report = run_snapshot_mode(sc, SchedulerSpec::heuristic(kind), InProcessBackend{},
                                            work_ / "snapshots" / std::string(to_string(kind)),
                                            traces);
      unsolved += report.unsolved;
      for (const auto& row : report.rows) {
        ++rows;
        if (!row.opt_obj) continue;
        if (*row.opt_obj < row.heur_obj || !row.ratio || *row.ratio < 0.0 || *row.ratio > 1.0) {
          ++violations;
        } else {
          worst = std::min(worst, *row.ratio);
        }
      }
      per_heuristic += std::string(to_string(kind)) + " " + fixed(report.cumulative_ratio, 4) + " ";
      runs_.push_back(report.heuristic);
    }
    return {violations == 0 && unsolved == 0 && rows == sc.num_ttis * static_cast<int>(cfg.heuristics.size()),
            std::to_string(rows) + " TTI rows, K=" + std::to_string(sc.num_users) +
                " N=" + std::to_string(sc.num_bands) + ", " + std::to_string(violations) +
                " violations, " + std::to_string(unsolved) + " unsolved, min ratio " +
                fixed(worst, 4) + ", cumulative " + per_heuristic.substr(0, per_heuristic.size() - 1)};
  }

  Outcome twin() {
    const RunConfig cfg = load_run_config(configs_ / "acceptance.yaml");
    const ScenarioConfig sc = cfg.replication(0);
    const auto heuristic = SchedulerSpec::heuristic(cfg.heuristics.front());
    const TwinReport a = run_twin(sc, heuristic, InProcessBackend{});
    const TwinReport b = run_twin(sc, heuristic, InProcessBackend{});
    const bool same = csv_text(write_twin_csv, a) == csv_text(write_twin_csv, b) &&
                      without_timings(a.heuristic) == without_timings(b.heuristic) &&
                      without_timings(a.optimal) == without_timings(b.optimal);

    const auto dir = work_ / "twin";
    fs::create_directories(dir);
    const RunMetrics external =
        run_in_loop(sc, SchedulerSpec::optimal(self_exec_backend(cli_, dir)), make_traces(sc));
    const bool independent = external.objectives() == a.optimal.objectives();
    runs_.push_back(a.heuristic);
    runs_.push_back(a.optimal);
    runs_.push_back(external);
    return {same && independent,
            std::to_string(sc.num_ttis) + " TTIs, reruns " + (same ? "identical" : "differ") +
                ", self-exec objective series " + (independent ? "equal" : "differs") +
                ", cumulative ratio " + fixed(a.cumulative_ratio, 4)};
  }

  Outcome bench() {
    CommandOptions opts;
    opts.config = configs_ / "bench.yaml";
    opts.out = work_ / "bench";
    opts.self_binary = cli_;
    std::ostringstream log;
    const auto start = std::chrono::steady_clock::now();
    cmd_bench(opts, log);
    const double s = seconds_since(start);

    bench_scenario_ = load_run_config(opts.config).replication(0);
    int records = 0;
    int inconsistent = 0;
    for (const char* method : {"in-process", "external"}) {
      const auto rows = read_csv(*opts.out / ("metrics_" + std::string(method) + ".csv"));
      bench_metrics_.push_back(rows);
      for (std::size_t r = 1; r < rows.size(); ++r) {
        ++records;
        const auto c = std::stoll(rows[r][3]);
        const auto sv = std::stoll(rows[r][4]);
        const auto rd = std::stoll(rows[r][5]);
        const auto total = std::stoll(rows[r][6]);
        if (c < 0 || sv < 0 || rd < 0 || c + sv + rd > total) ++inconsistent;
      }
    }

    double overhead[2] = {0.0, 0.0};
    for (const auto& row : read_csv(*opts.out / "timing_report.csv")) {
      if (row.size() < 3 || (row[1] != "creation" && row[1] != "reading")) continue;
      if (row[0] == "in-process") overhead[0] += std::stod(row[2]);
      if (row[0] == "external") overhead[1] += std::stod(row[2]);
    }
    const double ratio = overhead[0] > 0 ? overhead[1] / overhead[0] : INFINITY;
    const bool expected_records = records == 2 * bench_scenario_.num_ttis;
    return {s < kBenchSeconds && inconsistent == 0 && expected_records,
            std::to_string(bench_scenario_.num_ttis) + " TTIs x 2 methods in " + fixed(s, 2) +
                " s (limit " + fixed(kBenchSeconds, 0) + " s), " + std::to_string(inconsistent) +
                " inconsistent phase records; creation+reading mean external " +
                fixed(overhead[1], 1) + " us vs in-process " + fixed(overhead[0], 1) +
                " us, overhead ratio " + fixed(ratio, 2) +
                (ratio > 1.0 ? " (external slower, as expected)" : " (not the expected direction)")};
  }

  Outcome conservation() {
    int checked = 0;
    int broken = 0;
    for (const auto& m : runs_) {
      ++checked;
      if (!m.conserves()) ++broken;
    }
    // Bench runs are checked from their CSVs against regenerated traces.
    const Traces traces = make_traces(bench_scenario_);
    const int K = bench_scenario_.num_users;
    for (const auto& rows : bench_metrics_) {
      ++checked;
      bool ok = rows.size() == static_cast<std::size_t>(bench_scenario_.num_ttis) + 1;
      for (int u = 0; ok && u < K; ++u) {
        Bits served = 0;
        Bits arrived = 0;
        for (std::size_t r = 1; r < rows.size(); ++r) {
          served += std::stoll(rows[r][7 + K + u]);
          arrived += traces.traffic.bits(static_cast<int>(r - 1), u);
        }
        const Bits initial = bench_scenario_.initial_backlog_of(u).bits();
        const Bits final_backlog = std::stoll(rows.back()[7 + u]);
        ok = initial + arrived == final_backlog + served;
      }
      if (!ok) ++broken;
    }
    return {broken == 0 && checked > 0,
            std::to_string(checked) + " runs, " + std::to_string(broken) + " violations"};
  }

  Outcome round_trips() {
    int lp_bad = 0;
    int xml_bad = 0;
    for (const auto& inst : instances_) {
      if (parse_lp(write_lp(build_ilp(inst))) != inst) ++lp_bad;
      const LpSolution sol = to_lp_solution(inst, solve_bb(inst));
      if (parse_solution_xml(solution_to_xml(sol, problem_name_for(inst))) != sol) ++xml_bad;
    }
    SnapshotInstance one;
    one.rates = {{5}};
    one.backlog = {Backlog::unbounded()};
    const bool sample = write_lp(build_ilp(one)) ==
                        "\\ mbs_t0\nMaximize\n obj: + 1 s_0\nSubject To\n"
                        " band_0: + 1 x_0_0 <= 1\n cap_0: + 1 s_0 - 5 x_0_0 <= 0\n"
                        "Bounds\n 0 <= s_0\nBinaries\n x_0_0\nEnd\n";
    return {lp_bad == 0 && xml_bad == 0 && sample,
            std::to_string(instances_.size()) + " instances, LP mismatches " +
                std::to_string(lp_bad) + ", XML mismatches " + std::to_string(xml_bad) +
                ", 1x1 sample " + (sample ? "byte-exact" : "differs")};
  }

  fs::path configs_;
  fs::path cli_;
  fs::path work_;
  std::vector<SnapshotInstance> instances_;
  std::vector<RunMetrics> runs_;
  ScenarioConfig bench_scenario_;
  std::vector<std::vector<std::vector<std::string>>> bench_metrics_;
  std::vector<std::pair<int, std::string>> lines_;
  int failures_ = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria of the multiband scheduling simulator"};
  std::string configs = MBSIM_CONFIG_DIR;
  std::string cli = MBSIM_CLI_PATH;
  std::string work;
  app.add_option("--configs", configs, "directory holding acceptance.yaml and bench.yaml");
  app.add_option("--cli", cli, "mbsim binary used as the self-exec solver");
  app.add_option("--work", work, "scratch directory (default: fresh temp dir, removed)");
  CLI11_PARSE(app, argc, argv);

  const bool scratch = work.empty();
  fs::path dir = work;
  if (scratch) {
    dir = fs::temp_directory_path() / ("mbsim_acceptance_" + std::to_string(::getpid()));
  }
  fs::create_directories(dir);
  const int code = Acceptance(configs, cli, dir).run();
  if (scratch) {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  return code;
}
