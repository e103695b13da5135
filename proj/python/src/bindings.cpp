#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mbsim/app.hpp"
#include "mbsim/bb.hpp"
#include "mbsim/config.hpp"
#include "mbsim/error.hpp"
#include "mbsim/lp.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/reports.hpp"
#include "mbsim/simloop.hpp"
#include "mbsim/solution.hpp"
#include "mbsim/solverbridge.hpp"

namespace py = pybind11;
using namespace mbsim;

namespace {

// Backlogs cross the boundary as int, or None for unbounded.
std::optional<Bits> to_py(const Backlog& q) {
  return q.is_unbounded() ? std::nullopt : std::optional<Bits>(q.bits());
}

Backlog from_py(const std::optional<Bits>& q) {
  return q ? Backlog{*q} : Backlog::unbounded();
}

SnapshotInstance make_instance(std::vector<std::vector<Bits>> rates,
                               const std::vector<std::optional<Bits>>& backlog, std::int64_t tti) {
  SnapshotInstance inst;
  inst.tti = tti;
  inst.rates = std::move(rates);
  for (const auto& q : backlog) inst.backlog.push_back(from_py(q));
  inst.validate();
  return inst;
}

py::dict allocation_dict(const Allocation& a) {
  py::dict d;
  d["assignment"] = a.assignment;
  d["served"] = a.served;
  return d;
}

py::dict timings_dict(const PhaseTimings& t) {
  py::dict d;
  d["creation_us"] = t.creation.count();
  d["solving_us"] = t.solving.count();
  d["reading_us"] = t.reading.count();
  d["total_us"] = t.total.count();
  return d;
}

py::dict run_dict(const RunMetrics& m) {
  py::dict d;
  d["scheduler"] = m.scheduler;
  d["objectives"] = m.objectives();
  d["cum_objective"] = m.cum_objective;
  d["cum_served"] = m.cum_served;
  d["arrived"] = m.arrived;
  d["conserves"] = m.conserves();
  py::list timings;
  for (const auto& rec : m.ttis) timings.append(timings_dict(rec.timings));
  d["timings"] = timings;
  return d;
}

py::dict solution_dict(const LpSolution& s) {
  py::dict d;
  d["status"] = std::string(to_string(s.status));
  d["objective"] = s.objective;
  d["values"] = s.values;
  return d;
}

SolverBackend backend_of(const std::optional<std::string>& command,
                         const std::filesystem::path& workdir, std::int64_t timeout_ms) {
  if (!command) return InProcessBackend{};
  ExternalBackend ext;
  ext.command_template = *command;
  ext.workdir = workdir;
  ext.timeout = std::chrono::milliseconds(timeout_ms);
  return ext;
}

template <typename F>
int command(F&& body) {
  py::gil_scoped_release release;
  body();
  return 0;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiband scheduling simulator with the solver in the loop.";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  py::class_<SnapshotInstance>(m, "Instance")
      .def(py::init(&make_instance), py::arg("rates"), py::arg("backlog"), py::arg("tti") = 0,
           "Rates [user][band] in bits per TTI; backlog per user, None for unbounded.")
      .def_readonly("tti", &SnapshotInstance::tti)
      .def_readonly("rates", &SnapshotInstance::rates)
      .def_property_readonly("backlog",
                             [](const SnapshotInstance& i) {
                               std::vector<std::optional<Bits>> out;
                               for (const auto& q : i.backlog) out.push_back(to_py(q));
                               return out;
                             })
      .def_property_readonly("num_users", &SnapshotInstance::num_users)
      .def_property_readonly("num_bands", &SnapshotInstance::num_bands)
      .def("__eq__", [](const SnapshotInstance& a, const SnapshotInstance& b) { return a == b; })
      .def("__repr__", [](const SnapshotInstance& i) {
        return "<Instance tti=" + std::to_string(i.tti) + " users=" +
               std::to_string(i.num_users()) + " bands=" + std::to_string(i.num_bands()) + ">";
      });

  m.def(
      "solve_bb",
      [](const SnapshotInstance& inst, std::uint64_t max_nodes, std::int64_t timeout_ms) {
        BbLimits limits;
        limits.max_nodes = max_nodes;
        limits.timeout = std::chrono::milliseconds(timeout_ms);
        BbResult r;
        {
          py::gil_scoped_release release;
          r = solve_bb(inst, limits);
        }
        py::dict d = allocation_dict(r.allocation);
        d["status"] = std::string(to_string(r.status));
        d["objective"] = r.objective;
        d["nodes"] = r.nodes_explored;
        d["root_bound"] = r.root_bound;
        d["lexicographic"] = r.lexicographic;
        return d;
      },
      py::arg("instance"), py::arg("max_nodes") = 0, py::arg("timeout_ms") = 0,
      "Exact optimum by branch-and-bound. Limits of 0 mean unlimited.");

  m.def(
      "brute_force_optimal",
      [](const SnapshotInstance& inst) {
        const auto r = brute_force_optimal(inst);
        py::dict d = allocation_dict(r.allocation);
        d["objective"] = r.objective;
        return d;
      },
      py::arg("instance"));

  m.def(
      "schedule",
      [](const SnapshotInstance& inst, const std::string& kind,
         const std::vector<double>& avg_throughput) {
        switch (parse_scheduler_kind(kind)) {
          case SchedulerKind::kMaxCi:
            return allocation_dict(schedule_maxci(inst));
          case SchedulerKind::kGreedy:
            return allocation_dict(schedule_greedy_backlog(inst));
          case SchedulerKind::kPf: {
            std::vector<double> avg = avg_throughput;
            if (avg.empty()) avg.assign(inst.num_users(), 0.0);
            return allocation_dict(schedule_pf(inst, avg));
          }
          case SchedulerKind::kOptimal:
            break;
        }
        throw ConfigError("schedule: use solve_bb for the optimal scheduler");
      },
      py::arg("instance"), py::arg("kind") = "maxci", py::arg("avg_throughput") = std::vector<double>{},
      "One heuristic decision: maxci, greedy or pf.");

  m.def(
      "objective",
      [](const SnapshotInstance& inst, const std::vector<std::optional<int>>& assignment) {
        return objective_of(inst, make_allocation(inst, assignment));
      },
      py::arg("instance"), py::arg("assignment"));

  m.def(
      "write_lp", [](const SnapshotInstance& inst) { return write_lp(build_ilp(inst)); },
      py::arg("instance"), "LP file text of the instance's MILP.");
  m.def("parse_lp", &parse_lp, py::arg("text"), "Instance back from LP text.");

  m.def(
      "solution_xml",
      [](const SnapshotInstance& inst) {
        return solution_to_xml(to_lp_solution(inst, solve_bb(inst)), problem_name_for(inst));
      },
      py::arg("instance"), "Solve in-process and render the solution XML.");
  m.def(
      "parse_solution_xml", [](const std::string& text) { return solution_dict(parse_solution_xml(text)); },
      py::arg("text"));

  m.def(
      "solve_external",
      [](const SnapshotInstance& inst, const std::string& command,
         const std::filesystem::path& workdir, std::int64_t timeout_ms, bool keep_files) {
        ExternalBackend b;
        b.command_template = command;
        b.workdir = workdir;
        b.timeout = std::chrono::milliseconds(timeout_ms);
        b.keep_files = keep_files;
        SolveOutcome out;
        {
          py::gil_scoped_release release;
          out = solve_external(build_ilp(inst), b, inst);
        }
        py::dict d = solution_dict(out.solution);
        d["timings"] = timings_dict(out.timings);
        return d;
      },
      py::arg("instance"), py::arg("command"), py::arg("workdir"), py::arg("timeout_ms") = 60000,
      py::arg("keep_files") = false,
      "Solve through LP and XML files with a command containing {lp} and {sol}.");

  m.def(
      "self_exec_command",
      [](const std::filesystem::path& binary) {
        return self_exec_backend(binary, std::filesystem::temp_directory_path()).command_template;
      },
      py::arg("binary"), "Command template running `binary solve`.");

  m.def(
      "twin",
      [](const std::filesystem::path& config, const std::string& heuristic,
         const std::optional<std::string>& command, const std::filesystem::path& workdir,
         std::int64_t timeout_ms) {
        const RunConfig cfg = load_run_config(config);
        const SolverBackend backend = backend_of(command, workdir, timeout_ms);
        TwinReport r;
        {
          py::gil_scoped_release release;
          r = run_twin(cfg.replication(0), SchedulerSpec::heuristic(parse_scheduler_kind(heuristic)),
                       backend);
        }
        py::dict d;
        d["heuristic"] = run_dict(r.heuristic);
        d["optimal"] = run_dict(r.optimal);
        d["ratio_series"] = r.ratio_series;
        d["cumulative_ratio"] = r.cumulative_ratio;
        return d;
      },
      py::arg("config"), py::arg("heuristic") = "maxci", py::arg("command") = std::nullopt,
      py::arg("workdir") = std::filesystem::temp_directory_path(), py::arg("timeout_ms") = 60000,
      "Heuristic and optimal systems side by side on replication 0 of a config. "
      "`command` selects an external solver; default is in-process.");

  m.def(
      "snapshots",
      [](const std::filesystem::path& config, const std::string& heuristic,
         const std::filesystem::path& export_dir) {
        const RunConfig cfg = load_run_config(config);
        SnapshotReport r;
        {
          py::gil_scoped_release release;
          r = run_snapshot_mode(cfg.replication(0),
                                SchedulerSpec::heuristic(parse_scheduler_kind(heuristic)),
                                InProcessBackend{}, export_dir);
        }
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["tti"] = row.tti;
          d["heur_obj"] = row.heur_obj;
          d["opt_obj"] = row.opt_obj;
          d["ratio"] = row.ratio;
          rows.append(d);
        }
        py::dict d;
        d["heuristic"] = run_dict(r.heuristic);
        d["rows"] = rows;
        d["cumulative_ratio"] = r.cumulative_ratio;
        d["unsolved"] = r.unsolved;
        return d;
      },
      py::arg("config"), py::arg("heuristic") = "maxci", py::arg("export_dir"),
      "Heuristic run with every TTI exported and solved offline in-process.");

  auto options = [](const std::filesystem::path& config, const std::optional<std::filesystem::path>& out,
                    const std::optional<std::uint64_t>& seed, bool keep_files, int jobs,
                    const std::filesystem::path& self_binary) {
    CommandOptions o;
    o.config = config;
    o.out = out;
    o.seed = seed;
    o.keep_files = keep_files;
    o.jobs = jobs;
    o.self_binary = self_binary;
    return o;
  };
  const char* const command_doc = "Same as the CLI subcommand; returns the log text.";
  for (const auto& [name, fn] : {std::pair{"cmd_twin", &cmd_twin},
                                  std::pair{"cmd_snapshots", &cmd_snapshots},
                                  std::pair{"cmd_bench", &cmd_bench}}) {
    m.def(
        name,
        [fn = fn, options](const std::filesystem::path& config,
                           const std::optional<std::filesystem::path>& out,
                           const std::optional<std::uint64_t>& seed, bool keep_files, int jobs,
                           const std::filesystem::path& self_binary) {
          std::ostringstream log;
          const auto o = options(config, out, seed, keep_files, jobs, self_binary);
          command([&] { fn(o, log); });
          return log.str();
        },
        py::arg("config"), py::arg("out") = std::nullopt, py::arg("seed") = std::nullopt,
        py::arg("keep_files") = false, py::arg("jobs") = 1, py::arg("self_binary") = "mbsim",
        command_doc);
  }
  m.def(
      "cmd_solve",
      [](const std::filesystem::path& lp, const std::filesystem::path& out) {
        command([&] { cmd_solve(lp, out); });
      },
      py::arg("lp"), py::arg("out"));
}
