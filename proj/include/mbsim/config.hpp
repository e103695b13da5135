#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mbsim/bb.hpp"
#include "mbsim/scenario.hpp"
#include "mbsim/simloop.hpp"
#include "mbsim/solverbridge.hpp"

namespace mbsim {

enum class BackendKind { kInProcess, kExternal, kSelf };

// A solver backend as written in a config file. `kSelf` becomes an external
// backend running this program's own `solve` subcommand.
struct BackendSpec {
  BackendKind kind = BackendKind::kInProcess;
  std::string command;                      // kExternal only
  std::chrono::milliseconds timeout{60000};  // external call limit
  BbLimits limits;                          // in-process search limits
};

SolverBackend resolve_backend(const BackendSpec& spec, const std::filesystem::path& self_binary,
                              const std::filesystem::path& workdir, bool keep_files);

struct RunConfig {
  ScenarioConfig scenario;
  std::vector<SchedulerKind> heuristics{SchedulerKind::kMaxCi};
  BackendSpec solver;
  std::vector<BackendSpec> bench{BackendSpec{}};
  std::filesystem::path output_dir = "out";
  bool keep_files = false;
  int replications = 1;
  std::uint64_t seed_stride = 1;

  void validate() const;  // ConfigError
  // Scenario of replication `r`: seed + r * seed_stride.
  ScenarioConfig replication(int r) const;
};

// YAML text; relative trace paths resolve against `base_dir`. ConfigError
// names the offending line.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mbsim
