#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>

#include "mbsim/config.hpp"

namespace mbsim {

// Options shared by the run subcommands; unset fields defer to the config.
struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool keep_files = false;
  int jobs = 1;
  std::filesystem::path self_binary;  // target of the `self` backend
};

// The subcommands. Each throws mbsim::Error on failure; exit_code_of maps
// that onto the process exit status.
void cmd_twin(const CommandOptions& opts, std::ostream& log);
void cmd_snapshots(const CommandOptions& opts, std::ostream& log);
void cmd_bench(const CommandOptions& opts, std::ostream& log);
void cmd_solve(const std::filesystem::path& lp_path, const std::filesystem::path& out_path);

// Runs `body`; 0 on success, 2 for input errors, 3 for runtime failures.
// The error message goes to `err`.
int exit_code_of(const std::function<void()>& body, std::ostream& err);

}  // namespace mbsim
