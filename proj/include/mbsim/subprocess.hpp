#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include "mbsim/timing.hpp"

namespace mbsim {

struct CommandResult {
  int exit_code = 0;
  std::string stderr_text;
  Micros wall{0};
};

// Runs `command` through /bin/sh with `workdir` as current directory and
// blocks until it exits. stdout is discarded; stderr is captured. On
// timeout the whole process group is killed and SolverTimeout is thrown.
// A zero timeout waits indefinitely.
CommandResult run_command(const std::string& command,
                          const std::filesystem::path& workdir,
                          std::chrono::milliseconds timeout);

// Single-quotes `text` for /bin/sh.
std::string shell_quote(const std::string& text);

}  // namespace mbsim
