#include "mbsim/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "mbsim/error.hpp"

namespace mbsim {

std::string shell_quote(const std::string& text) {
  std::string out = "'";
  for (char c : text) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

namespace {

// Waits for `pid` up to `timeout` (zero: forever). Returns false on timeout.
bool wait_child(pid_t pid, std::chrono::milliseconds timeout, int& status) {
  if (timeout.count() == 0) {
    while (waitpid(pid, &status, 0) < 0) {
      if (errno != EINTR) throw SolverError(std::string("waitpid: ") + std::strerror(errno));
    }
    return true;
  }

  const auto deadline = Clock::now() + timeout;
#ifdef SYS_pidfd_open
  const int pidfd = static_cast<int>(syscall(SYS_pidfd_open, pid, 0));
  if (pidfd >= 0) {
    while (true) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - Clock::now());
      pollfd pfd{pidfd, POLLIN, 0};
      const int ready = poll(&pfd, 1, static_cast<int>(std::max<long long>(left.count(), 0)));
      if (ready > 0) break;
      if (ready == 0) {
        close(pidfd);
        return false;
      }
      if (errno != EINTR) {
        close(pidfd);
        throw SolverError(std::string("poll: ") + std::strerror(errno));
      }
    }
    close(pidfd);
    while (waitpid(pid, &status, 0) < 0) {
      if (errno != EINTR) throw SolverError(std::string("waitpid: ") + std::strerror(errno));
    }
    return true;
  }
#endif
  // Kernels without pidfd: poll the child.
  while (true) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) return true;
    if (done < 0 && errno != EINTR) {
      throw SolverError(std::string("waitpid: ") + std::strerror(errno));
    }
    if (Clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
}

}  // namespace

CommandResult run_command(const std::string& command,
                          const std::filesystem::path& workdir,
                          std::chrono::milliseconds timeout) {
  const auto err_path = workdir / "solver.stderr";
  const auto start = Clock::now();

  const pid_t pid = fork();
  if (pid < 0) throw SolverError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    setpgid(0, 0);
    if (chdir(workdir.c_str()) != 0) _exit(126);
    const int devnull = open("/dev/null", O_WRONLY);
    const int err = open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (devnull >= 0) dup2(devnull, STDOUT_FILENO);
    if (err >= 0) dup2(err, STDERR_FILENO);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);

  int status = 0;
  if (!wait_child(pid, timeout, status)) {
    kill(-pid, SIGKILL);
    kill(pid, SIGKILL);
    waitpid(pid, &status, 0);
    std::filesystem::remove(err_path);
    throw SolverTimeout("external solver exceeded " +
                        std::to_string(timeout.count()) + " ms: " + command);
  }

  CommandResult result;
  result.wall = std::chrono::duration_cast<Micros>(Clock::now() - start);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  } else {
    result.exit_code = -1;
  }
  std::ifstream err(err_path);
  std::ostringstream text;
  text << err.rdbuf();
  result.stderr_text = text.str();
  err.close();
  std::filesystem::remove(err_path);
  return result;
}

}  // namespace mbsim
