#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mbsim/app.hpp"

namespace {

std::filesystem::path self_path(const char* argv0) {
  std::error_code ec;
  auto exe = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::filesystem::absolute(argv0) : exe;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiband scheduling simulator with the solver in the loop"};
  app.require_subcommand(1);

  mbsim::CommandOptions opts;
  opts.self_binary = self_path(argv[0]);
  std::string out_dir;
  std::uint64_t seed = 0;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "run configuration (YAML)")->required();
    sub->add_option("--out", out_dir, "output directory, overrides output_dir");
    sub->add_option("--seed", seed, "scenario seed, overrides the config");
    sub->add_flag("--keep-files", opts.keep_files, "keep solver exchange files");
    sub->add_option("--jobs", opts.jobs, "replications run in parallel")->check(CLI::PositiveNumber);
  };

  auto* twin = app.add_subcommand("twin", "heuristic and optimal systems side by side");
  auto* snapshots = app.add_subcommand("snapshots", "heuristic run, snapshots solved offline");
  auto* bench = app.add_subcommand("bench", "phase timings of the solve methods");
  for (auto* sub : {twin, snapshots, bench}) add_run_flags(sub);

  auto* solve = app.add_subcommand("solve", "solve an MBS LP file, write solution XML");
  std::string lp_path;
  std::string sol_path;
  solve->add_option("--lp", lp_path, "input LP file")->required();
  solve->add_option("--out", sol_path, "output solution XML")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto* sub : {twin, snapshots, bench}) {
    if (!sub->parsed()) continue;
    if (!out_dir.empty()) opts.out = out_dir;
    if (sub->count("--seed") > 0) opts.seed = seed;
  }

  return mbsim::exit_code_of(
      [&] {
        if (twin->parsed()) mbsim::cmd_twin(opts, std::cout);
        if (snapshots->parsed()) mbsim::cmd_snapshots(opts, std::cout);
        if (bench->parsed()) mbsim::cmd_bench(opts, std::cout);
        if (solve->parsed()) mbsim::cmd_solve(lp_path, sol_path);
      },
      std::cerr);
}
