#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mbsim/types.hpp"

namespace mbsim::testing {

// r = [[10, 9], [8, 1]], q = [10, 8].
inline SnapshotInstance reference_instance() {
  SnapshotInstance inst;
  inst.rates = {{10, 9}, {8, 1}};
  inst.backlog = {Backlog{10}, Backlog{8}};
  return inst;
}

struct InstanceShape {
  int max_users = 4;
  int max_bands = 5;
  Bits max_rate = 1500;
  double unbounded_share = 0.3;  // chance that a user's backlog is unbounded
  Bits max_backlog = 3000;
};

inline SnapshotInstance random_instance(std::mt19937_64& rng, const InstanceShape& shape = {}) {
  std::uniform_int_distribution<int> users(1, shape.max_users);
  std::uniform_int_distribution<int> bands(1, shape.max_bands);
  std::uniform_int_distribution<Bits> rate(0, shape.max_rate);
  std::uniform_int_distribution<Bits> backlog(0, shape.max_backlog);
  std::bernoulli_distribution unbounded(shape.unbounded_share);
  std::uniform_int_distribution<std::int64_t> tti(0, 999);

  SnapshotInstance inst;
  inst.tti = tti(rng);
  const int K = users(rng);
  const int N = bands(rng);
  inst.rates.assign(K, std::vector<Bits>(N));
  for (auto& row : inst.rates) {
    for (auto& r : row) r = rate(rng);
  }
  for (int u = 0; u < K; ++u) {
    inst.backlog.push_back(unbounded(rng) ? Backlog::unbounded() : Backlog{backlog(rng)});
  }
  return inst;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::random_device seed;
    path_ = std::filesystem::temp_directory_path() /
            ("mbsim_" + tag + "_" + std::to_string(seed()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace mbsim::testing
