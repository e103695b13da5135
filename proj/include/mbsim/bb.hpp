#pragma once

#include <chrono>
#include <cstdint>
#include <span>

#include "mbsim/solution.hpp"
#include "mbsim/types.hpp"

namespace mbsim {

struct BbLimits {
  std::uint64_t max_nodes = 0;             // 0: unlimited
  std::chrono::milliseconds timeout{0};    // 0: unlimited
  // Budget for picking the lexicographically smallest maximizer once the
  // optimal value is proven. 0: unlimited.
  std::uint64_t tie_break_nodes = 20000;
};

struct BbResult {
  SolveStatus status = SolveStatus::kOptimal;
  Allocation allocation;
  Bits objective = 0;
  std::uint64_t nodes_explored = 0;
  Bits root_bound = 0;
  // False when the tie-break budget ran out; the assignment is then an
  // optimal one found by the search rather than the smallest.
  bool lexicographic = true;
};

// Upper bound on what bands [first_band, N) can still add, given per-user
// residual backlogs. Admissible: never below the best completion.
Bits completion_bound(const SnapshotInstance& inst,
                      std::span<const Backlog> residual, int first_band);

// Exact depth-first branch-and-bound over bands in index order. The first
// pass proves the optimal value, trying high-gain users first; the second
// fixes bands left to right to the smallest choice that still reaches it,
// giving the same maximizer as brute_force_optimal (idle < u_0 < u_1 ...).
// When a limit trips, returns the best assignment found so far with status
// kLimitReached.
BbResult solve_bb(const SnapshotInstance& inst, const BbLimits& limits = {});

}  // namespace mbsim
