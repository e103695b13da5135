#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbsim/lp.hpp"
#include "mbsim/scenario.hpp"
#include "mbsim/solution.hpp"
#include "mbsim/types.hpp"

namespace mbsim {

// Served bits follow from the assignment: min(q_u, sum of assigned rates),
// or the plain sum for an unbounded backlog.
std::vector<Bits> served_from_assignment(
    const SnapshotInstance& inst,
    std::span<const std::optional<int>> assignment);

Allocation make_allocation(const SnapshotInstance& inst,
                           std::vector<std::optional<int>> assignment);

// Sum of served bits. Throws ContractError when alloc.served disagrees with
// what the assignment delivers, or dimensions do not match.
Bits objective_of(const SnapshotInstance& inst, const Allocation& alloc);

SnapshotInstance build_snapshot(const SystemState& state,
                                const ChannelTrace& channel,
                                const ScenarioConfig& config);

// LP variable names.
std::string assign_var(int user, int band);  // x_<u>_<b>
std::string served_var(int user);            // s_<u>
std::string problem_name_for(const SnapshotInstance& inst);  // mbs_t<tti>

// Capped sum-throughput MILP:
//   max sum_u s_u
//   band_b:  sum_u x_u_b <= 1
//   cap_u:   s_u - sum_b r_u_b x_u_b <= 0
//   queue_u: s_u <= q_u            (finite backlogs only)
LpProblem build_ilp(const SnapshotInstance& inst);

// Maps solver output back onto the instance. Binary values within 1e-6 of
// 0 or 1 are rounded; anything in between is rejected. Served bits are
// recomputed from the assignment, and the result must reproduce the
// solver's objective within 1e-6.
Allocation decode_solution(const SnapshotInstance& inst,
                           const LpSolution& solution);

// Per band: the eligible user (backlog > 0) with the highest rate, lowest
// index on ties; idle when that rate is 0.
Allocation schedule_maxci(const SnapshotInstance& inst);

// Bands in descending max-rate order; each goes to the user with the most
// marginal served bits given residual backlogs.
Allocation schedule_greedy_backlog(const SnapshotInstance& inst);

// Proportional fair: per band argmax of rate / max(avg, 1e-6).
Allocation schedule_pf(const SnapshotInstance& inst,
                       std::span<const double> avg_throughput);

struct OptimalResult {
  Allocation allocation;
  Bits objective = 0;
};

inline constexpr double kBruteForceGuard = 1e7;

// Exhaustive search over every band -> {idle, u_0..u_{K-1}} assignment.
// Returns the lexicographically smallest maximizer (idle < u_0 < u_1 ...).
// Throws InputError when (K+1)^N exceeds kBruteForceGuard.
OptimalResult brute_force_optimal(const SnapshotInstance& inst);

}  // namespace mbsim
