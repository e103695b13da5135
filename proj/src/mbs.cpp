#include "mbsim/mbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mbsim/error.hpp"

namespace mbsim {

std::vector<Bits> served_from_assignment(
    const SnapshotInstance& inst,
    std::span<const std::optional<int>> assignment) {
  const int K = inst.num_users();
  const int N = inst.num_bands();
  if (static_cast<int>(assignment.size()) != N) {
    throw ContractError("assignment covers " + std::to_string(assignment.size()) +
                        " bands, instance has " + std::to_string(N));
  }
  std::vector<Bits> capacity(K, 0);
  for (int b = 0; b < N; ++b) {
    if (!assignment[b]) continue;
    const int u = *assignment[b];
    if (u < 0 || u >= K) {
      throw ContractError("band " + std::to_string(b) + " assigned to unknown user " +
                          std::to_string(u));
    }
    capacity[u] += inst.rates[u][b];
  }
  for (int u = 0; u < K; ++u) capacity[u] = inst.backlog[u].cap(capacity[u]);
  return capacity;
}

Allocation make_allocation(const SnapshotInstance& inst,
                           std::vector<std::optional<int>> assignment) {
  Allocation alloc;
  alloc.served = served_from_assignment(inst, assignment);
  alloc.assignment = std::move(assignment);
  return alloc;
}

Bits objective_of(const SnapshotInstance& inst, const Allocation& alloc) {
  const auto served = served_from_assignment(inst, alloc.assignment);
  if (served != alloc.served) {
    throw ContractError("allocation served bits disagree with its assignment");
  }
  return std::accumulate(served.begin(), served.end(), Bits{0});
}

SnapshotInstance build_snapshot(const SystemState& state,
                                const ChannelTrace& channel,
                                const ScenarioConfig& config) {
  if (state.tti < 0 || state.tti >= channel.num_ttis()) {
    throw InputError("build_snapshot: tti " + std::to_string(state.tti) +
                     " outside the channel trace");
  }
  const int K = channel.num_users();
  const int N = channel.num_bands();
  if (static_cast<int>(state.backlog.size()) != K) {
    throw InputError("build_snapshot: state and channel user counts differ");
  }
  SnapshotInstance inst;
  inst.tti = state.tti;
  inst.rates.assign(K, std::vector<Bits>(N, 0));
  for (int u = 0; u < K; ++u) {
    for (int b = 0; b < N; ++b) {
      inst.rates[u][b] = cqi_to_rate(channel.cqi(state.tti, u, b), config);
    }
  }
  inst.backlog = state.backlog;
  return inst;
}

std::string assign_var(int user, int band) {
  return "x_" + std::to_string(user) + "_" + std::to_string(band);
}

std::string served_var(int user) { return "s_" + std::to_string(user); }

std::string problem_name_for(const SnapshotInstance& inst) {
  return "mbs_t" + std::to_string(inst.tti);
}

LpProblem build_ilp(const SnapshotInstance& inst) {
  inst.validate();
  const int K = inst.num_users();
  const int N = inst.num_bands();

  LpProblem p;
  p.name = problem_name_for(inst);
  for (int u = 0; u < K; ++u) {
    for (int b = 0; b < N; ++b) p.binaries.push_back(assign_var(u, b));
  }
  for (int u = 0; u < K; ++u) {
    p.objective.push_back({1.0, served_var(u)});
    p.bounds.push_back({served_var(u), 0.0, std::nullopt});
  }
  for (int b = 0; b < N; ++b) {
    LpConstraint c{"band_" + std::to_string(b), {}, Relation::kLessEqual, 1.0};
    for (int u = 0; u < K; ++u) c.terms.push_back({1.0, assign_var(u, b)});
    p.constraints.push_back(std::move(c));
  }
  for (int u = 0; u < K; ++u) {
    LpConstraint c{"cap_" + std::to_string(u), {{1.0, served_var(u)}},
                   Relation::kLessEqual, 0.0};
    // Zero-rate terms carry no information and are left out.
    for (int b = 0; b < N; ++b) {
      if (inst.rates[u][b] != 0) {
        c.terms.push_back({-static_cast<double>(inst.rates[u][b]), assign_var(u, b)});
      }
    }
    p.constraints.push_back(std::move(c));
  }
  for (int u = 0; u < K; ++u) {
    if (inst.backlog[u].is_unbounded()) continue;
    p.constraints.push_back({"queue_" + std::to_string(u),
                             {{1.0, served_var(u)}},
                             Relation::kLessEqual,
                             static_cast<double>(inst.backlog[u].bits())});
  }
  return p;
}

namespace {

constexpr double kIntegralityTol = 1e-6;
constexpr double kObjectiveTol = 1e-6;

}  // namespace

Allocation decode_solution(const SnapshotInstance& inst,
                           const LpSolution& solution) {
  if (solution.status != SolveStatus::kOptimal) {
    throw SolverError("solver returned status '" +
                      std::string(to_string(solution.status)) +
                      "' instead of an optimal solution");
  }
  const int K = inst.num_users();
  const int N = inst.num_bands();
  std::vector<std::optional<int>> assignment(N);
  for (int u = 0; u < K; ++u) {
    for (int b = 0; b < N; ++b) {
      const auto name = assign_var(u, b);
      const auto value = solution.value_of(name);
      if (!value) throw ParseError("solution has no value for " + name);
      bool on = false;
      if (std::fabs(*value) <= kIntegralityTol) {
        on = false;
      } else if (std::fabs(*value - 1.0) <= kIntegralityTol) {
        on = true;
      } else {
        throw ContractError("non-integral value " + format_number(*value) +
                            " for binary " + name);
      }
      if (!on) continue;
      if (assignment[b]) {
        throw ContractError("band " + std::to_string(b) + " assigned to users " +
                            std::to_string(*assignment[b]) + " and " +
                            std::to_string(u));
      }
      assignment[b] = u;
    }
  }
  auto alloc = make_allocation(inst, std::move(assignment));
  if (!solution.objective) throw ContractError("optimal solution without objective");
  const Bits obj = objective_of(inst, alloc);
  if (std::fabs(static_cast<double>(obj) - *solution.objective) > kObjectiveTol) {
    throw ContractError("decoded objective " + std::to_string(obj) +
                        " differs from solver objective " +
                        format_number(*solution.objective));
  }
  return alloc;
}

Allocation schedule_maxci(const SnapshotInstance& inst) {
  const int K = inst.num_users();
  const int N = inst.num_bands();
  std::vector<std::optional<int>> assignment(N);
  for (int b = 0; b < N; ++b) {
    Bits best = 0;
    for (int u = 0; u < K; ++u) {
      if (!inst.backlog[u].positive()) continue;
      if (inst.rates[u][b] > best) {
        best = inst.rates[u][b];
        assignment[b] = u;
      }
    }
  }
  return make_allocation(inst, std::move(assignment));
}

Allocation schedule_greedy_backlog(const SnapshotInstance& inst) {
  const int K = inst.num_users();
  const int N = inst.num_bands();

  std::vector<Bits> max_rate(N, 0);
  for (int b = 0; b < N; ++b) {
    for (int u = 0; u < K; ++u) max_rate[b] = std::max(max_rate[b], inst.rates[u][b]);
  }
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return max_rate[a] > max_rate[b]; });

  std::vector<Backlog> residual = inst.backlog;
  std::vector<std::optional<int>> assignment(N);
  for (int b : order) {
    Bits best = 0;
    int who = -1;
    for (int u = 0; u < K; ++u) {
      const Bits marginal = residual[u].cap(inst.rates[u][b]);
      if (marginal > best) {
        best = marginal;
        who = u;
      }
    }
    if (who < 0) continue;
    assignment[b] = who;
    if (residual[who].is_finite()) residual[who] = residual[who].bits() - best;
  }
  return make_allocation(inst, std::move(assignment));
}

Allocation schedule_pf(const SnapshotInstance& inst,
                       std::span<const double> avg_throughput) {
  constexpr double kEpsilon = 1e-6;
  const int K = inst.num_users();
  const int N = inst.num_bands();
  if (static_cast<int>(avg_throughput.size()) != K) {
    throw InputError("schedule_pf: need one average throughput per user");
  }
  std::vector<std::optional<int>> assignment(N);
  for (int b = 0; b < N; ++b) {
    double best = 0.0;
    for (int u = 0; u < K; ++u) {
      if (!inst.backlog[u].positive()) continue;
      const double metric = static_cast<double>(inst.rates[u][b]) /
                            std::max(avg_throughput[u], kEpsilon);
      if (metric > best) {
        best = metric;
        assignment[b] = u;
      }
    }
  }
  return make_allocation(inst, std::move(assignment));
}

OptimalResult brute_force_optimal(const SnapshotInstance& inst) {
  inst.validate();
  const int K = inst.num_users();
  const int N = inst.num_bands();
  if (std::pow(static_cast<double>(K + 1), N) > kBruteForceGuard) {
    throw InputError("instance too large for exhaustive search");
  }

  // digits[b] = 0 for idle, u + 1 for user u. Incrementing the last band
  // first walks assignments in lexicographic order.
  std::vector<int> digits(N, 0);
  std::vector<Bits> sum(K);
  std::vector<int> best_digits = digits;
  Bits best = -1;
  while (true) {
    std::fill(sum.begin(), sum.end(), 0);
    for (int b = 0; b < N; ++b) {
      if (digits[b] > 0) sum[digits[b] - 1] += inst.rates[digits[b] - 1][b];
    }
    Bits value = 0;
    for (int u = 0; u < K; ++u) value += inst.backlog[u].cap(sum[u]);
    if (value > best) {
      best = value;
      best_digits = digits;
    }

    int b = N - 1;
    while (b >= 0 && digits[b] == K) digits[b--] = 0;
    if (b < 0) break;
    ++digits[b];
  }

  std::vector<std::optional<int>> assignment(N);
  for (int b = 0; b < N; ++b) {
    if (best_digits[b] > 0) assignment[b] = best_digits[b] - 1;
  }
  return {make_allocation(inst, std::move(assignment)), best};
}

}  // namespace mbsim
