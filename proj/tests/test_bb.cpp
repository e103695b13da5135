#include <doctest.h>

#include <algorithm>
#include <random>

#include "../src/subset_bound.hpp"
#include "mbsim/bb.hpp"
#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "support.hpp"

using namespace mbsim;
using mbsim::testing::InstanceShape;
using mbsim::testing::random_instance;
using mbsim::testing::reference_instance;

namespace {

// Bands [first, N) with the given residual backlogs.
SnapshotInstance tail_instance(const SnapshotInstance& inst, const std::vector<Backlog>& residual,
                               int first) {
  SnapshotInstance out;
  out.backlog = residual;
  for (const auto& row : inst.rates) out.rates.emplace_back(row.begin() + first, row.end());
  return out;
}

// Rates on a coarse grid with backlogs near what the bands can carry, the
// shape that defeats the per-band LP bound.
SnapshotInstance tight_instance(std::mt19937_64& rng, int K, int N) {
  std::uniform_int_distribution<Bits> level(0, 15);
  SnapshotInstance inst;
  inst.rates.assign(K, std::vector<Bits>(N));
  for (auto& row : inst.rates) {
    for (auto& r : row) r = 100 * level(rng);
  }
  std::uniform_int_distribution<Bits> share(1, 2 * 1500 * N / K / 100);
  for (int u = 0; u < K; ++u) inst.backlog.emplace_back(100 * share(rng));
  return inst;
}

std::vector<int> to_vector(const Allocation& alloc) {
  std::vector<int> out;
  for (const auto& owner : alloc.assignment) out.push_back(owner.value_or(-1));
  return out;
}

Bits value_of(const SnapshotInstance& inst, const std::vector<int>& assignment) {
  std::vector<std::optional<int>> owners;
  for (int u : assignment) owners.push_back(u < 0 ? std::nullopt : std::optional<int>(u));
  return objective_of(inst, make_allocation(inst, owners));
}

}  // namespace

TEST_CASE("reference instance reaches 17 with user 1 on band 0") {
  const auto r = solve_bb(reference_instance());
  CHECK(r.status == SolveStatus::kOptimal);
  CHECK(r.objective == 17);
  CHECK(r.allocation.assignment == std::vector<std::optional<int>>{1, 0});
  CHECK(r.allocation.served == std::vector<Bits>{9, 8});
  CHECK(r.root_bound >= 17);
}

TEST_CASE("branch-and-bound matches brute force on random instances") {
  std::mt19937_64 rng(20240611);
  int lexicographic = 0;
  for (int i = 0; i < 600; ++i) {
    const auto inst = random_instance(rng);
    const auto oracle = brute_force_optimal(inst);
    const auto r = solve_bb(inst);
    CAPTURE(i);
    REQUIRE(r.status == SolveStatus::kOptimal);
    REQUIRE(r.objective == oracle.objective);
    REQUIRE(objective_of(inst, r.allocation) == r.objective);
    REQUIRE(r.root_bound >= oracle.objective);
    if (r.lexicographic) {
      ++lexicographic;
      REQUIRE(r.allocation == oracle.allocation);
    }
  }
  CHECK(lexicographic == 600);
}

TEST_CASE("branch-and-bound matches brute force on tight grid instances") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 25; ++i) {
    const auto inst = tight_instance(rng, 3, 9);
    const auto oracle = brute_force_optimal(inst);
    const auto r = solve_bb(inst);
    CAPTURE(i);
    REQUIRE(r.objective == oracle.objective);
    if (r.lexicographic) REQUIRE(r.allocation == oracle.allocation);
  }
}

TEST_CASE("completion bound never undercuts the best completion") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 400; ++i) {
    const auto inst = random_instance(rng);
    std::uniform_int_distribution<int> band(0, inst.num_bands());
    const int first = band(rng);
    std::vector<Backlog> residual;
    std::uniform_int_distribution<Bits> bits(0, 3000);
    for (const auto& q : inst.backlog) {
      residual.push_back(q.is_unbounded() ? q : Backlog{std::min(q.bits(), bits(rng))});
    }
    const Bits bound = completion_bound(inst, residual, first);
    CAPTURE(i);
    if (first == inst.num_bands()) {
      REQUIRE(bound == 0);
    } else {
      REQUIRE(bound >= brute_force_optimal(tail_instance(inst, residual, first)).objective);
    }
  }
}

TEST_CASE("completion bound rejects bad arguments") {
  const auto inst = reference_instance();
  const std::vector<Backlog> one{Backlog{1}};
  CHECK_THROWS_AS(completion_bound(inst, one, 0), InputError);
  CHECK_THROWS_AS(completion_bound(inst, inst.backlog, 3), InputError);
  CHECK_THROWS_AS(completion_bound(inst, inst.backlog, -1), InputError);
}

TEST_CASE("subset bound is admissible and its rounding is feasible") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 300; ++i) {
    const auto inst = i % 2 == 0 ? random_instance(rng) : tight_instance(rng, 3, 6);
    const Bits opt = brute_force_optimal(inst).objective;
    const auto sb = detail::subset_bound(inst, -1);
    CAPTURE(i);
    REQUIRE(sb.has_value());
    REQUIRE(sb->bound >= opt);
    REQUIRE(static_cast<int>(sb->rounded.size()) == inst.num_bands());
    REQUIRE(value_of(inst, sb->rounded) <= opt);
  }
}

TEST_CASE("subset bound gives up past the state limit") {
  SnapshotInstance inst;
  inst.rates = {{7, 1000003}, {11, 5}};
  inst.backlog = {Backlog{999999}, Backlog{13}};
  CHECK_FALSE(detail::subset_bound(inst, -1, 1000).has_value());
}

TEST_CASE("local search never loses value") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    const auto inst = random_instance(rng);
    auto assignment = to_vector(schedule_maxci(inst));
    const Bits before = value_of(inst, assignment);
    detail::improve_locally(inst, assignment);
    const Bits after_polish = value_of(inst, assignment);
    detail::search_locally(inst, assignment, brute_force_optimal(inst).objective, 50);
    CAPTURE(i);
    REQUIRE(after_polish >= before);
    REQUIRE(value_of(inst, assignment) >= after_polish);
  }
}

TEST_CASE("all-zero rates give zero after visiting the root") {
  SnapshotInstance inst;
  inst.rates.assign(3, std::vector<Bits>(4, 0));
  inst.backlog.assign(3, Backlog{100});
  const auto r = solve_bb(inst);
  CHECK(r.objective == 0);
  CHECK(r.nodes_explored >= 1);
  CHECK(std::all_of(r.allocation.assignment.begin(), r.allocation.assignment.end(),
                    [](const auto& a) { return !a.has_value(); }));
}

TEST_CASE("unbounded backlogs give the sum of per-band maxima") {
  std::mt19937_64 rng(12);
  InstanceShape shape;
  shape.unbounded_share = 1.0;
  for (int i = 0; i < 200; ++i) {
    const auto inst = random_instance(rng, shape);
    Bits expected = 0;
    for (int b = 0; b < inst.num_bands(); ++b) {
      Bits top = 0;
      for (const auto& row : inst.rates) top = std::max(top, row[b]);
      expected += top;
    }
    REQUIRE(solve_bb(inst).objective == expected);
  }
}

TEST_CASE("node limit returns the incumbent with limit status") {
  std::mt19937_64 rng(99);
  SnapshotInstance hard;
  std::uint64_t nodes = 0;
  for (int i = 0; i < 200 && nodes < 50; ++i) {
    hard = tight_instance(rng, 4, 10);
    nodes = solve_bb(hard).nodes_explored;
  }
  REQUIRE(nodes >= 50);
  const Bits opt = solve_bb(hard).objective;

  BbLimits limits;
  limits.max_nodes = 10;
  const auto r = solve_bb(hard, limits);
  CHECK(r.status == SolveStatus::kLimitReached);
  CHECK_FALSE(r.lexicographic);
  CHECK(r.objective <= opt);
  CHECK(objective_of(hard, r.allocation) == r.objective);
}

TEST_CASE("solver is deterministic") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto inst = tight_instance(rng, 5, 12);
    const auto a = solve_bb(inst);
    const auto b = solve_bb(inst);
    REQUIRE(a.allocation == b.allocation);
    REQUIRE(a.nodes_explored == b.nodes_explored);
  }
}
