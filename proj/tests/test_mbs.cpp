#include <doctest.h>

#include <random>

#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/scenario.hpp"
#include "support.hpp"

using namespace mbsim;
using mbsim::testing::InstanceShape;
using mbsim::testing::random_instance;
using mbsim::testing::reference_instance;

namespace {

using Assign = std::vector<std::optional<int>>;

SnapshotInstance uncapped(SnapshotInstance inst) {
  for (auto& q : inst.backlog) q = Backlog::unbounded();
  return inst;
}

void check_feasible(const SnapshotInstance& inst, const Allocation& a) {
  REQUIRE(a.assignment.size() == static_cast<std::size_t>(inst.num_bands()));
  REQUIRE(a.served.size() == static_cast<std::size_t>(inst.num_users()));
  for (int u = 0; u < inst.num_users(); ++u) {
    CHECK(a.served[u] >= 0);
    if (inst.backlog[u].is_finite()) CHECK(a.served[u] <= inst.backlog[u].bits());
  }
  CHECK(served_from_assignment(inst, a.assignment) == a.served);
}

}  // namespace

TEST_CASE("snapshot from state") {
  ScenarioConfig c;
  c.cqi_model = RandomWalkCqi{0, 5};
  const ChannelTrace channel = gen_channel_trace(c);
  SystemState s = initial_state(c);
  s.backlog = {Backlog{42}};
  const SnapshotInstance inst = build_snapshot(s, channel, c);
  CHECK(inst.rates == std::vector<std::vector<Bits>>{{500}});
  CHECK(inst.backlog == std::vector<Backlog>{Backlog{42}});

  s.backlog = {Backlog::unbounded()};
  CHECK(build_snapshot(s, channel, c).backlog[0].is_unbounded());

  c.cqi_model = RandomWalkCqi{0, 0};
  c.num_users = 2;
  c.num_bands = 3;
  const SnapshotInstance zero =
      build_snapshot(initial_state(c), gen_channel_trace(c), c);
  for (const auto& row : zero.rates) {
    for (Bits r : row) CHECK(r == 0);
  }
}

TEST_CASE("model for the minimal instance") {
  SnapshotInstance inst;
  inst.rates = {{5}};
  inst.backlog = {Backlog::unbounded()};
  const LpProblem p = build_ilp(inst);
  CHECK(p.name == "mbs_t0");
  CHECK(p.binaries == std::vector<std::string>{"x_0_0"});
  REQUIRE(p.constraints.size() == 2);
  CHECK(p.constraints[0].name == "band_0");
  CHECK(p.constraints[0].terms == std::vector<LpTerm>{{1, "x_0_0"}});
  CHECK(p.constraints[0].rhs == 1);
  CHECK(p.constraints[1].name == "cap_0");
  CHECK(p.constraints[1].terms == std::vector<LpTerm>{{1, "s_0"}, {-5, "x_0_0"}});
  CHECK(p.constraints[1].rhs == 0);
  REQUIRE(p.bounds.size() == 1);
  CHECK(p.bounds[0].var == "s_0");
}

TEST_CASE("model sizes and queue rows") {
  const LpProblem p = build_ilp(reference_instance());
  CHECK(p.binaries.size() == 4);
  CHECK(p.bounds.size() == 2);
  int band = 0, cap = 0, queue = 0;
  for (const auto& c : p.constraints) {
    band += c.name.rfind("band_", 0) == 0;
    cap += c.name.rfind("cap_", 0) == 0;
    if (c.name.rfind("queue_", 0) == 0) {
      ++queue;
      CHECK(c.terms.size() == 1);
    }
  }
  CHECK(band == 2);
  CHECK(cap == 2);
  CHECK(queue == 2);
  CHECK(p.constraints[4].name == "queue_0");
  CHECK(p.constraints[4].rhs == 10);
  CHECK(p.constraints[5].rhs == 8);
}

TEST_CASE("decode") {
  SnapshotInstance one;
  one.rates = {{5}};
  one.backlog = {Backlog::unbounded()};

  LpSolution sol;
  sol.objective = 5;
  sol.values = {{"x_0_0", 1}, {"s_0", 5}};
  const Allocation a = decode_solution(one, sol);
  CHECK(a.assignment == Assign{0});
  CHECK(a.served == std::vector<Bits>{5});

  sol.objective = 0;
  sol.values = {{"x_0_0", 0}, {"s_0", 0}};
  const Allocation idle = decode_solution(one, sol);
  CHECK(idle.assignment == Assign{std::nullopt});
  CHECK(objective_of(one, idle) == 0);

  const SnapshotInstance ref = reference_instance();
  LpSolution best;
  best.objective = 17;
  best.values = {{"x_0_0", 0}, {"x_0_1", 1}, {"x_1_0", 1}, {"x_1_1", 0}, {"s_0", 9}, {"s_1", 8}};
  const Allocation opt = decode_solution(ref, best);
  CHECK(opt.served == std::vector<Bits>{9, 8});
  CHECK(objective_of(ref, opt) == 17);
}

TEST_CASE("decode rejects bad solutions") {
  const SnapshotInstance ref = reference_instance();
  LpSolution sol;
  sol.objective = 17;
  sol.values = {{"x_0_0", 0}, {"x_0_1", 1}, {"x_1_0", 1}, {"x_1_1", 0}, {"s_0", 9}, {"s_1", 8}};

  SUBCASE("served is recomputed, not trusted") {
    sol.values[4].second = 10;
    CHECK(decode_solution(ref, sol).served == std::vector<Bits>{9, 8});
  }
  SUBCASE("objective mismatch") {
    sol.objective = 18;
    CHECK_THROWS_AS(decode_solution(ref, sol), ContractError);
  }
  SUBCASE("band used twice") {
    sol.values[0].second = 1;
    sol.objective = 18;
    CHECK_THROWS_AS(decode_solution(ref, sol), ContractError);
  }
  SUBCASE("fractional binary") {
    sol.values[1].second = 0.5;
    CHECK_THROWS_AS(decode_solution(ref, sol), ContractError);
  }
  SUBCASE("missing variable") {
    sol.values.erase(sol.values.begin());
    CHECK_THROWS_AS(decode_solution(ref, sol), ParseError);
  }
  SUBCASE("not optimal") {
    sol.status = SolveStatus::kLimitReached;
    CHECK_THROWS_AS(decode_solution(ref, sol), SolverError);
  }
}

TEST_CASE("reference instance: heuristics and oracle") {
  const SnapshotInstance ref = reference_instance();

  const Allocation maxci = schedule_maxci(ref);
  CHECK(maxci.assignment == Assign{0, 0});
  CHECK(maxci.served == std::vector<Bits>{10, 0});
  CHECK(objective_of(ref, maxci) == 10);

  const Allocation greedy = schedule_greedy_backlog(ref);
  CHECK(greedy.assignment == Assign{0, 1});
  CHECK(greedy.served == std::vector<Bits>{10, 1});
  CHECK(objective_of(ref, greedy) == 11);

  const OptimalResult best = brute_force_optimal(ref);
  CHECK(best.objective == 17);
  CHECK(best.allocation.assignment == Assign{1, 0});
  CHECK(best.allocation.served == std::vector<Bits>{9, 8});
}

TEST_CASE("maxci edge cases") {
  SnapshotInstance inst = reference_instance();
  inst.backlog = {Backlog{0}, Backlog{0}};
  CHECK(schedule_maxci(inst).assignment == Assign{std::nullopt, std::nullopt});
  CHECK(objective_of(inst, schedule_maxci(inst)) == 0);

  SnapshotInstance single;
  single.rates = {{3, 0, 7}};
  single.backlog = {Backlog::unbounded()};
  CHECK(schedule_maxci(single).assignment == Assign{0, std::nullopt, 0});

  // Ties go to the lowest index; users without backlog are skipped.
  SnapshotInstance tie;
  tie.rates = {{4}, {4}, {9}};
  tie.backlog = {Backlog{1}, Backlog{1}, Backlog{0}};
  CHECK(schedule_maxci(tie).assignment == Assign{0});
}

TEST_CASE("greedy edge cases") {
  SnapshotInstance zero;
  zero.rates = {{0, 0}, {0, 0}};
  zero.backlog = {Backlog{5}, Backlog::unbounded()};
  CHECK(schedule_greedy_backlog(zero).assignment == Assign{std::nullopt, std::nullopt});
}

TEST_CASE("proportional fair") {
  SnapshotInstance inst;
  inst.rates = {{10, 10}, {1, 1}};
  inst.backlog = {Backlog::unbounded(), Backlog::unbounded()};
  const std::vector<double> avg{1e9, 1};
  CHECK(schedule_pf(inst, avg).assignment == Assign{1, 1});

  const SnapshotInstance ref = reference_instance();
  const std::vector<double> equal{250, 250};
  CHECK(schedule_pf(ref, equal) == schedule_maxci(ref));

  SnapshotInstance empty = ref;
  empty.backlog = {Backlog{0}, Backlog{0}};
  CHECK(schedule_pf(empty, equal).assignment == Assign{std::nullopt, std::nullopt});

  CHECK_THROWS(schedule_pf(ref, std::vector<double>{1.0}));
}

TEST_CASE("oracle edge cases") {
  SnapshotInstance one;
  one.rates = {{5}};
  one.backlog = {Backlog::unbounded()};
  const auto best = brute_force_optimal(one);
  CHECK(best.objective == 5);
  CHECK(best.allocation.assignment == Assign{0});

  SnapshotInstance zero;
  zero.rates = {{0, 0}, {0, 0}};
  zero.backlog = {Backlog{3}, Backlog{3}};
  const auto none = brute_force_optimal(zero);
  CHECK(none.objective == 0);
  CHECK(none.allocation.assignment == Assign{std::nullopt, std::nullopt});
}

TEST_CASE("objective of allocations") {
  const SnapshotInstance ref = reference_instance();
  CHECK(objective_of(ref, make_allocation(ref, Assign{std::nullopt, std::nullopt})) == 0);
  CHECK(objective_of(ref, make_allocation(ref, Assign{1, 0})) == 17);

  Allocation forged = make_allocation(ref, Assign{1, 0});
  forged.served = {10, 8};
  CHECK_THROWS_AS(objective_of(ref, forged), ContractError);
  CHECK_THROWS_AS(make_allocation(ref, Assign{2, 0}), ContractError);
  CHECK_THROWS_AS(make_allocation(ref, Assign{0}), ContractError);
}

TEST_CASE("property: every scheduler is feasible and dominated by the oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> avg(0.0, 2000.0);
  for (int trial = 0; trial < 600; ++trial) {
    const SnapshotInstance inst = random_instance(rng);
    std::vector<double> avgs;
    for (int u = 0; u < inst.num_users(); ++u) avgs.push_back(avg(rng));
    const Bits best = brute_force_optimal(inst).objective;
    for (const Allocation& a :
         {schedule_maxci(inst), schedule_greedy_backlog(inst), schedule_pf(inst, avgs)}) {
      check_feasible(inst, a);
      CHECK(objective_of(inst, a) <= best);
    }
  }
}

TEST_CASE("property: uncapped maxci is optimal and equals greedy") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 600; ++trial) {
    const SnapshotInstance inst = uncapped(random_instance(rng));
    const Allocation maxci = schedule_maxci(inst);
    CHECK(objective_of(inst, maxci) == brute_force_optimal(inst).objective);
    CHECK(schedule_greedy_backlog(inst).assignment == maxci.assignment);
    Bits per_band = 0;
    for (int b = 0; b < inst.num_bands(); ++b) {
      Bits top = 0;
      for (int u = 0; u < inst.num_users(); ++u) top = std::max(top, inst.rates[u][b]);
      per_band += top;
    }
    CHECK(objective_of(inst, maxci) == per_band);
  }
}

TEST_CASE("property: proportional fair ignores a common scale") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> avg(1.0, 5000.0);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 500; ++trial) {
    const SnapshotInstance inst = random_instance(rng);
    std::vector<double> a;
    for (int u = 0; u < inst.num_users(); ++u) a.push_back(std::round(avg(rng)));
    // Power-of-two scales keep every ratio exact in floating point.
    const double c = std::exp2(std::round(std::log2(scale(rng))));
    std::vector<double> scaled;
    for (double v : a) scaled.push_back(v * c);
    CHECK(schedule_pf(inst, a).assignment == schedule_pf(inst, scaled).assignment);
  }
}

TEST_CASE("brute force refuses huge instances") {
  SnapshotInstance big;
  big.rates.assign(9, std::vector<Bits>(9, 1));
  big.backlog.assign(9, Backlog::unbounded());
  CHECK_THROWS_AS(brute_force_optimal(big), InputError);
}
