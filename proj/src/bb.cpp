#include "mbsim/bb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "subset_bound.hpp"

namespace mbsim {
namespace {

// Stand-in for an unbounded residual; large enough that no sum of rates
// reaches it, small enough that adding a few never overflows.
constexpr Bits kUncapped = std::numeric_limits<Bits>::max() / 4;
constexpr int kIdle = -1;

Bits to_residual(const Backlog& q) {
  return q.is_unbounded() ? kUncapped : q.bits();
}

std::vector<std::vector<Bits>> suffix_sums(const SnapshotInstance& inst) {
  const int N = inst.num_bands();
  std::vector<std::vector<Bits>> suffix(inst.num_users(), std::vector<Bits>(N + 1, 0));
  for (int u = 0; u < inst.num_users(); ++u) {
    for (int b = N - 1; b >= 0; --b) suffix[u][b] = suffix[u][b + 1] + inst.rates[u][b];
  }
  return suffix;
}

// Upper bound on the best completion from the dual of the LP relaxation.
// For any multipliers lambda in [0,1]^K,
//   sum_b max_u lambda_u * g_ub + sum_u (1 - lambda_u) * c_u
// is an upper bound, where g_ub = min(res_u, r_ub) and c_u = min(res_u,
// remaining rates of u). lambda = 1 gives the per-band bound, lambda = 0
// the per-user bound; coordinate descent tightens from the better one.
class BoundEvaluator {
 public:
  explicit BoundEvaluator(const SnapshotInstance& inst)
      : inst_(inst), suffix_(suffix_sums(inst)) {
    const auto K = static_cast<std::size_t>(inst.num_users());
    const auto N = static_cast<std::size_t>(inst.num_bands());
    cap_.resize(K);
    lambda_.resize(K);
    gain_.assign(K, std::vector<double>(N, 0.0));
    breaks_.reserve(N);
  }

  // Stops early and returns a value <= `prune_at` as soon as one is
  // proven, since callers only compare against it.
  Bits operator()(std::span<const Bits> residual, int first_band,
                  Bits prune_at = -1) {
    const int K = inst_.num_users();
    const int N = inst_.num_bands();
    if (first_band >= N) return 0;

    Bits per_band = 0;
    Bits per_user = 0;
    for (int u = 0; u < K; ++u) {
      cap_[u] = std::min(residual[u], suffix_[u][first_band]);
      per_user += cap_[u];
    }
    for (int b = first_band; b < N; ++b) {
      Bits top = 0;
      for (int u = 0; u < K; ++u) {
        const Bits g = std::min(residual[u], inst_.rates[u][b]);
        gain_[u][b] = static_cast<double>(g);
        top = std::max(top, g);
      }
      per_band += top;
    }
    Bits best = std::min(per_band, per_user);
    if (best <= prune_at || best == 0) return best;

    std::fill(lambda_.begin(), lambda_.end(), per_band <= per_user ? 1.0 : 0.0);
    double value = evaluate(first_band);
    for (int pass = 0; pass < kPasses; ++pass) {
      for (int u = 0; u < K; ++u) {
        if (cap_[u] != 0) improve(u, first_band);
      }
      const double next = evaluate(first_band);
      const bool stalled = next >= value - 0.5;
      value = std::min(value, next);
      // Integer data: the true completion is at most floor(value).
      const Bits rounded = static_cast<Bits>(std::floor(value + 1e-6));
      best = std::min(best, rounded);
      if (best <= prune_at || stalled) break;
    }
    return best;
  }

 private:
  static constexpr int kPasses = 4;

  double evaluate(int first_band) const {
    const int K = inst_.num_users();
    double total = 0.0;
    for (int b = first_band; b < inst_.num_bands(); ++b) {
      double top = 0.0;
      for (int u = 0; u < K; ++u) top = std::max(top, lambda_[u] * gain_[u][b]);
      total += top;
    }
    for (int u = 0; u < K; ++u) total += (1.0 - lambda_[u]) * static_cast<double>(cap_[u]);
    return total;
  }

  // Exact minimization over lambda_u with the others fixed: the objective
  // is convex piecewise linear in lambda_u with right slope
  //   sum of g_ub over bands where lambda_u * g_ub beats the others - c_u.
  void improve(int u, int first_band) {
    const int K = inst_.num_users();
    const int N = inst_.num_bands();
    const double c = static_cast<double>(cap_[u]);
    double active = 0.0;
    breaks_.clear();
    for (int b = first_band; b < N; ++b) {
      const double g = gain_[u][b];
      if (g <= 0.0) continue;
      double other = 0.0;
      for (int v = 0; v < K; ++v) {
        if (v != u) other = std::max(other, lambda_[v] * gain_[v][b]);
      }
      if (other <= 0.0) {
        active += g;
      } else if (other < g) {
        breaks_.emplace_back(other / g, g);
      }
    }
    if (active >= c) {
      lambda_[u] = 0.0;
      return;
    }
    std::sort(breaks_.begin(), breaks_.end());
    for (const auto& [t, g] : breaks_) {
      active += g;
      if (active >= c) {
        lambda_[u] = t;
        return;
      }
    }
    lambda_[u] = 1.0;
  }

  const SnapshotInstance& inst_;
  std::vector<std::vector<Bits>> suffix_;
  std::vector<Bits> cap_;
  std::vector<double> lambda_;
  std::vector<std::vector<double>> gain_;
  std::vector<std::pair<double, double>> breaks_;
};

struct LimitHit {};
struct TieBreakBudget {};

// Node accounting shared by both passes.
class NodeBudget {
 public:
  explicit NodeBudget(const BbLimits& limits)
      : limits_(limits), start_(std::chrono::steady_clock::now()) {}

  void count() {
    ++nodes_;
    if (limits_.max_nodes != 0 && nodes_ > limits_.max_nodes) throw LimitHit{};
    if (tie_break_start_ != 0 && limits_.tie_break_nodes != 0 &&
        nodes_ - tie_break_start_ > limits_.tie_break_nodes) {
      throw TieBreakBudget{};
    }
    if (limits_.timeout.count() > 0 && (nodes_ & 255) == 0 &&
        std::chrono::steady_clock::now() - start_ > limits_.timeout) {
      throw LimitHit{};
    }
  }

  void start_tie_break() { tie_break_start_ = std::max<std::uint64_t>(nodes_, 1); }
  std::uint64_t nodes() const { return nodes_; }

 private:
  BbLimits limits_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t nodes_ = 0;
  std::uint64_t tie_break_start_ = 0;
};

// (band, residual backlogs) fully determines what the remaining bands can
// still add, so search results can be shared between transpositions.
struct StateKey {
  int band;
  std::vector<Bits> residual;
  bool operator==(const StateKey&) const = default;
};

struct StateHash {
  std::size_t operator()(const StateKey& k) const {
    std::size_t h = std::hash<int>{}(k.band);
    for (Bits r : k.residual) h = h * 0x9e3779b97f4a7c15ULL + std::hash<Bits>{}(r);
    return h;
  }
};

constexpr std::size_t kMaxMemo = 1 << 20;
constexpr int kLocalRounds = 2000;

using Assignment = std::vector<int>;  // per band: user or kIdle

class Search {
 public:
  Search(const SnapshotInstance& inst, NodeBudget& budget)
      : inst_(inst),
        budget_(budget),
        K_(inst.num_users()),
        N_(inst.num_bands()),
        bound_(inst),
        current_(N_, kIdle),
        best_(N_, kIdle) {
    for (const auto& q : inst.backlog) residual_.push_back(to_residual(q));
  }

  Bits root_bound() { return bound_(residual_, 0); }

  void offer(const Assignment& assignment) {
    const Bits value = value_of(assignment);
    if (value > best_value_) {
      best_value_ = value;
      best_ = assignment;
    }
  }

  Bits best_value() const { return best_value_; }

  // A proven upper bound on the optimum; the search stops once reached.
  void set_ceiling(Bits value) { proven_ = std::min(proven_, value); }
  Bits ceiling() const { return proven_; }
  const Assignment& best() const { return best_; }

  // Proves the optimal value, high-gain users first, idle last. The best
  // assignment seen is kept in best().
  void maximize() { maximize(0, 0); }

  // The lexicographically smallest assignment worth `target`, fixing bands
  // left to right. `witness` must reach the target; it is kept up to date
  // with a full optimal assignment agreeing with the fixed prefix, so it is
  // still usable if the budget runs out midway.
  Assignment canonical(Bits target, Assignment& witness) {
    Assignment fixed(N_, kIdle);
    Bits so_far = 0;
    for (int band = 0; band < N_; ++band) {
      if (so_far >= target) break;
      std::vector<std::pair<Bits, int>> smaller;
      if (witness[band] != kIdle) {
        smaller.emplace_back(0, kIdle);
        for (int u = 0; u < witness[band]; ++u) {
          const Bits gain = std::min(residual_[u], inst_.rates[u][band]);
          if (gain > 0) smaller.emplace_back(gain, u);
        }
      }
      int pick = witness[band];
      for (const auto& [gain, u] : smaller) {
        if (u != kIdle) take(u, gain);
        std::copy(fixed.begin(), fixed.begin() + band, current_.begin());
        current_[band] = u;
        const bool ok = reach(band + 1, target - so_far - gain);
        if (u != kIdle) give_back(u, gain);
        if (ok) {
          witness = current_;
          pick = u;
          break;
        }
      }
      fixed[band] = pick;
      if (pick != kIdle) {
        const Bits gain = std::min(residual_[pick], inst_.rates[pick][band]);
        take(pick, gain);
        so_far += gain;
      }
    }
    return fixed;
  }

 private:
  Bits value_of(const Assignment& assignment) const {
    std::vector<Bits> sum(K_, 0);
    for (int b = 0; b < N_; ++b) {
      if (assignment[b] != kIdle) sum[assignment[b]] += inst_.rates[assignment[b]][b];
    }
    Bits total = 0;
    for (int u = 0; u < K_; ++u) total += std::min(sum[u], to_residual(inst_.backlog[u]));
    return total;
  }

  // Users worth assigning to `band`, most marginal bits first. Zero-gain
  // choices are dominated by leaving the band idle.
  std::vector<std::pair<Bits, int>> choices(int band) const {
    std::vector<std::pair<Bits, int>> out;
    for (int u = 0; u < K_; ++u) {
      const Bits gain = std::min(residual_[u], inst_.rates[u][band]);
      if (gain > 0) out.emplace_back(gain, u);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    return out;
  }

  void take(int user, Bits gain) {
    if (residual_[user] != kUncapped) residual_[user] -= gain;
  }
  void give_back(int user, Bits gain) {
    if (residual_[user] != kUncapped) residual_[user] += gain;
  }

  void maximize(int band, Bits so_far) {
    budget_.count();
    if (best_value_ >= proven_) return;
    const Bits bound = bound_(residual_, band, best_value_ - so_far);
    if (so_far + bound <= best_value_) return;
    if (band == N_ || bound == 0) {
      // so_far > best_value_ here, since bound == 0.
      best_value_ = so_far;
      best_ = current_;
      std::fill(best_.begin() + band, best_.end(), kIdle);
      return;
    }

    StateKey key{band, residual_};
    if (const auto it = ceiling_.find(key);
        it != ceiling_.end() && so_far + it->second <= best_value_) {
      return;
    }

    for (const auto& [gain, u] : choices(band)) {
      take(u, gain);
      current_[band] = u;
      maximize(band + 1, so_far + gain);
      current_[band] = kIdle;
      give_back(u, gain);
    }
    maximize(band + 1, so_far);

    // Whatever this state can add, best_value_ already accounts for it.
    if (ceiling_.size() < kMaxMemo) {
      const Bits ceiling = best_value_ - so_far;
      auto [it, fresh] = ceiling_.try_emplace(std::move(key), ceiling);
      if (!fresh) it->second = std::min(it->second, ceiling);
    }
  }

  // True when bands [band, N) can add at least `need` bits; the completion
  // found is written into current_.
  bool reach(int band, Bits need) {
    budget_.count();
    if (need <= 0) {
      std::fill(current_.begin() + band, current_.end(), kIdle);
      return true;
    }
    if (band == N_ || bound_(residual_, band, need - 1) < need) return false;

    // Failing to reach `need` means failing every larger need too.
    StateKey key{band, residual_};
    if (const auto it = unreachable_.find(key);
        it != unreachable_.end() && it->second <= need) {
      return false;
    }

    for (const auto& [gain, u] : choices(band)) {
      take(u, gain);
      current_[band] = u;
      const bool ok = reach(band + 1, need - gain);
      give_back(u, gain);
      if (ok) return true;
    }
    current_[band] = kIdle;
    if (reach(band + 1, need)) return true;

    if (unreachable_.size() < kMaxMemo) {
      auto [it, fresh] = unreachable_.try_emplace(std::move(key), need);
      if (!fresh) it->second = std::min(it->second, need);
    }
    return false;
  }

  const SnapshotInstance& inst_;
  NodeBudget& budget_;
  int K_;
  int N_;
  BoundEvaluator bound_;
  std::vector<Bits> residual_;
  Assignment current_;
  Assignment best_;
  Bits best_value_ = -1;
  Bits proven_ = std::numeric_limits<Bits>::max();
  std::unordered_map<StateKey, Bits, StateHash> ceiling_;
  std::unordered_map<StateKey, Bits, StateHash> unreachable_;
};

Assignment to_assignment(const Allocation& alloc) {
  Assignment out;
  for (const auto& owner : alloc.assignment) out.push_back(owner.value_or(kIdle));
  return out;
}

BbResult run_search(const SnapshotInstance& inst, const BbLimits& limits) {
  const int N = inst.num_bands();
  NodeBudget budget(limits);
  BbResult result;

  // The value pass may take bands in any order; high-rate bands first
  // settles the big decisions near the root.
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Bits> top(N, 0);
  for (const auto& row : inst.rates) {
    for (int b = 0; b < N; ++b) top[b] = std::max(top[b], row[b]);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return top[a] > top[b]; });
  SnapshotInstance reordered = inst;
  for (int u = 0; u < inst.num_users(); ++u) {
    for (int i = 0; i < N; ++i) reordered.rates[u][i] = inst.rates[u][order[i]];
  }
  auto to_reordered = [&](const Assignment& a) {
    Assignment out(N);
    for (int i = 0; i < N; ++i) out[i] = a[order[i]];
    return out;
  };
  auto from_reordered = [&](const Assignment& a) {
    Assignment out(N);
    for (int i = 0; i < N; ++i) out[order[i]] = a[i];
    return out;
  };

  Search value_pass(reordered, budget);
  result.root_bound = Search(inst, budget).root_bound();
  value_pass.offer(to_reordered(to_assignment(schedule_greedy_backlog(inst))));
  value_pass.offer(to_reordered(to_assignment(schedule_maxci(inst))));
  Assignment polished = value_pass.best();
  detail::improve_locally(reordered, polished);
  value_pass.offer(polished);
  value_pass.set_ceiling(result.root_bound);

  // The assignment LP splits bands between users; when it leaves a gap,
  // the subset relaxation usually closes it at the root.
  if (result.root_bound > value_pass.best_value()) {
    if (auto subset = detail::subset_bound(reordered, value_pass.best_value())) {
      value_pass.offer(subset->rounded);
      value_pass.set_ceiling(subset->bound);
    }
  }
  if (value_pass.best_value() < std::min(result.root_bound, value_pass.ceiling())) {
    Assignment kicked = value_pass.best();
    detail::search_locally(reordered, kicked, value_pass.ceiling(), kLocalRounds);
    value_pass.offer(kicked);
  }

  Assignment chosen;
  try {
    value_pass.maximize();
    Assignment witness = from_reordered(value_pass.best());
    budget.start_tie_break();
    Search tie_break(inst, budget);
    try {
      chosen = tie_break.canonical(value_pass.best_value(), witness);
    } catch (const TieBreakBudget&) {
      // Still optimal, just not necessarily the smallest maximizer.
      chosen = witness;
      result.lexicographic = false;
    }
  } catch (const LimitHit&) {
    result.status = SolveStatus::kLimitReached;
    result.lexicographic = false;
    chosen = from_reordered(value_pass.best());
  }

  std::vector<std::optional<int>> assignment(N);
  for (int b = 0; b < N; ++b) {
    if (chosen[b] != kIdle) assignment[b] = chosen[b];
  }
  result.allocation = make_allocation(inst, std::move(assignment));
  result.objective = objective_of(inst, result.allocation);
  result.nodes_explored = budget.nodes();
  return result;
}

}  // namespace

Bits completion_bound(const SnapshotInstance& inst,
                      std::span<const Backlog> residual, int first_band) {
  if (static_cast<int>(residual.size()) != inst.num_users()) {
    throw InputError("completion_bound: need one residual per user");
  }
  if (first_band < 0 || first_band > inst.num_bands()) {
    throw InputError("completion_bound: band index out of range");
  }
  std::vector<Bits> r;
  for (const auto& q : residual) r.push_back(to_residual(q));
  return BoundEvaluator(inst)(r, first_band);
}

BbResult solve_bb(const SnapshotInstance& inst, const BbLimits& limits) {
  inst.validate();
  return run_search(inst, limits);
}

}  // namespace mbsim
