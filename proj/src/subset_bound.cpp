#include "subset_bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mbsim::detail {
namespace {

constexpr double kEps = 1e-9;
constexpr int kMaxRounds = 300;

// Dense tableau simplex for max c.x, A x <= 1, x >= 0 with 0/1 columns.
// Slack columns come first, so the slack block of the tableau is B^-1 and
// new columns can be added to an optimal tableau. Bland's rule throughout.
class Master {
 public:
  explicit Master(int rows) : m_(rows), rhs_(rows, 1.0), basis_(rows), reduced_(rows, 0.0) {
    tab_.assign(rows, std::vector<double>(rows, 0.0));
    for (int i = 0; i < rows; ++i) {
      tab_[i][i] = 1.0;
      basis_[i] = i;
    }
  }

  // Dual price of a row.
  double dual(int row) const { return -reduced_[row]; }

  int add_column(const std::vector<int>& rows, double cost) {
    double d = cost;
    for (int r : rows) d += reduced_[r];
    for (int i = 0; i < m_; ++i) {
      double v = 0.0;
      for (int r : rows) v += tab_[i][r];
      tab_[i].push_back(v);
    }
    reduced_.push_back(d);
    return static_cast<int>(reduced_.size()) - 1;
  }

  void optimize() {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < static_cast<int>(reduced_.size()); ++j) {
        if (reduced_[j] > kEps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        const double a = tab_[i][enter];
        if (a <= kEps) continue;
        const double ratio = rhs_[i] / a;
        if (ratio < best - kEps || (ratio < best + kEps && leave >= 0 && basis_[i] < basis_[leave])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      // Columns are 0/1 with rhs 1, so the LP is bounded.
      if (leave < 0) return;
      pivot(leave, enter);
    }
  }

  // Value of a column in the current basic solution.
  double value(int column) const {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] == column) return std::max(0.0, rhs_[i]);
    }
    return 0.0;
  }

 private:
  void pivot(int p, int q) {
    const double a = tab_[p][q];
    for (double& v : tab_[p]) v /= a;
    rhs_[p] /= a;
    for (int i = 0; i < m_; ++i) {
      if (i == p) continue;
      const double f = tab_[i][q];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < tab_[i].size(); ++j) tab_[i][j] -= f * tab_[p][j];
      rhs_[i] -= f * rhs_[p];
    }
    const double f = reduced_[q];
    for (std::size_t j = 0; j < reduced_.size(); ++j) reduced_[j] -= f * tab_[p][j];
    basis_[p] = q;
  }

  int m_;
  std::vector<std::vector<double>> tab_;
  std::vector<double> rhs_;
  std::vector<int> basis_;
  std::vector<double> reduced_;
};

struct Pricing {
  double value = 0.0;        // max_S min(q, r(S)) - mu(S)
  Bits served = 0;           // min(q, r(S)) at the argmax
  std::vector<int> bands;    // argmax S
};

// Best subset for one user at band prices mu. Capped users run a knapsack
// over served bits in units of `unit`, sums clamped at the backlog.
class UserPricer {
 public:
  UserPricer(const std::vector<Bits>& rates, Bits cap, Bits unit)
      : rates_(rates), cap_(cap), unit_(unit) {}

  bool capped() const { return cap_ >= 0; }
  std::size_t states() const { return capped() ? static_cast<std::size_t>(cap_ / unit_ + 1) : 0; }

  Pricing price(const std::vector<double>& mu) {
    const int N = static_cast<int>(rates_.size());
    Pricing out;
    if (!capped()) {
      for (int b = 0; b < N; ++b) {
        if (static_cast<double>(rates_[b]) > mu[b] + kEps) {
          out.bands.push_back(b);
          out.served += rates_[b];
          out.value += static_cast<double>(rates_[b]) - mu[b];
        }
      }
      return out;
    }
    const auto W = static_cast<int>(cap_ / unit_);
    const double inf = std::numeric_limits<double>::infinity();
    cost_.assign(W + 1, inf);
    cost_[0] = 0.0;
    from_.assign(static_cast<std::size_t>(N) * (W + 1), -1);
    for (int b = 0; b < N; ++b) {
      const auto a = static_cast<int>(rates_[b] / unit_);
      if (a == 0) continue;
      next_ = cost_;
      int* from = &from_[static_cast<std::size_t>(b) * (W + 1)];
      for (int w = 0; w <= W; ++w) {
        if (cost_[w] == inf) continue;
        const int to = std::min(W, w + a);
        const double c = cost_[w] + mu[b];
        if (c < next_[to] - kEps) {
          next_[to] = c;
          from[to] = w;
        }
      }
      cost_.swap(next_);
    }
    int best_w = 0;
    double best = 0.0;
    for (int w = 1; w <= W; ++w) {
      const double v = static_cast<double>(w) * static_cast<double>(unit_) - cost_[w];
      if (v > best + kEps) {
        best = v;
        best_w = w;
      }
    }
    out.value = best;
    out.served = static_cast<Bits>(best_w) * unit_;
    for (int b = N - 1, w = best_w; b >= 0 && w > 0; --b) {
      const int prev = from_[static_cast<std::size_t>(b) * (W + 1) + w];
      if (prev < 0) continue;
      out.bands.push_back(b);
      w = prev;
    }
    std::reverse(out.bands.begin(), out.bands.end());
    return out;
  }

 private:
  const std::vector<Bits>& rates_;
  Bits cap_;  // -1: never binds
  Bits unit_;
  std::vector<double> cost_;
  std::vector<double> next_;
  std::vector<int> from_;
};

Bits value_of(const SnapshotInstance& inst, const std::vector<int>& assignment) {
  std::vector<Bits> sum(inst.num_users(), 0);
  for (int b = 0; b < inst.num_bands(); ++b) {
    if (assignment[b] >= 0) sum[assignment[b]] += inst.rates[assignment[b]][b];
  }
  Bits total = 0;
  for (int u = 0; u < inst.num_users(); ++u) total += inst.backlog[u].cap(sum[u]);
  return total;
}

struct Column {
  int user;
  std::vector<int> bands;
  int index;
};

}  // namespace

std::optional<SubsetBound> subset_bound(const SnapshotInstance& inst, Bits target,
                                        std::size_t max_states) {
  const int K = inst.num_users();
  const int N = inst.num_bands();

  Bits unit = 0;
  std::vector<Bits> total(K, 0);
  for (int u = 0; u < K; ++u) {
    for (Bits r : inst.rates[u]) {
      unit = std::gcd(unit, r);
      total[u] += r;
    }
  }
  SubsetBound result;
  result.rounded.assign(N, -1);
  if (unit == 0) return result;

  std::vector<Bits> cap(K, -1);
  for (int u = 0; u < K; ++u) {
    const auto& q = inst.backlog[u];
    if (q.is_finite() && q.bits() < total[u]) {
      cap[u] = q.bits();
      unit = std::gcd(unit, q.bits());
    }
  }
  std::vector<UserPricer> pricers;
  std::size_t states = 0;
  for (int u = 0; u < K; ++u) {
    pricers.emplace_back(inst.rates[u], cap[u], unit);
    states += pricers.back().states() * static_cast<std::size_t>(N);
  }
  if (states > max_states) return std::nullopt;

  // Objective values are multiples of the unit.
  const auto floor_to_unit = [&](double v) {
    const double units = std::floor(v / static_cast<double>(unit) + 1e-7);
    return static_cast<Bits>(units) * unit;
  };

  Master master(K + N);
  std::vector<Column> columns;
  std::vector<double> mu(N, 0.0);
  result.bound = std::numeric_limits<Bits>::max();
  for (int round = 0; round < kMaxRounds; ++round) {
    for (int b = 0; b < N; ++b) mu[b] = std::max(0.0, master.dual(K + b));
    double lagrangian = std::accumulate(mu.begin(), mu.end(), 0.0);
    bool added = false;
    for (int u = 0; u < K; ++u) {
      Pricing p = pricers[u].price(mu);
      lagrangian += std::max(0.0, p.value);
      if (p.value - master.dual(u) <= 1e-7 || p.bands.empty()) continue;
      std::vector<int> rows{u};
      for (int b : p.bands) rows.push_back(K + b);
      const int index = master.add_column(rows, static_cast<double>(p.served));
      columns.push_back({u, std::move(p.bands), index});
      added = true;
    }
    result.bound = std::min(result.bound, floor_to_unit(lagrangian));
    if (result.bound <= target || !added) break;
    master.optimize();
  }

  std::vector<std::pair<double, const Column*>> support;
  for (const auto& c : columns) {
    const double x = master.value(c.index);
    if (x > kEps) support.emplace_back(x, &c);
  }
  std::stable_sort(support.begin(), support.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<bool> placed(K, false);
  for (const auto& [x, c] : support) {
    if (placed[c->user]) continue;
    placed[c->user] = true;
    for (int b : c->bands) {
      if (result.rounded[b] < 0) result.rounded[b] = c->user;
    }
  }
  improve_locally(inst, result.rounded);
  return result;
}

void improve_locally(const SnapshotInstance& inst, std::vector<int>& assignment) {
  const int K = inst.num_users();
  const int N = inst.num_bands();
  std::vector<Bits> sum(K, 0);
  for (int b = 0; b < N; ++b) {
    if (assignment[b] >= 0) sum[assignment[b]] += inst.rates[assignment[b]][b];
  }
  const auto served = [&](int u, Bits s) { return u < 0 ? 0 : inst.backlog[u].cap(s); };
  const auto rate = [&](int u, int b) { return u < 0 ? 0 : inst.rates[u][b]; };
  const auto sum_of = [&](int u) { return u < 0 ? 0 : sum[u]; };

  for (bool improved = true; improved;) {
    improved = false;
    for (int b = 0; b < N; ++b) {
      for (int v = -1; v < K; ++v) {
        const int o = assignment[b];
        if (v == o) continue;
        const Bits delta = served(v, sum_of(v) + rate(v, b)) - served(v, sum_of(v)) +
                           served(o, sum_of(o) - rate(o, b)) - served(o, sum_of(o));
        if (delta <= 0) continue;
        if (o >= 0) sum[o] -= rate(o, b);
        if (v >= 0) sum[v] += rate(v, b);
        assignment[b] = v;
        improved = true;
      }
    }
    for (int b1 = 0; b1 < N; ++b1) {
      for (int b2 = b1 + 1; b2 < N; ++b2) {
        const int o1 = assignment[b1];
        const int o2 = assignment[b2];
        if (o1 < 0 || o2 < 0 || o1 == o2) continue;
        const Bits s1 = sum[o1] - rate(o1, b1) + rate(o1, b2);
        const Bits s2 = sum[o2] - rate(o2, b2) + rate(o2, b1);
        const Bits delta = served(o1, s1) + served(o2, s2) - served(o1, sum[o1]) - served(o2, sum[o2]);
        if (delta <= 0) continue;
        sum[o1] = s1;
        sum[o2] = s2;
        std::swap(assignment[b1], assignment[b2]);
        improved = true;
      }
    }
  }
}

void search_locally(const SnapshotInstance& inst, std::vector<int>& assignment,
                    Bits target, int rounds) {
  const int K = inst.num_users();
  const int N = inst.num_bands();
  if (N == 0) return;
  constexpr int kKick = 2;
  std::mt19937_64 rng(0x5eed);
  improve_locally(inst, assignment);
  std::vector<int> current = assignment;
  Bits current_value = value_of(inst, current);
  Bits best_value = current_value;
  for (int round = 0; round < rounds && best_value < target; ++round) {
    std::vector<int> trial = current;
    for (int k = 0; k < kKick; ++k) {
      trial[rng() % N] = static_cast<int>(rng() % static_cast<unsigned>(K + 1)) - 1;
    }
    improve_locally(inst, trial);
    const Bits value = value_of(inst, trial);
    if (value < current_value) continue;
    current = std::move(trial);
    current_value = value;
    if (value > best_value) {
      best_value = value;
      assignment = current;
    }
  }
}

}  // namespace mbsim::detail
