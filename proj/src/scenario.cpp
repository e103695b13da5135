#include "mbsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mbsim/error.hpp"

namespace mbsim {

std::string to_string(const Backlog& b) {
  return b.is_unbounded() ? "inf" : std::to_string(b.bits());
}

void SnapshotInstance::validate() const {
  if (rates.empty()) throw InputError("instance has no users");
  const auto bands = rates.front().size();
  if (bands == 0) throw InputError("instance has no bands");
  for (std::size_t u = 0; u < rates.size(); ++u) {
    if (rates[u].size() != bands) {
      throw InputError("rates row " + std::to_string(u) + " has " +
                       std::to_string(rates[u].size()) + " bands, expected " +
                       std::to_string(bands));
    }
    for (Bits r : rates[u]) {
      if (r < 0) throw InputError("negative rate for user " + std::to_string(u));
    }
  }
  if (backlog.size() != rates.size()) {
    throw InputError("backlog has " + std::to_string(backlog.size()) +
                     " entries, expected " + std::to_string(rates.size()));
  }
  for (const auto& q : backlog) {
    if (q.is_finite() && q.bits() < 0) throw InputError("negative backlog");
  }
}

RateTable default_rate_table() {
  RateTable table{};
  for (int c = 0; c <= kMaxCqi; ++c) table[c] = 100 * c;
  return table;
}

void ScenarioConfig::validate() const {
  if (num_users < 1) throw ConfigError("num_users must be >= 1");
  if (num_bands < 1) throw ConfigError("num_bands must be >= 1");
  if (num_ttis < 1) throw ConfigError("num_ttis must be >= 1");
  if (rate_table[0] != 0) throw ConfigError("rate_table[0] must be 0");
  for (int c = 1; c <= kMaxCqi; ++c) {
    if (rate_table[c] < rate_table[c - 1]) {
      throw ConfigError("rate_table must be non-decreasing in CQI");
    }
  }
  if (!initial_backlog.empty() &&
      initial_backlog.size() != static_cast<std::size_t>(num_users)) {
    throw ConfigError("initial_backlog must have one entry per user");
  }
  for (const auto& q : initial_backlog) {
    if (q.is_finite() && q.bits() < 0) {
      throw ConfigError("initial_backlog must be non-negative");
    }
  }
  if (pf_alpha < 0.0 || pf_alpha > 1.0) {
    throw ConfigError("pf_alpha must lie in [0, 1]");
  }
  if (const auto* walk = std::get_if<RandomWalkCqi>(&cqi_model)) {
    if (walk->step < 0) throw ConfigError("random-walk step must be >= 0");
    if (walk->initial && (*walk->initial < 0 || *walk->initial > kMaxCqi)) {
      throw ConfigError("random-walk initial CQI must be in 0..15");
    }
  }
  if (const auto* burst = std::get_if<BernoulliBurstTraffic>(&traffic_model)) {
    if (burst->p < 0.0 || burst->p > 1.0) {
      throw ConfigError("bernoulli-burst p must lie in [0, 1]");
    }
    if (burst->bits < 0) throw ConfigError("burst size must be >= 0");
  }
  if (const auto* constant = std::get_if<ConstantTraffic>(&traffic_model)) {
    if (constant->bits < 0) throw ConfigError("constant traffic must be >= 0");
  }
}

Backlog ScenarioConfig::initial_backlog_of(int user) const {
  return initial_backlog.empty() ? Backlog{0} : initial_backlog.at(user);
}

ChannelTrace::ChannelTrace(int num_ttis, int num_users, int num_bands)
    : ttis_(num_ttis),
      users_(num_users),
      bands_(num_bands),
      cqi_(static_cast<std::size_t>(num_ttis) * num_users * num_bands, 0) {}

TrafficTrace::TrafficTrace(int num_ttis, int num_users)
    : ttis_(num_ttis),
      users_(num_users),
      bits_(static_cast<std::size_t>(num_ttis) * num_users, 0) {}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; std::hash is not stable across implementations.
std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Minimal CSV reader for the two trace formats: fixed header, integer cells.
class IntCsv {
 public:
  IntCsv(const std::filesystem::path& path, std::string_view header,
         std::size_t columns)
      : path_(path), in_(path), columns_(columns) {
    if (!in_) throw InputError("cannot open trace file " + path.string());
    std::string line;
    if (!std::getline(in_, line)) {
      throw ParseError(path.string() + ": empty file", 1);
    }
    trim(line);
    if (line != header) {
      throw ParseError(path.string() + ": expected header '" +
                           std::string(header) + "', got '" + line + "'",
                       1);
    }
    line_no_ = 1;
  }

  // False at end of file; blank lines are skipped.
  bool next(std::vector<std::int64_t>& cells) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      trim(line);
      if (line.empty()) continue;
      cells.clear();
      std::size_t start = 0;
      for (std::size_t col = 1;; ++col) {
        const auto comma = line.find(',', start);
        const auto field = std::string_view(line).substr(
            start, comma == std::string::npos ? std::string::npos
                                              : comma - start);
        std::int64_t value = 0;
        const auto* end = field.data() + field.size();
        const auto [ptr, ec] = std::from_chars(field.data(), end, value);
        if (ec != std::errc{} || ptr != end) {
          fail("column " + std::to_string(col) + ": not an integer: '" +
               std::string(field) + "'");
        }
        cells.push_back(value);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (cells.size() != columns_) {
        fail("expected " + std::to_string(columns_) + " columns, got " +
             std::to_string(cells.size()));
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_.string() + ": " + what, line_no_);
  }

 private:
  static void trim(std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t columns_;
  std::size_t line_no_ = 0;
};

void check_index(const IntCsv& csv, const char* name, std::int64_t value,
                 int limit) {
  if (value < 0 || value >= limit) {
    csv.fail(std::string(name) + " " + std::to_string(value) +
             " out of range [0, " + std::to_string(limit) + ")");
  }
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t stream) {
  return splitmix64(splitmix64(seed ^ hash_tag(tag)) + stream);
}

ChannelTrace load_channel_csv(const std::filesystem::path& path, int num_ttis,
                              int num_users, int num_bands) {
  ChannelTrace trace(num_ttis, num_users, num_bands);
  std::vector<char> seen(static_cast<std::size_t>(num_ttis) * num_users *
                             num_bands,
                         0);
  IntCsv csv(path, "tti,user,band,cqi", 4);
  std::vector<std::int64_t> row;
  while (csv.next(row)) {
    check_index(csv, "tti", row[0], num_ttis);
    check_index(csv, "user", row[1], num_users);
    check_index(csv, "band", row[2], num_bands);
    if (row[3] < 0 || row[3] > kMaxCqi) {
      csv.fail("column 4: cqi " + std::to_string(row[3]) + " not in 0..15");
    }
    auto& flag = seen[(static_cast<std::size_t>(row[0]) * num_users + row[1]) *
                          num_bands +
                      row[2]];
    if (flag) csv.fail("duplicate (tti, user, band) entry");
    flag = 1;
    trace.set_cqi(static_cast<int>(row[0]), static_cast<int>(row[1]),
                  static_cast<int>(row[2]), static_cast<int>(row[3]));
  }
  const auto missing = std::count(seen.begin(), seen.end(), 0);
  if (missing != 0) {
    throw ParseError(path.string() + ": " + std::to_string(missing) +
                     " (tti, user, band) cells missing from the grid");
  }
  return trace;
}

TrafficTrace load_traffic_csv(const std::filesystem::path& path, int num_ttis,
                              int num_users) {
  TrafficTrace trace(num_ttis, num_users);
  std::vector<char> seen(static_cast<std::size_t>(num_ttis) * num_users, 0);
  IntCsv csv(path, "tti,user,bits", 3);
  std::vector<std::int64_t> row;
  while (csv.next(row)) {
    check_index(csv, "tti", row[0], num_ttis);
    check_index(csv, "user", row[1], num_users);
    if (row[2] < 0) csv.fail("column 3: negative bits");
    auto& flag = seen[static_cast<std::size_t>(row[0]) * num_users + row[1]];
    if (flag) csv.fail("duplicate (tti, user) entry");
    flag = 1;
    trace.set_bits(static_cast<int>(row[0]), static_cast<int>(row[1]), row[2]);
  }
  // Unlisted (tti, user) pairs carry no arrivals.
  return trace;
}

ChannelTrace gen_channel_trace(const ScenarioConfig& config) {
  config.validate();
  const int T = config.num_ttis;
  const int K = config.num_users;
  const int N = config.num_bands;

  if (const auto* file = std::get_if<CqiTraceFile>(&config.cqi_model)) {
    return load_channel_csv(file->path, T, K, N);
  }

  ChannelTrace trace(T, K, N);
  std::uniform_int_distribution<int> any_cqi(0, kMaxCqi);
  // One stream per (user, band) so a longer run extends a shorter one.
  for (int u = 0; u < K; ++u) {
    for (int b = 0; b < N; ++b) {
      std::mt19937_64 rng(derive_stream_seed(
          config.seed, "channel", static_cast<std::uint64_t>(u) * N + b));
      if (std::holds_alternative<IidUniformCqi>(config.cqi_model)) {
        for (int t = 0; t < T; ++t) trace.set_cqi(t, u, b, any_cqi(rng));
        continue;
      }
      const auto& walk = std::get<RandomWalkCqi>(config.cqi_model);
      std::uniform_int_distribution<int> delta(-walk.step, walk.step);
      int cqi = walk.initial ? *walk.initial : any_cqi(rng);
      trace.set_cqi(0, u, b, cqi);
      for (int t = 1; t < T; ++t) {
        cqi = std::clamp(cqi + delta(rng), 0, kMaxCqi);
        trace.set_cqi(t, u, b, cqi);
      }
    }
  }
  return trace;
}

TrafficTrace gen_traffic_trace(const ScenarioConfig& config) {
  config.validate();
  const int T = config.num_ttis;
  const int K = config.num_users;

  if (const auto* file = std::get_if<TrafficTraceFile>(&config.traffic_model)) {
    return load_traffic_csv(file->path, T, K);
  }

  TrafficTrace trace(T, K);
  if (const auto* constant = std::get_if<ConstantTraffic>(&config.traffic_model)) {
    for (int t = 0; t < T; ++t) {
      for (int u = 0; u < K; ++u) trace.set_bits(t, u, constant->bits);
    }
    return trace;
  }

  const auto& burst = std::get<BernoulliBurstTraffic>(config.traffic_model);
  for (int u = 0; u < K; ++u) {
    std::mt19937_64 rng(derive_stream_seed(config.seed, "traffic", u));
    std::bernoulli_distribution arrives(burst.p);
    for (int t = 0; t < T; ++t) {
      trace.set_bits(t, u, arrives(rng) ? burst.bits : 0);
    }
  }
  return trace;
}

Bits cqi_to_rate(int cqi, const ScenarioConfig& config) {
  if (cqi < 0 || cqi > kMaxCqi) {
    throw InputError("cqi " + std::to_string(cqi) + " not in 0..15");
  }
  return config.rate_table[cqi];
}

SystemState initial_state(const ScenarioConfig& config) {
  SystemState state;
  state.tti = 0;
  for (int u = 0; u < config.num_users; ++u) {
    state.backlog.push_back(config.initial_backlog_of(u));
  }
  state.cumulative_served.assign(config.num_users, 0);
  state.avg_throughput.assign(config.num_users,
                              static_cast<double>(config.rate_table[kMaxCqi]));
  return state;
}

SystemState apply_arrivals(SystemState state, const TrafficTrace& traffic,
                           int tti) {
  if (tti < 0 || tti >= traffic.num_ttis()) {
    throw InputError("apply_arrivals: tti " + std::to_string(tti) +
                     " out of range");
  }
  if (state.backlog.size() != static_cast<std::size_t>(traffic.num_users())) {
    throw InputError("apply_arrivals: user count mismatch");
  }
  for (int u = 0; u < traffic.num_users(); ++u) {
    auto& q = state.backlog[u];
    if (q.is_finite()) q = Backlog{q.bits() + traffic.bits(tti, u)};
  }
  return state;
}

SystemState apply_service(SystemState state, const Allocation& alloc,
                          double pf_alpha) {
  const auto K = state.backlog.size();
  if (alloc.served.size() != K) {
    throw ContractError("apply_service: allocation has " +
                        std::to_string(alloc.served.size()) +
                        " users, state has " + std::to_string(K));
  }
  for (std::size_t u = 0; u < K; ++u) {
    const Bits s = alloc.served[u];
    auto& q = state.backlog[u];
    if (s < 0) throw ContractError("apply_service: negative served bits");
    if (q.is_finite()) {
      if (s > q.bits()) {
        throw ContractError("apply_service: user " + std::to_string(u) +
                            " served " + std::to_string(s) +
                            " bits with backlog " + std::to_string(q.bits()));
      }
      q = Backlog{q.bits() - s};
    }
    state.cumulative_served[u] += s;
    state.avg_throughput[u] = (1.0 - pf_alpha) * state.avg_throughput[u] +
                              pf_alpha * static_cast<double>(s);
  }
  ++state.tti;
  return state;
}

}  // namespace mbsim
