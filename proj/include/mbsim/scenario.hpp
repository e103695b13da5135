#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "mbsim/types.hpp"

namespace mbsim {

inline constexpr int kMaxCqi = 15;
using RateTable = std::array<Bits, kMaxCqi + 1>;

// rate = 100 * cqi bits per TTI per band.
RateTable default_rate_table();

struct IidUniformCqi {};

struct RandomWalkCqi {
  int step = 1;
  // Starting CQI for every (user, band); drawn uniformly when absent.
  std::optional<int> initial;
};

struct CqiTraceFile {
  std::filesystem::path path;
};

using CqiModel = std::variant<IidUniformCqi, RandomWalkCqi, CqiTraceFile>;

struct ConstantTraffic {
  Bits bits = 0;
};

struct BernoulliBurstTraffic {
  double p = 0.0;
  Bits bits = 0;
};

struct TrafficTraceFile {
  std::filesystem::path path;
};

using TrafficModel =
    std::variant<ConstantTraffic, BernoulliBurstTraffic, TrafficTraceFile>;

struct ScenarioConfig {
  int num_users = 1;
  int num_bands = 1;
  int num_ttis = 1;
  CqiModel cqi_model = RandomWalkCqi{};
  TrafficModel traffic_model = ConstantTraffic{};
  std::vector<Backlog> initial_backlog;  // one per user; empty means all 0
  RateTable rate_table = default_rate_table();
  std::uint64_t seed = 0;
  double pf_alpha = 0.05;

  // Throws ConfigError when an invariant does not hold.
  void validate() const;
  Backlog initial_backlog_of(int user) const;
};

// CQI values indexed [tti][user][band].
class ChannelTrace {
 public:
  ChannelTrace() = default;
  ChannelTrace(int num_ttis, int num_users, int num_bands);

  int num_ttis() const { return ttis_; }
  int num_users() const { return users_; }
  int num_bands() const { return bands_; }

  int cqi(int tti, int user, int band) const {
    return cqi_[index(tti, user, band)];
  }
  void set_cqi(int tti, int user, int band, int value) {
    cqi_[index(tti, user, band)] = static_cast<std::uint8_t>(value);
  }

  friend bool operator==(const ChannelTrace&, const ChannelTrace&) = default;

 private:
  std::size_t index(int t, int u, int b) const {
    return (static_cast<std::size_t>(t) * users_ + u) * bands_ + b;
  }

  int ttis_ = 0;
  int users_ = 0;
  int bands_ = 0;
  std::vector<std::uint8_t> cqi_;
};

// Arriving bits indexed [tti][user].
class TrafficTrace {
 public:
  TrafficTrace() = default;
  TrafficTrace(int num_ttis, int num_users);

  int num_ttis() const { return ttis_; }
  int num_users() const { return users_; }

  Bits bits(int tti, int user) const {
    return bits_[static_cast<std::size_t>(tti) * users_ + user];
  }
  void set_bits(int tti, int user, Bits value) {
    bits_[static_cast<std::size_t>(tti) * users_ + user] = value;
  }

  friend bool operator==(const TrafficTrace&, const TrafficTrace&) = default;

 private:
  int ttis_ = 0;
  int users_ = 0;
  std::vector<Bits> bits_;
};

struct SystemState {
  int tti = 0;
  std::vector<Backlog> backlog;
  std::vector<Bits> cumulative_served;
  std::vector<double> avg_throughput;  // EWMA bits/TTI, used by PF

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

// Seed for one independent random stream: mixes the run seed with a
// component tag ("channel", "traffic", ...) and a stream index.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t stream);

ChannelTrace gen_channel_trace(const ScenarioConfig& config);
TrafficTrace gen_traffic_trace(const ScenarioConfig& config);

// CSV loaders; headers `tti,user,band,cqi` and `tti,user,bits`.
ChannelTrace load_channel_csv(const std::filesystem::path& path, int num_ttis,
                              int num_users, int num_bands);
TrafficTrace load_traffic_csv(const std::filesystem::path& path, int num_ttis,
                              int num_users);

Bits cqi_to_rate(int cqi, const ScenarioConfig& config);

SystemState initial_state(const ScenarioConfig& config);

SystemState apply_arrivals(SystemState state, const TrafficTrace& traffic,
                           int tti);

SystemState apply_service(SystemState state, const Allocation& alloc,
                          double pf_alpha);

}  // namespace mbsim
