#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mbsim {

using Bits = std::int64_t;

// Queued bits for one user. Unbounded is an explicit state rather than a
// large number, so arithmetic on it never overflows.
class Backlog {
 public:
  constexpr Backlog() = default;
  constexpr Backlog(Bits bits) : bits_(bits) {}  // NOLINT: implicit by intent

  static constexpr Backlog unbounded() {
    Backlog b;
    b.unbounded_ = true;
    return b;
  }

  constexpr bool is_unbounded() const { return unbounded_; }
  constexpr bool is_finite() const { return !unbounded_; }
  // Only meaningful for finite backlogs.
  constexpr Bits bits() const { return bits_; }
  constexpr bool positive() const { return unbounded_ || bits_ > 0; }

  // min(backlog, amount); an unbounded backlog never caps.
  constexpr Bits cap(Bits amount) const {
    return unbounded_ || amount < bits_ ? amount : bits_;
  }

  friend constexpr bool operator==(const Backlog&, const Backlog&) = default;

 private:
  Bits bits_ = 0;
  bool unbounded_ = false;
};

std::string to_string(const Backlog& b);  // "inf" or the decimal bit count

// One scheduling epoch frozen as a standalone optimization input.
struct SnapshotInstance {
  std::int64_t tti = 0;
  std::vector<std::vector<Bits>> rates;  // [user][band], bits per TTI
  std::vector<Backlog> backlog;          // [user]

  int num_users() const { return static_cast<int>(rates.size()); }
  int num_bands() const {
    return rates.empty() ? 0 : static_cast<int>(rates.front().size());
  }

  // Throws InputError on ragged/negative rates or a backlog size mismatch.
  void validate() const;

  friend bool operator==(const SnapshotInstance&,
                         const SnapshotInstance&) = default;
};

// Per-band owner (nullopt = idle) plus the bits each user actually gets.
struct Allocation {
  std::vector<std::optional<int>> assignment;
  std::vector<Bits> served;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

}  // namespace mbsim
