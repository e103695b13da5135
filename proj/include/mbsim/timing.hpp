#pragma once

#include <chrono>

namespace mbsim {

using Micros = std::chrono::microseconds;
using Clock = std::chrono::steady_clock;

// Durations of one scheduling call. The three phases are disjoint
// sub-intervals of `total`.
struct PhaseTimings {
  Micros creation{0};
  Micros solving{0};
  Micros reading{0};
  Micros total{0};

  bool consistent() const {
    return creation.count() >= 0 && solving.count() >= 0 &&
           reading.count() >= 0 && creation + solving + reading <= total;
  }

  friend bool operator==(const PhaseTimings&, const PhaseTimings&) = default;
};

// Splits a timeline into consecutive laps.
class Stopwatch {
 public:
  Stopwatch() : last_(Clock::now()) {}

  Micros lap() {
    const auto now = Clock::now();
    const auto elapsed = std::chrono::duration_cast<Micros>(now - last_);
    last_ = now;
    return elapsed;
  }

 private:
  Clock::time_point last_;
};

}  // namespace mbsim
