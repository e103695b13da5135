#pragma once

#include <optional>
#include <vector>

#include "mbsim/types.hpp"

namespace mbsim::detail {

// Upper bound from relaxing "one user per band" with band prices mu >= 0:
//   L(mu) = sum_b mu_b + sum_u max_S [min(q_u, r_u(S)) - mu(S)].
// Each user picks a whole subset of bands, so the partial-band splitting
// that weakens the assignment LP is gone. Prices come from the LP over
// subset columns, grown by column generation; any prices give a valid
// bound, so the LP arithmetic only affects tightness.
struct SubsetBound {
  Bits bound = 0;
  // An assignment rounded from the LP solution: per band, user or -1.
  std::vector<int> rounded;
};

// Stops early once the bound is <= `target`. Returns nothing when the
// per-user tables would exceed `max_states` entries.
std::optional<SubsetBound> subset_bound(const SnapshotInstance& inst, Bits target,
                                        std::size_t max_states = 4000000);

// First-improvement local search over single-band moves and two-band swaps.
void improve_locally(const SnapshotInstance& inst, std::vector<int>& assignment);

// Iterated local search: random two-band kicks, each followed by
// improve_locally, keeping ties. Fixed seed, so results are repeatable.
// Stops once `target` is reached or after `rounds` kicks.
void search_locally(const SnapshotInstance& inst, std::vector<int>& assignment,
                    Bits target, int rounds);

}  // namespace mbsim::detail
