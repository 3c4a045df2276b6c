#pragma once

// Exhaustive joint optimum of expert selection and subcarrier assignment for
// tiny scenarios. Independent of the DES and Hungarian code paths; used by
// the Monte-Carlo harness and the tests.

#include <cstddef>
#include <vector>

#include "dmoe/jesa.hpp"

namespace dmoe {

inline constexpr std::size_t kOracleMaxExperts = 3;
inline constexpr std::size_t kOracleMaxSubcarriers = 12;
inline constexpr std::size_t kOracleMaxTokens = 2;  // per source

struct JointOptimum {
  double energy = 0.0;
  std::vector<std::uint64_t> traffic;  // K x K token counts of the optimum
};

// Minimum of the total energy over every feasible alpha (per token: C1 and
// 1 <= |S| <= D, or Top-D when nothing qualifies) and every exclusive
// one-subcarrier-per-active-link beta. Throws SizeGuardError outside
// K <= 3, M <= 12, N_i <= 2.
JointOptimum joint_optimum(const Scenario& scenario);

}  // namespace dmoe
