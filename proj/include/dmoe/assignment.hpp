#pragma once

// Optimal subcarrier allocation with one subcarrier per active link, solved
// as a min-cost bipartite matching of links into subcarriers.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dmoe/sysmodel.hpp"

namespace dmoe {

struct Link {
  std::size_t source = 0;
  std::size_t target = 0;

  bool operator==(const Link&) const = default;
};

struct AssignmentProblem {
  std::vector<Link> links;
  std::size_t num_subcarriers = 0;
  // links x M row-major; w = P0 * s / r, +inf where r == 0.
  std::vector<double> weights;

  std::size_t num_links() const { return links.size(); }
  std::span<const double> row(std::size_t link) const {
    return {weights.data() + link * num_subcarriers, num_subcarriers};
  }
};

struct AssignmentResult {
  std::vector<std::size_t> subcarrier;  // one per link, pairwise distinct
  double cost = 0.0;

  bool operator==(const AssignmentResult&) const = default;
};

inline constexpr std::size_t kMaxBruteForceLinks = 7;
inline constexpr std::size_t kMaxBruteForceSubcarriers = 8;

// One row per link with nonzero traffic, in (source, target) order.
// Throws CapacityError when active links exceed M.
AssignmentProblem build_assignment(const TrafficMatrix& traffic,
                                   const ChannelRealization& channel,
                                   const SystemConfig& cfg);

// Minimum total weight. Among matchings whose cost is within a relative 1e-12
// of the optimum, the lexicographically smallest subcarrier vector is chosen.
// Throws InfeasibleAssignmentError when no finite matching exists and
// CapacityError when links exceed subcarriers.
AssignmentResult solve_assignment(const AssignmentProblem& problem);

// Exhaustive search over injective maps with the same tie rule.
// Throws SizeGuardError beyond 7 links or 8 subcarriers.
AssignmentResult solve_assignment_bruteforce(const AssignmentProblem& problem);

// Cost of a given link -> subcarrier vector, summed in link order.
double assignment_cost(const AssignmentProblem& problem,
                       std::span<const std::size_t> subcarrier);

// Raw solver on a dense rows x cols matrix (rows <= cols); exposed for the
// kernel equivalence tests. Returns the column per row; empty if infeasible.
std::vector<std::size_t> min_cost_matching(std::span<const double> weights,
                                           std::size_t rows, std::size_t cols);

}  // namespace dmoe
