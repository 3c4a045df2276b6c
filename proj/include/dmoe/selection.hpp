#pragma once

// Dynamic Expert Selection: per-token minimum-energy choice of experts whose
// gating scores reach a QoS threshold, using at most D experts.
//
// The search is a breadth-first branch-and-bound over exclude/include
// decisions taken in descending energy-to-score order. A node stands for the
// set of experts not yet excluded; its LP relaxation (fractional exclusion
// of the worst-ratio experts) bounds every completion from below.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dmoe/sysmodel.hpp"

namespace dmoe {

struct CandidateExpert {
  std::size_t index = 0;  // expert id
  double score = 0.0;     // gating score t_j for this token
  double cost = 0.0;      // J if selected: a_j plus per-token comm energy

  bool operator==(const CandidateExpert&) const = default;
};

// Positions refer to the search order (see search_order()), not expert ids.
struct SearchNode {
  std::size_t next = 0;
  double remaining_score = 0.0;   // sum of scores not excluded
  double remaining_energy = 0.0;  // sum of costs not excluded
  std::uint64_t excluded = 0;
  std::uint64_t included = 0;
};

struct SelectionResult {
  std::vector<std::size_t> selected;  // expert ids, ascending
  double energy = 0.0;
  bool feasible = false;
  bool fallback_used = false;
  std::size_t nodes_expanded = 0;

  bool operator==(const SelectionResult& other) const {
    return selected == other.selected && energy == other.energy &&
           feasible == other.feasible && fallback_used == other.fallback_used;
  }
};

struct DesOptions {
  bool use_bound = true;
  // 0 disables the budget. When more nodes would be expanded the search stops
  // and returns the Top-D fallback.
  std::size_t node_budget = 0;
};

inline constexpr std::size_t kMaxDesCandidates = 64;
inline constexpr std::size_t kMaxBruteForceCandidates = 25;

// Costs for token of `source`: e_j = a_j + P0 * s0 * n_j / R_j for j != source
// (n_j subcarriers on the link, 1 when link_subcarriers is empty) and
// e_source = a_source. Experts whose link rate is zero are unreachable and
// left out.
std::vector<CandidateExpert> candidate_costs(
    std::size_t source, std::span<const double> scores,
    std::span<const double> link_rates,
    std::span<const std::size_t> link_subcarriers,
    std::span<const ExpertProfile> profiles, const SystemConfig& cfg);

// Candidates sorted by cost/score descending (zero score first), ties by id.
std::vector<CandidateExpert> search_order(std::span<const CandidateExpert> candidates);

// LP lower bound on any completion of `node`. `ordered` is the search order.
// Returns 0 when the node's remaining score does not exceed the threshold.
double fractional_bound(const SearchNode& node,
                        std::span<const CandidateExpert> ordered,
                        double threshold);

// Minimum-energy selection with score >= threshold, 1 <= |S| <= D. Among
// equal energies the lexicographically smallest id set wins. When no subset
// qualifies the Top-D by score is returned with fallback_used set.
// Throws DomainError on empty candidates, D == 0 or more than 64 candidates.
SelectionResult select_experts_des(std::span<const CandidateExpert> candidates,
                                   double threshold, std::size_t max_experts,
                                   const DesOptions& options = {});

// Same contract by enumerating all 2^K subsets. Throws SizeGuardError for
// K > 25.
SelectionResult select_experts_bruteforce(
    std::span<const CandidateExpert> candidates, double threshold,
    std::size_t max_experts);

// The k highest scores, ties to the smaller index. energy is left at 0.
SelectionResult select_top_k(std::span<const double> scores, std::size_t k);

// Canonical energy and score of an id set over a candidate list.
double subset_energy(std::span<const CandidateExpert> candidates,
                     std::span<const std::size_t> selected);
double subset_score(std::span<const CandidateExpert> candidates,
                    std::span<const std::size_t> selected);

}  // namespace dmoe
