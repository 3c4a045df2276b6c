#include "dmoe/selection.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>

#include "dmoe/error.hpp"
#include "dmoe/kernels.hpp"

namespace dmoe {

namespace {

// Running scores are updated by subtraction and may drift from the canonical
// sums by a few ulps; feasibility pruning keeps nodes within this slack and
// the exact test is applied to the canonical sums.
constexpr double kScoreSlack = 1e-12;
// Relative slack (against the root energy) before a bound prunes a node, so
// that equal-energy alternatives are still visited for the tie-break.
constexpr double kBoundSlack = 1e-9;

double ratio(const CandidateExpert& c) {
  return c.score > 0.0 ? c.cost / c.score : std::numeric_limits<double>::infinity();
}

// Evaluates subsets on the caller's candidate order.
class SubsetEvaluator {
 public:
  explicit SubsetEvaluator(std::span<const CandidateExpert> candidates)
      : candidates_(candidates), scores_(candidates.size()), costs_(candidates.size()),
        mask_(candidates.size(), 0) {
    for (std::size_t p = 0; p < candidates.size(); ++p) {
      scores_[p] = candidates[p].score;
      costs_[p] = candidates[p].cost;
    }
  }

  std::vector<std::uint8_t>& mask() { return mask_; }

  double score() const {
    return kernels::active().masked_sum(mask_.data(), scores_.data(), mask_.size());
  }
  double energy() const {
    return kernels::active().masked_sum(mask_.data(), costs_.data(), mask_.size());
  }
  std::vector<std::size_t> ids() const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < mask_.size(); ++p) {
      if (mask_[p] != 0) out.push_back(candidates_[p].index);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  double total_score() const {
    return kernels::active().sum(scores_.data(), scores_.size());
  }
  double total_energy() const {
    return kernels::active().sum(costs_.data(), costs_.size());
  }

 private:
  std::span<const CandidateExpert> candidates_;
  std::vector<double> scores_;
  std::vector<double> costs_;
  std::vector<std::uint8_t> mask_;
};

struct Incumbent {
  double energy;
  std::vector<std::size_t> ids;
};

// Replace `best` when (energy, ids) is strictly better.
bool improves(const std::optional<Incumbent>& best, double energy,
              const std::vector<std::size_t>& ids) {
  if (!best) return true;
  if (energy != best->energy) return energy < best->energy;
  return std::lexicographical_compare(ids.begin(), ids.end(), best->ids.begin(),
                                      best->ids.end());
}

SelectionResult top_d_fallback(std::span<const CandidateExpert> candidates,
                               std::size_t max_experts) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (candidates[a].score != candidates[b].score) {
      return candidates[a].score > candidates[b].score;
    }
    return candidates[a].index < candidates[b].index;
  });
  order.resize(std::min(max_experts, order.size()));
  SubsetEvaluator eval(candidates);
  for (std::size_t p : order) eval.mask()[p] = 1;
  SelectionResult result;
  result.selected = eval.ids();
  result.energy = eval.energy();
  result.feasible = false;
  result.fallback_used = true;
  return result;
}

void check_inputs(std::span<const CandidateExpert> candidates,
                  std::size_t max_experts) {
  if (candidates.empty()) throw DomainError("expert selection needs candidates");
  if (max_experts == 0) throw DomainError("max_experts must be at least 1");
  for (const auto& c : candidates) {
    if (!(c.score >= 0.0)) throw DomainError("candidate scores must be nonnegative");
    if (!(c.cost > 0.0)) throw DomainError("candidate costs must be positive");
  }
}

}  // namespace

std::vector<CandidateExpert> candidate_costs(
    std::size_t source, std::span<const double> scores,
    std::span<const double> link_rates,
    std::span<const std::size_t> link_subcarriers,
    std::span<const ExpertProfile> profiles, const SystemConfig& cfg) {
  const std::size_t k = scores.size();
  if (link_rates.size() != k || profiles.size() != k || source >= k ||
      (!link_subcarriers.empty() && link_subcarriers.size() != k)) {
    throw DomainError("candidate_costs: inconsistent vector lengths");
  }
  std::vector<CandidateExpert> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    double cost = profiles[j].comp_energy_per_token;
    if (j != source) {
      if (!(link_rates[j] > 0.0)) continue;
      const double used =
          link_subcarriers.empty() ? 1.0 : static_cast<double>(link_subcarriers[j]);
      cost += cfg.tx_power * cfg.hidden_state_bits * used / link_rates[j];
    }
    out.push_back({j, scores[j], cost});
  }
  return out;
}

std::vector<CandidateExpert> search_order(std::span<const CandidateExpert> candidates) {
  std::vector<CandidateExpert> ordered(candidates.begin(), candidates.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const CandidateExpert& a, const CandidateExpert& b) {
                     const double ra = ratio(a);
                     const double rb = ratio(b);
                     if (ra != rb) return ra > rb;
                     return a.index < b.index;
                   });
  return ordered;
}

double fractional_bound(const SearchNode& node,
                        std::span<const CandidateExpert> ordered,
                        double threshold) {
  double t = node.remaining_score;
  double e = node.remaining_energy;
  if (t <= threshold) return 0.0;
  std::size_t j = node.next;
  while (j < ordered.size() && t - ordered[j].score >= threshold) {
    t -= ordered[j].score;
    e -= ordered[j].cost;
    ++j;
  }
  if (j < ordered.size()) {
    // Exclude just enough of the critical expert to land on the threshold.
    e -= (t - threshold) * ordered[j].cost / ordered[j].score;
  }
  return e;
}

SelectionResult select_experts_des(std::span<const CandidateExpert> candidates,
                                   double threshold, std::size_t max_experts,
                                   const DesOptions& options) {
  check_inputs(candidates, max_experts);
  if (candidates.size() > kMaxDesCandidates) {
    throw DomainError("DES supports at most 64 candidates");
  }
  const std::size_t n = candidates.size();
  const std::size_t cap = std::min(max_experts, n);
  const std::vector<CandidateExpert> ordered = search_order(candidates);

  // Map search positions back to the caller's order for canonical sums.
  std::vector<std::size_t> input_pos(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t p = 0; p < n; ++p) {
      if (candidates[p].index == ordered[s].index) {
        input_pos[s] = p;
        break;
      }
    }
  }

  SubsetEvaluator eval(candidates);
  const double root_energy = eval.total_energy();
  const double prune_slack = kBoundSlack * root_energy;
  std::optional<Incumbent> best;
  std::size_t expanded = 0;

  std::deque<SearchNode> queue;
  queue.push_back({0, eval.total_score(), root_energy, 0, 0});
  while (!queue.empty()) {
    const SearchNode node = queue.front();
    queue.pop_front();
    ++expanded;
    if (options.node_budget != 0 && expanded > options.node_budget) {
      SelectionResult fallback = top_d_fallback(candidates, cap);
      fallback.nodes_expanded = expanded;
      return fallback;
    }

    // The node's own solution: everything not excluded.
    const std::size_t kept = n - static_cast<std::size_t>(std::popcount(node.excluded));
    if (kept >= 1 && kept <= cap) {
      auto& mask = eval.mask();
      for (std::size_t s = 0; s < n; ++s) {
        mask[input_pos[s]] = (node.excluded >> s & 1U) == 0 ? 1 : 0;
      }
      if (eval.score() >= threshold) {
        const double energy = eval.energy();
        if (!best || energy <= best->energy) {
          std::vector<std::size_t> ids = eval.ids();
          if (improves(best, energy, ids)) best = Incumbent{energy, std::move(ids)};
        }
      }
    }

    if (node.next >= n) continue;
    if (node.remaining_score < threshold - kScoreSlack) continue;
    if (options.use_bound && best &&
        fractional_bound(node, ordered, threshold) > best->energy + prune_slack) {
      continue;
    }

    const CandidateExpert& c = ordered[node.next];
    const std::uint64_t bit = std::uint64_t{1} << node.next;
    SearchNode drop{node.next + 1, node.remaining_score - c.score,
                    node.remaining_energy - c.cost, node.excluded | bit, node.included};
    if (drop.remaining_score >= threshold - kScoreSlack &&
        static_cast<std::size_t>(std::popcount(drop.excluded)) < n) {
      queue.push_back(drop);
    }
    if (static_cast<std::size_t>(std::popcount(node.included)) < cap) {
      queue.push_back({node.next + 1, node.remaining_score, node.remaining_energy,
                       node.excluded, node.included | bit});
    }
  }

  if (!best) {
    SelectionResult fallback = top_d_fallback(candidates, cap);
    fallback.nodes_expanded = expanded;
    return fallback;
  }
  SelectionResult result;
  result.selected = std::move(best->ids);
  result.energy = best->energy;
  result.feasible = true;
  result.nodes_expanded = expanded;
  return result;
}

SelectionResult select_experts_bruteforce(
    std::span<const CandidateExpert> candidates, double threshold,
    std::size_t max_experts) {
  check_inputs(candidates, max_experts);
  const std::size_t n = candidates.size();
  if (n > kMaxBruteForceCandidates) {
    throw SizeGuardError("brute-force selection limited to 25 candidates");
  }
  const std::size_t cap = std::min(max_experts, n);
  SubsetEvaluator eval(candidates);
  std::optional<Incumbent> best;
  for (std::uint64_t subset = 1; subset < (std::uint64_t{1} << n); ++subset) {
    if (static_cast<std::size_t>(std::popcount(subset)) > cap) continue;
    auto& mask = eval.mask();
    for (std::size_t p = 0; p < n; ++p) mask[p] = (subset >> p & 1U) != 0 ? 1 : 0;
    if (!(eval.score() >= threshold)) continue;
    const double energy = eval.energy();
    if (best && energy > best->energy) continue;
    std::vector<std::size_t> ids = eval.ids();
    if (improves(best, energy, ids)) best = Incumbent{energy, std::move(ids)};
  }
  if (!best) return top_d_fallback(candidates, cap);
  SelectionResult result;
  result.selected = std::move(best->ids);
  result.energy = best->energy;
  result.feasible = true;
  return result;
}

SelectionResult select_top_k(std::span<const double> scores, std::size_t k) {
  if (k == 0 || k > scores.size()) {
    throw DomainError("top-k needs 1 <= k <= K");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  SelectionResult result;
  result.selected = std::move(order);
  result.feasible = true;
  return result;
}

double subset_energy(std::span<const CandidateExpert> candidates,
                     std::span<const std::size_t> selected) {
  SubsetEvaluator eval(candidates);
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    eval.mask()[p] = std::find(selected.begin(), selected.end(),
                               candidates[p].index) != selected.end();
  }
  return eval.energy();
}

double subset_score(std::span<const CandidateExpert> candidates,
                    std::span<const std::size_t> selected) {
  SubsetEvaluator eval(candidates);
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    eval.mask()[p] = std::find(selected.begin(), selected.end(),
                               candidates[p].index) != selected.end();
  }
  return eval.score();
}

}  // namespace dmoe
