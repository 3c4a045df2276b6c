#include "dmoe/oracle.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "dmoe/error.hpp"

namespace dmoe {

namespace {

using Counts = std::vector<std::uint64_t>;  // tokens sent from one source to each j

// Feasible expert sets for one token, as bitmasks over expert ids. Plain
// left-to-right sums; ties at the threshold are decided by the same canonical
// score the solver uses.
std::vector<unsigned> token_options(std::span<const double> g, double threshold,
                                    std::size_t max_experts) {
  const std::size_t k = g.size();
  std::vector<unsigned> out;
  std::vector<std::uint8_t> mask(k);
  for (unsigned s = 1; s < (1u << k); ++s) {
    if (static_cast<std::size_t>(__builtin_popcount(s)) > max_experts) continue;
    for (std::size_t j = 0; j < k; ++j) mask[j] = (s >> j) & 1u;
    if (qos_satisfied(g, mask, threshold)) out.push_back(s);
  }
  if (out.empty()) {
    // Top-D by score, ties to the smaller id.
    std::vector<std::size_t> ids(k);
    for (std::size_t j = 0; j < k; ++j) ids[j] = j;
    std::stable_sort(ids.begin(), ids.end(),
                     [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
    unsigned s = 0;
    for (std::size_t r = 0; r < std::min(max_experts, k); ++r) s |= 1u << ids[r];
    out.push_back(s);
  }
  return out;
}

// Min-cost injective map of links to subcarriers by depth-first search.
class MatchingSearch {
 public:
  MatchingSearch(const std::vector<std::vector<double>>& cost, std::size_t m)
      : cost_(cost), used_(m, 0) {
    suffix_min_.assign(cost.size() + 1, 0.0);
    for (std::size_t l = cost.size(); l-- > 0;) {
      suffix_min_[l] = suffix_min_[l + 1] + *std::min_element(cost[l].begin(), cost[l].end());
    }
  }

  double solve() {
    best_ = std::numeric_limits<double>::infinity();
    dfs(0, 0.0);
    return best_;
  }

 private:
  void dfs(std::size_t l, double acc) {
    if (acc + suffix_min_[l] >= best_) return;
    if (l == cost_.size()) {
      best_ = acc;
      return;
    }
    for (std::size_t c = 0; c < used_.size(); ++c) {
      if (used_[c] != 0) continue;
      used_[c] = 1;
      dfs(l + 1, acc + cost_[l][c]);
      used_[c] = 0;
    }
  }

  const std::vector<std::vector<double>>& cost_;
  std::vector<std::uint8_t> used_;
  std::vector<double> suffix_min_;
  double best_ = 0.0;
};

}  // namespace

JointOptimum joint_optimum(const Scenario& scenario) {
  scenario.validate();
  const SystemConfig& cfg = scenario.cfg;
  const std::size_t k = cfg.num_experts;
  const std::size_t m = cfg.num_subcarriers;
  if (k > kOracleMaxExperts || m > kOracleMaxSubcarriers) {
    throw SizeGuardError("joint oracle limited to K <= 3 and M <= 12");
  }
  for (std::size_t n : scenario.tokens_per_expert) {
    if (n > kOracleMaxTokens) throw SizeGuardError("joint oracle limited to 2 tokens per source");
  }
  const double threshold = scenario.threshold();
  const std::size_t d = scenario.policy.max_experts;

  // Per source: the distinct outbound count vectors reachable by the token
  // choices (energy depends on alpha only through these counts).
  std::vector<std::vector<Counts>> per_source(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::set<Counts> seen{Counts(k, 0)};
    for (std::size_t n = 0; n < scenario.tokens_per_expert[i]; ++n) {
      const auto options =
          token_options(scenario.gating.scores(scenario.layer, i, n), threshold, d);
      std::set<Counts> next;
      for (const Counts& base : seen) {
        for (unsigned s : options) {
          Counts c = base;
          for (std::size_t j = 0; j < k; ++j) c[j] += (s >> j) & 1u;
          next.insert(std::move(c));
        }
      }
      seen = std::move(next);
    }
    per_source[i].assign(seen.begin(), seen.end());
  }

  JointOptimum best;
  best.energy = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(k, 0);
  while (true) {
    Counts traffic(k * k, 0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) traffic[i * k + j] = per_source[i][pick[i]][j];
    }
    double comp = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      std::uint64_t inbound = 0;
      for (std::size_t i = 0; i < k; ++i) inbound += traffic[i * k + j];
      comp += comp_energy(scenario.profiles[j], inbound);
    }
    std::vector<std::vector<double>> cost;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j || traffic[i * k + j] == 0) continue;
        const double bits = cfg.hidden_state_bits * static_cast<double>(traffic[i * k + j]);
        std::vector<double> row(m);
        const auto rates = scenario.channel.rates.row(i, j);
        for (std::size_t c = 0; c < m; ++c) {
          row[c] = rates[c] > 0.0 ? bits * cfg.tx_power / rates[c]
                                  : std::numeric_limits<double>::infinity();
        }
        cost.push_back(std::move(row));
      }
    }
    if (cost.size() <= m) {
      const double comm = MatchingSearch(cost, m).solve();
      const double total = comm + comp;
      if (total < best.energy) {
        best.energy = total;
        best.traffic = traffic;
      }
    }
    std::size_t i = 0;
    while (i < k && ++pick[i] == per_source[i].size()) pick[i++] = 0;
    if (i == k) break;
  }
  if (best.traffic.empty()) throw InfeasibleAssignmentError("joint oracle: no feasible allocation");
  return best;
}

}  // namespace dmoe
