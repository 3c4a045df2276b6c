#include "dmoe/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dmoe/error.hpp"
#include "dmoe/kernels.hpp"

namespace dmoe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-12;

struct Matching {
  std::vector<std::size_t> column;  // per row
  std::vector<double> row_potential;
  std::vector<double> col_potential;
  bool feasible = false;
};

// Shortest augmenting paths with potentials (rows <= cols). Column 0 of the
// internal arrays is a virtual source; real columns are 1..cols.
Matching hungarian(std::span<const double> w, std::size_t rows, std::size_t cols) {
  const auto& kt = kernels::active();
  Matching out;
  std::vector<double> u(rows + 1, 0.0);
  std::vector<double> v(cols + 1, 0.0);
  std::vector<std::size_t> owner(cols + 1, 0);  // row (1-based) holding column
  std::vector<std::int64_t> way(cols + 1, 0);
  std::vector<double> minv(cols + 1);
  std::vector<std::uint8_t> used(cols + 1);
  std::vector<std::size_t> used_cols;

  for (std::size_t r = 1; r <= rows; ++r) {
    owner[0] = r;
    std::size_t col0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    used_cols.clear();
    do {
      used[col0] = 1;
      used_cols.push_back(col0);
      const std::size_t row = owner[col0];
      const kernels::RelaxOutcome step = kt.hungarian_relax(
          w.data() + (row - 1) * cols, u[row], v.data() + 1, minv.data() + 1,
          way.data() + 1, used.data() + 1, static_cast<std::int64_t>(col0), cols);
      if (step.column >= cols || !std::isfinite(step.delta)) return out;
      const double delta = step.delta;
      for (std::size_t c : used_cols) u[owner[c]] += delta;
      v[0] -= delta;
      kt.hungarian_shift(v.data() + 1, minv.data() + 1, used.data() + 1, delta, cols);
      col0 = step.column + 1;
    } while (owner[col0] != 0);
    do {
      const auto prev = static_cast<std::size_t>(way[col0]);
      owner[col0] = owner[prev];
      col0 = prev;
    } while (col0 != 0);
  }

  out.column.assign(rows, 0);
  for (std::size_t c = 1; c <= cols; ++c) {
    if (owner[c] != 0) out.column[owner[c] - 1] = c - 1;
  }
  out.row_potential.assign(u.begin() + 1, u.end());
  out.col_potential.assign(v.begin() + 1, v.end());
  out.feasible = true;
  return out;
}

double cost_of(std::span<const double> w, std::size_t cols,
               std::span<const std::size_t> column) {
  double total = 0.0;
  for (std::size_t r = 0; r < column.size(); ++r) total += w[r * cols + column[r]];
  return total;
}

void check_shape(const AssignmentProblem& problem) {
  if (problem.weights.size() != problem.num_links() * problem.num_subcarriers) {
    throw DomainError("assignment weights must be links x M");
  }
  if (problem.num_links() > problem.num_subcarriers) {
    throw CapacityError("more active links than subcarriers");
  }
}

}  // namespace

std::vector<std::size_t> min_cost_matching(std::span<const double> weights,
                                           std::size_t rows, std::size_t cols) {
  Matching m = hungarian(weights, rows, cols);
  if (!m.feasible) return {};
  return m.column;
}

double assignment_cost(const AssignmentProblem& problem,
                       std::span<const std::size_t> subcarrier) {
  return cost_of(problem.weights, problem.num_subcarriers, subcarrier);
}

AssignmentProblem build_assignment(const TrafficMatrix& traffic,
                                   const ChannelRealization& channel,
                                   const SystemConfig& cfg) {
  const std::size_t k = cfg.num_experts;
  const std::size_t m = cfg.num_subcarriers;
  AssignmentProblem problem;
  problem.num_subcarriers = m;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j && traffic.count(i, j) > 0) problem.links.push_back({i, j});
    }
  }
  if (problem.links.size() > m) {
    throw CapacityError("active links (" + std::to_string(problem.links.size()) +
                        ") exceed subcarriers (" + std::to_string(m) + ")");
  }
  problem.weights.resize(problem.links.size() * m);
  const auto& kt = kernels::active();
  for (std::size_t l = 0; l < problem.links.size(); ++l) {
    const Link link = problem.links[l];
    const double numerator = cfg.tx_power * traffic.bits(link.source, link.target, cfg);
    kt.reciprocal_scale(numerator, channel.rates.row(link.source, link.target).data(),
                        problem.weights.data() + l * m, m);
  }
  return problem;
}

AssignmentResult solve_assignment(const AssignmentProblem& problem) {
  check_shape(problem);
  const std::size_t rows = problem.num_links();
  const std::size_t cols = problem.num_subcarriers;
  if (rows == 0) return {};
  const std::span<const double> w = problem.weights;

  Matching base = hungarian(w, rows, cols);
  if (!base.feasible) {
    throw InfeasibleAssignmentError("no finite-cost link/subcarrier matching");
  }
  std::vector<std::size_t> match = base.column;
  const double optimum = cost_of(w, cols, match);
  const double tie = kTieTolerance * std::abs(optimum);

  // Walk rows in order and move each to the smallest column that still admits
  // a completion within `tie` of the optimum. Any such column must be tight
  // under the optimal duals, which filters almost every candidate.
  std::vector<std::uint8_t> taken(cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < match[r]; ++c) {
      if (taken[c] != 0 || !std::isfinite(w[r * cols + c])) continue;
      const double reduced = w[r * cols + c] - base.row_potential[r] - base.col_potential[c];
      const double scale = std::abs(w[r * cols + c]) + std::abs(base.row_potential[r]) +
                           std::abs(base.col_potential[c]);
      if (reduced > tie + 1e-9 * scale) continue;

      // Residual problem: rows after r, columns not yet taken and != c.
      std::vector<std::size_t> free_cols;
      for (std::size_t q = 0; q < cols; ++q) {
        if (taken[q] == 0 && q != c) free_cols.push_back(q);
      }
      const std::size_t rest = rows - r - 1;
      std::vector<std::size_t> candidate(match.begin(), match.end());
      candidate[r] = c;
      if (rest > 0) {
        std::vector<double> sub(rest * free_cols.size());
        for (std::size_t a = 0; a < rest; ++a) {
          for (std::size_t b = 0; b < free_cols.size(); ++b) {
            sub[a * free_cols.size() + b] = w[(r + 1 + a) * cols + free_cols[b]];
          }
        }
        Matching tail = hungarian(sub, rest, free_cols.size());
        if (!tail.feasible) continue;
        for (std::size_t a = 0; a < rest; ++a) {
          candidate[r + 1 + a] = free_cols[tail.column[a]];
        }
      }
      if (cost_of(w, cols, candidate) <= optimum + tie) {
        match = std::move(candidate);
        break;
      }
    }
    taken[match[r]] = 1;
  }

  AssignmentResult result;
  result.subcarrier = std::move(match);
  result.cost = cost_of(w, cols, result.subcarrier);
  return result;
}

AssignmentResult solve_assignment_bruteforce(const AssignmentProblem& problem) {
  check_shape(problem);
  const std::size_t rows = problem.num_links();
  const std::size_t cols = problem.num_subcarriers;
  if (rows > kMaxBruteForceLinks || cols > kMaxBruteForceSubcarriers) {
    throw SizeGuardError("brute-force assignment limited to 7 links x 8 subcarriers");
  }
  if (rows == 0) return {};
  const std::span<const double> w = problem.weights;

  // Pass 1: the minimum. Pass 2: the first map in lexicographic order whose
  // cost is within the tie tolerance of it.
  std::vector<std::size_t> current(rows);
  std::vector<std::uint8_t> taken(cols, 0);
  double best = kInf;
  std::vector<std::size_t> chosen;
  bool searching_for_tie = false;
  double limit = kInf;

  auto visit = [&](auto&& self, std::size_t r) -> bool {
    if (r == rows) {
      const double cost = cost_of(w, cols, current);
      if (!searching_for_tie) {
        best = std::min(best, cost);
        return false;
      }
      if (cost <= limit) {
        chosen = current;
        return true;
      }
      return false;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (taken[c] != 0) continue;
      taken[c] = 1;
      current[r] = c;
      const bool done = self(self, r + 1);
      taken[c] = 0;
      if (done) return true;
    }
    return false;
  };
  visit(visit, 0);
  if (!std::isfinite(best)) {
    throw InfeasibleAssignmentError("no finite-cost link/subcarrier matching");
  }
  searching_for_tie = true;
  limit = best + kTieTolerance * std::abs(best);
  visit(visit, 0);

  AssignmentResult result;
  result.subcarrier = std::move(chosen);
  result.cost = cost_of(w, cols, result.subcarrier);
  return result;
}

}  // namespace dmoe
