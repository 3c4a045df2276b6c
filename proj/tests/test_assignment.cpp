#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "dmoe/assignment.hpp"
#include "dmoe/error.hpp"
#include "oracles.hpp"

namespace {

using namespace dmoe;

AssignmentProblem problem(std::size_t links, std::size_t m, std::vector<double> w) {
  AssignmentProblem p;
  p.num_subcarriers = m;
  for (std::size_t l = 0; l < links; ++l) p.links.push_back({l, l + 1});
  p.weights = std::move(w);
  return p;
}

AssignmentProblem random_problem(std::mt19937_64& rng, std::size_t links, std::size_t m) {
  std::vector<double> w;
  for (std::size_t l = 0; l < links; ++l) {
    const double s = 65536.0 * static_cast<double>(1 + rng() % 4);
    for (std::size_t c = 0; c < m; ++c) w.push_back(1e-2 * s / oracle::log_uniform(rng, 1e4, 1e7));
  }
  return problem(links, m, std::move(w));
}

TEST(BuildAssignment, Examples) {
  SystemConfig cfg;
  cfg.num_experts = 2;
  cfg.num_subcarriers = 2;
  Array3<double> gains(2, 2, 2, 0.0);
  ChannelRealization ch = channel_from_gains(gains, cfg);
  ch.rates(0, 1, 0) = 1e6;
  ch.rates(0, 1, 1) = 2e6;
  ch.rates(1, 0, 0) = 0.0;
  ch.rates(1, 0, 1) = 1e6;

  TrafficMatrix none{2, {0, 0, 0, 0}};
  const auto empty = build_assignment(none, ch, cfg);
  EXPECT_EQ(empty.num_links(), 0u);
  EXPECT_EQ(solve_assignment(empty).cost, 0.0);

  TrafficMatrix one{2, {0, 1, 0, 0}};
  const auto p = build_assignment(one, ch, cfg);
  ASSERT_EQ(p.num_links(), 1u);
  EXPECT_EQ(p.links[0], (Link{0, 1}));
  EXPECT_DOUBLE_EQ(p.weights[0], 6.5536e-4);
  EXPECT_DOUBLE_EQ(p.weights[1], 3.2768e-4);

  TrafficMatrix back{2, {0, 0, 1, 0}};
  const auto q = build_assignment(back, ch, cfg);
  EXPECT_EQ(q.weights[0], std::numeric_limits<double>::infinity());

  cfg.num_subcarriers = 1;
  Array3<double> g1(2, 2, 1, 0.01);
  TrafficMatrix both{2, {0, 1, 1, 0}};
  EXPECT_THROW(build_assignment(both, channel_from_gains(g1, cfg), cfg), CapacityError);
}

TEST(SolveAssignment, Examples) {
  auto r = solve_assignment(problem(1, 1, {2.0}));
  EXPECT_EQ(r.subcarrier, (std::vector<std::size_t>{0}));

  r = solve_assignment(problem(2, 3, {6.5536e-4, 3.2768e-4, 1.6384e-4,
                                      3.2768e-4, 1.31072e-3, 6.5536e-4}));
  EXPECT_EQ(r.subcarrier, (std::vector<std::size_t>{2, 0}));
  EXPECT_DOUBLE_EQ(r.cost, 4.9152e-4);

  r = solve_assignment(problem(3, 4, {1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4}));
  EXPECT_EQ(r.subcarrier, (std::vector<std::size_t>{0, 1, 2}));

  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_assignment(problem(2, 2, {1.0, inf, 2.0, inf})), InfeasibleAssignmentError);
}

TEST(BruteForceAssignment, ExamplesAndGuard) {
  EXPECT_EQ(solve_assignment_bruteforce(problem(0, 3, {})).cost, 0.0);
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const auto p = random_problem(rng, 3, 3);
    const auto ref = oracle::enumerate_matching(p.weights, 3, 3);
    const auto r = solve_assignment_bruteforce(p);
    EXPECT_EQ(r.subcarrier, ref.column);
    EXPECT_EQ(r.cost, ref.cost);
  }
  EXPECT_THROW(solve_assignment_bruteforce(random_problem(rng, 8, 8)), SizeGuardError);
  EXPECT_THROW(solve_assignment_bruteforce(random_problem(rng, 2, 9)), SizeGuardError);
}

TEST(SolveAssignment, MatchesEnumerationOracle) {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t m = 1 + rng() % 8;
    const std::size_t links = 1 + rng() % std::min<std::size_t>(m, 6);
    const auto p = random_problem(rng, links, m);
    const auto ref = oracle::enumerate_matching(p.weights, links, m);
    const auto r = solve_assignment(p);
    ASSERT_EQ(r.cost, ref.cost) << rep;
    EXPECT_EQ(r.subcarrier, ref.column) << rep;
    EXPECT_EQ(r, solve_assignment_bruteforce(p)) << rep;
    std::vector<bool> used(m, false);
    for (std::size_t c : r.subcarrier) {
      EXPECT_FALSE(used[c]);
      used[c] = true;
    }
  }
}

TEST(SolveAssignment, TiesResolvedLexicographically) {
  std::mt19937_64 rng(88);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t m = 2 + rng() % 6;
    const std::size_t links = 1 + rng() % std::min<std::size_t>(m, 5);
    std::vector<double> w(links * m);
    for (double& x : w) x = static_cast<double>(1 + rng() % 3);  // heavy ties
    const auto p = problem(links, m, w);
    const auto ref = oracle::enumerate_matching(w, links, m);
    EXPECT_EQ(solve_assignment(p).subcarrier, ref.column) << rep;
  }
}

TEST(SolveAssignment, SingleLinkPicksFastestSubcarrier) {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 1 + rng() % 16;
    std::vector<double> rates(m);
    for (double& r : rates) r = oracle::log_uniform(rng, 1e4, 1e7);
    std::vector<double> w(m);
    for (std::size_t c = 0; c < m; ++c) w[c] = 1e-2 * 65536.0 / rates[c];
    const auto best = std::max_element(rates.begin(), rates.end()) - rates.begin();
    EXPECT_EQ(solve_assignment(problem(1, m, w)).subcarrier[0], static_cast<std::size_t>(best));
  }
}

TEST(SolveAssignment, FasterLinkNeverCostsMore) {
  std::mt19937_64 rng(111);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 3 + rng() % 6;
    const std::size_t links = 1 + rng() % std::min<std::size_t>(m, 5);
    auto p = random_problem(rng, links, m);
    const double before = solve_assignment(p).cost;
    const std::size_t l = rng() % links;
    // scaling a link's rates up by 1.5 scales its weights down
    for (std::size_t c = 0; c < m; ++c) p.weights[l * m + c] /= 1.5;
    EXPECT_LE(solve_assignment(p).cost, before);
  }
}

TEST(SolveAssignment, LargeInstanceAgainstPotentialsCheck) {
  // Larger than enumeration allows: compare with an O(n!) free check that the
  // result cannot be improved by any single swap or move.
  std::mt19937_64 rng(121);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t links = 30, m = 64;
    const auto p = random_problem(rng, links, m);
    const auto r = solve_assignment(p);
    std::vector<int> owner(m, -1);
    for (std::size_t l = 0; l < links; ++l) owner[r.subcarrier[l]] = static_cast<int>(l);
    for (std::size_t l = 0; l < links; ++l) {
      const double cur = p.weights[l * m + r.subcarrier[l]];
      for (std::size_t c = 0; c < m; ++c) {
        if (owner[c] < 0) {
          EXPECT_LE(cur, p.weights[l * m + c] * (1 + 1e-12));
        } else {
          const std::size_t o = static_cast<std::size_t>(owner[c]);
          const double swapped = p.weights[l * m + c] + p.weights[o * m + r.subcarrier[l]];
          EXPECT_LE(cur + p.weights[o * m + c], swapped * (1 + 1e-12));
        }
      }
    }
  }
}

}  // namespace
