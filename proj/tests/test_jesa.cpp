#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dmoe/error.hpp"
#include "dmoe/jesa.hpp"
#include "dmoe/oracle.hpp"
#include "joint_oracle.hpp"
#include "oracles.hpp"

namespace {

using namespace dmoe;

Scenario random_scenario(std::uint64_t seed, std::size_t k, std::size_t m, std::size_t tokens,
                         double gamma0 = 0.9, std::size_t d = 2) {
  Scenario s;
  s.cfg.num_experts = k;
  s.cfg.num_subcarriers = m;
  s.cfg.num_layers = 4;
  s.profiles = default_profiles(k);
  s.tokens_per_expert.assign(k, tokens);
  s.channel = sample_channel(seed, s.cfg);
  s.gating = synth_gating({0.5, 4.0, seed}, s.cfg, s.tokens_per_expert);
  s.policy = {1.0, gamma0, std::min(d, k), QosMode::kGeometric};
  s.layer = 1 + seed % 4;
  s.seed = seed;
  return s;
}

TEST(RandomInit, OneDistinctSubcarrierPerLink) {
  Rng rng = make_rng({5});
  for (int rep = 0; rep < 200; ++rep) {
    const auto b = random_init_assignment(rng, 20, 4);
    EXPECT_TRUE(b.is_exclusive());
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(b.count(i, j), i == j ? 0u : 1u);
    }
  }
  EXPECT_THROW(random_init_assignment(rng, 11, 4), CapacityError);
  Rng a = make_rng({9}), b = make_rng({9});
  EXPECT_EQ(random_init_assignment(a, 30, 5), random_init_assignment(b, 30, 5));
}

TEST(RandomInit, TwoLinksTwoSubcarriersEquallyLikely) {
  Rng rng = make_rng({17});
  int first = 0;
  const int n = 20000;
  for (int rep = 0; rep < n; ++rep) first += random_init_assignment(rng, 2, 2).get(0, 1, 0);
  // binomial(20000, 0.5): 4 sigma ~ 283
  EXPECT_NEAR(first, n / 2, 283);
}

TEST(EqualBandwidth, RoundRobin) {
  const auto b = equal_bandwidth_assignment(3, 14);  // 6 links, 2 each, 2 idle
  EXPECT_TRUE(b.is_exclusive());
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(b.count(i, j), i == j ? 0u : 2u);
  }
  EXPECT_TRUE(b.get(0, 1, 0));
  EXPECT_TRUE(b.get(0, 1, 6));
  EXPECT_TRUE(b.get(2, 1, 5));
  EXPECT_THROW(equal_bandwidth_assignment(3, 5), CapacityError);
}

TEST(Theorem1Bound, Values) {
  EXPECT_GT(theorem1_bound(4, 2048), 0.968);
  EXPECT_LT(theorem1_bound(4, 2048), 0.969);
  EXPECT_DOUBLE_EQ(theorem1_bound(2, 2), 0.5);
  EXPECT_NEAR(theorem1_bound(3, 12), 665280.0 / 2985984.0, 1e-15);
  EXPECT_EQ(theorem1_bound(3, 5), 0.0);
}

TEST(Jesa, LocalOnlyWhenLocalExpertSuffices) {
  Scenario s = random_scenario(3, 3, 8, 2);
  s.policy = {0.0, 1.0, 1, QosMode::kHomogeneous};
  // the local expert is the cheapest candidate for every source
  for (auto& p : s.profiles) p.comp_energy_per_token = 1e-3;
  const auto r = jesa_bcd(s);
  EXPECT_TRUE(r.trace.converged);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t n = 0; n < 2; ++n) {
      const auto row = r.alpha.row(i, n);
      for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(row[j], j == i ? 1 : 0);
    }
  }
  EXPECT_DOUBLE_EQ(r.objective, 6 * 1e-3);
  EXPECT_LE(r.trace.iterations.size(), 2u);
}

TEST(Jesa, DistinctBestSubcarriersGiveGlobalOptimum) {
  int hits = 0;
  for (std::uint64_t seed = 0; hits < 50 && seed < 5000; ++seed) {
    Scenario s = random_scenario(seed, 2, 3, 1);
    // event A: the two links' best subcarriers differ
    const auto r01 = s.channel.rates.row(0, 1);
    const auto r10 = s.channel.rates.row(1, 0);
    if (std::max_element(r01.begin(), r01.end()) - r01.begin() ==
        std::max_element(r10.begin(), r10.end()) - r10.begin()) {
      continue;
    }
    ++hits;
    const auto r = jesa_bcd(s);
    EXPECT_TRUE(r.trace.converged);
    EXPECT_LE(r.trace.iterations.size(), 3u);
    EXPECT_TRUE(oracle::close_rel(r.objective, oracle::joint_reference(s), 1e-12)) << seed;
  }
  EXPECT_EQ(hits, 50);
}

TEST(Jesa, NeverBelowJointOptimum) {
  std::size_t matches = 0, total = 0;
  double bound_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t k = 2 + seed % 2;
    const std::size_t m = 6 + seed % 3;
    const Scenario s = random_scenario(seed, k, m, 1 + (seed / 2) % 2);
    const double got = jesa_bcd(s).objective;
    const double ref = oracle::joint_reference(s);
    EXPECT_GE(got, ref * (1.0 - 1e-12)) << seed;
    EXPECT_TRUE(oracle::close_rel(joint_optimum(s).energy, ref, 1e-12)) << seed;
    matches += oracle::close_rel(got, ref, 1e-12);
    bound_sum += theorem1_bound(k, m);
    ++total;
  }
  EXPECT_GE(static_cast<double>(matches), bound_sum);
}

TEST(Jesa, TraceMonotoneAndFixedPointIsBlockOptimal) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t k = 2 + seed % 3;
    const std::size_t m = k * (k - 1) + seed % 12;
    Scenario s = random_scenario(seed, k, m, 1 + seed % 4);
    JesaOptions opt;
    opt.check_invariants = true;
    const auto r = jesa_bcd(s, opt);
    ASSERT_TRUE(r.trace.converged);
    const auto f = r.trace.objectives();
    for (std::size_t q = 1; q < f.size(); ++q) EXPECT_LE(f[q], f[q - 1] + 1e-12) << seed;
    const auto again =
        select_experts_given(s, r.beta, s.threshold(), s.policy.max_experts);
    EXPECT_EQ(again.alpha, r.alpha);
    EXPECT_EQ(allocate_subcarriers(s, r.alpha, true), r.beta);
  }
}

TEST(Schemes, LabelsRoundTrip) {
  for (const SchemeKind& s : {SchemeKind{TopK{2}}, SchemeKind{Homogeneous{0.5, 2}},
                              SchemeKind{Jesa{0.9, 2}}, SchemeKind{LowerBound{0.95, 3}},
                              SchemeKind{Jesa{0.123456789, 4}}}) {
    const auto parsed = parse_scheme(scheme_label(s));
    ASSERT_TRUE(parsed);
    EXPECT_EQ(*parsed, s);
  }
  EXPECT_EQ(scheme_label(TopK{2}), "top-2");
  EXPECT_EQ(scheme_label(Jesa{0.9, 2}), "jesa(0.9,2)");
  EXPECT_EQ(scheme_label(Homogeneous{0.5, 2}), "h(0.5,2)");
  EXPECT_FALSE(parse_scheme("jesa(0.9)"));
  EXPECT_FALSE(parse_scheme("top-2x"));
  EXPECT_THROW(validate_scheme(TopK{9}, 8), DomainError);
  EXPECT_THROW(validate_scheme(Jesa{1.5, 2}, 8), DomainError);
}

TEST(Schemes, LowerBoundBelowJesaBelowTopD) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Scenario s = random_scenario(seed, 4, 16, 3);
    const double lb = run_scheme(s, LowerBound{0.9, 2}).report.total;
    const double jesa = run_scheme(s, Jesa{0.9, 2}).report.total;
    const double top = run_scheme(s, TopK{2}).report.total;
    const double jesa_one = run_scheme(s, Jesa{1.0, 2}).report.total;
    EXPECT_LE(lb, jesa * (1 + 1e-12)) << seed;
    EXPECT_LE(jesa_one, top * (1 + 1e-12)) << seed;
  }
}

TEST(Schemes, GammaOneReproducesTopD) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scenario s = random_scenario(seed, 5, 24, 3);
    const auto jesa = run_scheme(s, Jesa{1.0, 2});
    const auto top = run_scheme(s, TopK{2});
    EXPECT_EQ(jesa.alpha, top.alpha);
    EXPECT_EQ(jesa.fallback_tokens, 15u);
  }
}

TEST(Schemes, HomogeneousEqualsJesaWithUnitGamma) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Scenario s = random_scenario(seed, 4, 16, 2);
    const auto h = run_scheme(s, Homogeneous{0.5, 2});
    Scenario t = s;
    t.policy = {0.5, 1.0, 2, QosMode::kGeometric};
    const auto j = jesa_bcd(t);
    EXPECT_EQ(h.alpha, j.alpha);
    EXPECT_EQ(h.beta, j.beta);
  }
}

TEST(SimulateQuery, OneLayerIsRunSchemePlusBackward) {
  QueryScenario q;
  q.cfg.num_experts = 3;
  q.cfg.num_subcarriers = 8;
  q.cfg.num_layers = 1;
  q.profiles = default_profiles(3);
  q.tokens_per_expert = {2, 2, 2};
  q.gating = synth_gating({0.5, 4.0, 4}, q.cfg, q.tokens_per_expert);
  q.seed = 4;
  const auto layers = simulate_query(q, Jesa{0.9, 2});
  ASSERT_EQ(layers.size(), 1u);
  const Scenario s = q.layer_scenario(1);
  const auto direct = run_scheme(s, Jesa{0.9, 2});
  EXPECT_EQ(layers[0].forward.total, direct.report.total);
  EXPECT_EQ(layers[0].backward_comm, backward_comm_energy(s, direct.alpha, direct.beta));
  EXPECT_NEAR(layers[0].threshold, 0.9, 1e-15);
}

TEST(SimulateQuery, AllLocalHasNoCommunication) {
  QueryScenario q;
  q.cfg.num_experts = 3;
  q.cfg.num_subcarriers = 8;
  q.cfg.num_layers = 3;
  q.profiles = default_profiles(3);
  q.tokens_per_expert = {1, 2, 1};
  q.gating = GatingTensor(3, 3, q.tokens_per_expert);
  for (std::size_t l = 1; l <= 3; ++l) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t n = 0; n < q.tokens_per_expert[i]; ++n) q.gating.scores(l, i, n)[i] = 1.0;
    }
  }
  for (const auto& lr : simulate_query(q, Jesa{0.9, 1})) {
    EXPECT_EQ(lr.forward.comm_total, 0.0);
    EXPECT_EQ(lr.backward_comm, 0.0);
  }
}

TEST(SimulateQuery, FixedChannelAndLayerResampling) {
  QueryScenario q;
  q.cfg.num_experts = 3;
  q.cfg.num_subcarriers = 8;
  q.cfg.num_layers = 2;
  q.profiles = default_profiles(3);
  q.tokens_per_expert = {1, 1, 1};
  q.gating = synth_gating({0.5, 4.0, 1}, q.cfg, q.tokens_per_expert);
  q.seed = 1;
  EXPECT_NE(q.layer_scenario(1).channel.gains, q.layer_scenario(2).channel.gains);
  q.fixed_channel = sample_channel(99, q.cfg);
  EXPECT_EQ(q.layer_scenario(1).channel.gains, q.layer_scenario(2).channel.gains);
  q.cfg.num_layers = 3;
  EXPECT_THROW(simulate_query(q, TopK{1}), DomainError);
}

}  // namespace
