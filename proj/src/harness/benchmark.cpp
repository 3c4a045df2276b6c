#include <cmath>
#include <numeric>

#include "dmoe/error.hpp"
#include "dmoe/harness.hpp"
#include "dmoe/oracle.hpp"

namespace dmoe {

namespace {

bool same_energy(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

QueryScenario query_for_seed(const ScenarioSpec& spec, std::uint64_t seed) {
  QueryScenario q;
  q.cfg = spec.system;
  q.profiles = spec.experts;
  q.tokens_per_expert = spec.tokens_per_expert;
  q.seed = seed;
  if (spec.injected_gating) {
    q.gating = *spec.injected_gating;
  } else {
    GatingSynthSpec g = spec.gating;
    g.rng_seed = spec.gating.rng_seed * 0x9e3779b97f4a7c15ULL + seed;
    q.gating = synth_gating(g, spec.system, spec.tokens_per_expert);
  }
  if (spec.channel_gains) {
    q.fixed_channel = channel_from_gains(*spec.channel_gains, spec.system, seed);
  }
  return q;
}

RunReport run_benchmark(const ScenarioSpec& spec) {
  validate_spec(spec);
  RunReport report;
  report.spec = spec;
  JesaOptions options;
  options.max_iterations = spec.max_iterations;
  for (const SchemeKind& scheme : spec.schemes) {
    const std::string label = scheme_label(scheme);
    for (std::uint64_t seed : spec.seeds) {
      try {
        const QueryScenario query = query_for_seed(spec, seed);
        const auto layers = simulate_query(query, scheme, options);
        std::vector<RunRow> rows;
        for (const LayerReport& lr : layers) {
          RunRow row;
          row.scheme = label;
          row.seed = seed;
          row.layer = lr.layer;
          row.comm_j = lr.forward.comm_total;
          row.comp_j = lr.forward.comp_total;
          row.total_j = lr.forward.total;
          const auto tokens = static_cast<double>(lr.total_tokens);
          row.per_token_j = lr.forward.total / tokens;
          row.bcd_iters = lr.bcd_iterations;
          row.fallback_rate = static_cast<double>(lr.fallback_tokens) / tokens;
          row.backward_comm_j = lr.backward_comm;
          row.qos_score_mean = lr.qos_score_mean;
          row.converged = lr.converged;
          if (spec.oracle) {
            Scenario s = query.layer_scenario(lr.layer);
            s.policy = scheme_policy(scheme, s.policy);
            row.oracle_match = same_energy(joint_optimum(s).energy, row.total_j);
          }
          rows.push_back(std::move(row));
        }
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
      } catch (const Error& e) {
        report.errors.push_back({label, seed, e.what()});
      }
    }
  }
  return report;
}

ScenarioSpec sweep_spec(const ScenarioSpec& spec, SweepAxis axis) {
  ScenarioSpec out = spec;
  out.schemes.clear();
  if (axis == SweepAxis::kGamma0) {
    for (double g : spec.sweep.gamma0) out.schemes.push_back(Jesa{g, spec.policy.max_experts});
  } else {
    for (std::size_t k : spec.sweep.k) out.schemes.push_back(TopK{k});
  }
  return out;
}

Theorem1Estimate montecarlo_theorem1(const ScenarioSpec& spec, std::size_t trials) {
  if (trials == 0) throw DomainError("montecarlo_theorem1 needs at least one trial");
  validate_spec(spec);
  const SystemConfig& base = spec.system;
  if (base.num_experts > kOracleMaxExperts || base.num_subcarriers > kOracleMaxSubcarriers) {
    throw SizeGuardError("Theorem 1 Monte-Carlo limited to K <= 3 and M <= 12");
  }
  for (std::size_t n : spec.tokens_per_expert) {
    if (n != 1) throw SizeGuardError("Theorem 1 Monte-Carlo needs one token per expert");
  }
  SystemConfig cfg = base;
  cfg.num_layers = 1;
  const std::uint64_t master = spec.seeds.empty() ? 0 : spec.seeds.front();

  Theorem1Estimate est;
  est.trials = trials;
  est.bound = theorem1_bound(cfg.num_experts, cfg.num_subcarriers);
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = master * 0x9e3779b97f4a7c15ULL + t;
    Scenario s;
    s.cfg = cfg;
    s.profiles = spec.experts;
    s.channel = sample_channel(trial_seed, cfg);
    GatingSynthSpec g = spec.gating;
    g.rng_seed = trial_seed;
    s.gating = synth_gating(g, cfg, spec.tokens_per_expert);
    s.policy = spec.policy;
    s.tokens_per_expert = spec.tokens_per_expert;
    s.layer = 1;
    s.seed = trial_seed;
    JesaOptions options;
    options.max_iterations = spec.max_iterations;
    const JesaResult r = jesa_bcd(s, options);
    if (!r.trace.converged) ++est.not_converged;
    if (same_energy(r.objective, joint_optimum(s).energy)) ++est.matches;
  }
  const auto n = static_cast<double>(trials);
  est.fraction = static_cast<double>(est.matches) / n;
  est.std_error = std::sqrt(est.fraction * (1.0 - est.fraction) / n);
  return est;
}

}  // namespace dmoe
