// Command-line front end: run, sweep, verify, theorem1.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>

#include "CLI11.hpp"
#include "dmoe/assignment.hpp"
#include "dmoe/error.hpp"
#include "dmoe/harness.hpp"
#include "dmoe/kernels.hpp"
#include "dmoe/oracle.hpp"
#include "dmoe/selection.hpp"

namespace {

using namespace dmoe;

struct Overrides {
  std::string spec_path;
  std::vector<std::string> schemes;
  std::optional<std::size_t> experts;
  std::optional<std::size_t> subcarriers;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> tokens;
  std::optional<std::size_t> max_iterations;
  std::optional<std::size_t> num_seeds;
  bool oracle = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--spec", spec_path, "scenario JSON (defaults when omitted)");
    cmd->add_option("--scheme", schemes, "scheme labels, e.g. top-2 jesa(0.9,2) lb(0.9,2)");
    cmd->add_option("--experts", experts, "K (profiles reset to the default rule)");
    cmd->add_option("--subcarriers", subcarriers, "M");
    cmd->add_option("--layers", layers, "L");
    cmd->add_option("--tokens", tokens, "tokens per expert");
    cmd->add_option("--max-iterations", max_iterations, "BCD iteration cap");
    cmd->add_option("--num-seeds", num_seeds, "use seeds 1..n");
    cmd->add_flag("--oracle", oracle, "compare every layer with the joint enumeration oracle");
  }

  ScenarioSpec resolve() const {
    ScenarioSpec spec = spec_path.empty() ? default_spec() : load_scenario(spec_path);
    if (!schemes.empty()) {
      spec.schemes.clear();
      for (const auto& s : schemes) {
        const auto parsed = parse_scheme(s);
        if (!parsed) throw ScenarioError("--scheme " + s + " is not a scheme label");
        spec.schemes.push_back(*parsed);
      }
    }
    if (experts) {
      const std::size_t k = *experts;
      spec.system.num_experts = k;
      spec.experts = default_profiles(k);
      spec.tokens_per_expert.assign(k, spec.tokens_per_expert.empty() ? 16 : spec.tokens_per_expert[0]);
      spec.policy.max_experts = std::min(spec.policy.max_experts, k);
      std::erase_if(spec.sweep.k, [k](std::size_t v) { return v > k; });
      spec.injected_gating.reset();
      spec.channel_gains.reset();
    }
    if (subcarriers) spec.system.num_subcarriers = *subcarriers;
    if (layers) spec.system.num_layers = *layers;
    if (tokens) spec.tokens_per_expert.assign(spec.system.num_experts, *tokens);
    if (max_iterations) spec.max_iterations = *max_iterations;
    if (num_seeds) {
      spec.seeds.clear();
      for (std::uint64_t s = 1; s <= *num_seeds; ++s) spec.seeds.push_back(s);
    }
    if (oracle) spec.oracle = true;
    validate_spec(spec);
    return spec;
  }
};

void write_outputs(const RunReport& report, const std::string& csv, const std::string& json) {
  if (!csv.empty()) emit_results(report, EmitFormat::kCsv, csv);
  if (!json.empty()) emit_results(report, EmitFormat::kJson, json);
  if (csv.empty() && json.empty()) std::cout << report_csv(report);
  for (const RunRow& r : report.rows) {
    if (!r.converged) {
      std::cerr << "warning: " << r.scheme << " seed " << r.seed << " layer " << r.layer
                << " hit the BCD iteration cap without converging\n";
    }
  }
  for (const CellError& e : report.errors) {
    std::cerr << "error: " << e.scheme << " seed " << e.seed << ": " << e.message << "\n";
  }
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> g(k);
  double total = 0.0;
  for (auto& v : g) total += (v = exp1(rng));
  for (auto& v : g) v /= total;
  return g;
}

// Each suite prints one line; returns false on any mismatch.
bool verify_des(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> kdist(2, 12);
  std::uniform_real_distribution<double> cost(1e-4, 1e-2);
  std::uniform_real_distribution<double> thr(0.0, 1.0);
  std::size_t bad = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t k = kdist(rng);
    const auto g = random_scores(rng, k);
    std::vector<CandidateExpert> cands;
    for (std::size_t j = 0; j < k; ++j) cands.push_back({j, g[j], cost(rng)});
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, k)(rng);
    const double threshold = thr(rng);
    if (!(select_experts_des(cands, threshold, d) ==
          select_experts_bruteforce(cands, threshold, d))) {
      ++bad;
    }
  }
  std::printf("%s des-vs-bruteforce: %zu/%zu mismatches\n", bad ? "FAIL" : "PASS", bad, instances);
  return bad == 0;
}

bool verify_assignment(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.1, 10.0);
  std::size_t bad = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const std::size_t links = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(m, 6))(rng);
    AssignmentProblem p;
    p.num_subcarriers = m;
    for (std::size_t l = 0; l < links; ++l) p.links.push_back({l, l + 1});
    for (std::size_t e = 0; e < links * m; ++e) p.weights.push_back(w(rng));
    if (!(solve_assignment(p) == solve_assignment_bruteforce(p))) ++bad;
  }
  std::printf("%s assignment-vs-enumeration: %zu/%zu mismatches\n", bad ? "FAIL" : "PASS", bad,
              instances);
  return bad == 0;
}

bool verify_jesa(std::size_t instances, std::uint64_t seed) {
  std::size_t below = 0;
  std::size_t matches = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    Scenario s;
    s.cfg.num_experts = 2 + t % 2;
    s.cfg.num_subcarriers = 6 + t % 3;
    s.cfg.num_layers = 1;
    s.profiles = default_profiles(s.cfg.num_experts);
    s.tokens_per_expert.assign(s.cfg.num_experts, 1 + t % 2);
    s.channel = sample_channel(seed + t, s.cfg);
    s.gating = synth_gating({0.5, 4.0, seed + t}, s.cfg, s.tokens_per_expert);
    s.seed = seed + t;
    const double got = jesa_bcd(s).objective;
    const double opt = joint_optimum(s).energy;
    if (got < opt * (1.0 - 1e-12)) ++below;
    if (std::abs(got - opt) <= 1e-12 * opt) ++matches;
  }
  std::printf("%s jesa-vs-joint-oracle: %zu below optimum, %zu/%zu at optimum\n",
              below ? "FAIL" : "PASS", below, matches, instances);
  return below == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-aware expert selection and subcarrier allocation simulator"};
  app.require_subcommand(1);

  Overrides run_opts;
  std::uint64_t run_seed = 0;
  std::string run_csv, run_json;
  auto* run = app.add_subcommand("run", "run every scheme of a spec for one seed");
  run_opts.attach(run);
  run->add_option("--seed", run_seed, "seed for gating, channels and initialisation")->required();
  run->add_option("--csv", run_csv, "CSV output path");
  run->add_option("--json", run_json, "JSON output path");

  Overrides sweep_opts;
  std::string sweep_axis = "gamma0";
  std::string sweep_csv, sweep_json;
  auto* sweep = app.add_subcommand("sweep", "sweep gamma0 (JESA) or k (Top-k) over all seeds");
  sweep_opts.attach(sweep);
  sweep->add_option("--axis", sweep_axis, "gamma0 or k")->check(CLI::IsMember({"gamma0", "k"}));
  sweep->add_option("--csv", sweep_csv, "CSV output path");
  sweep->add_option("--json", sweep_json, "JSON output path");

  std::size_t verify_instances = 500;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "check the solvers against exhaustive oracles");
  verify->add_option("--instances", verify_instances, "random instances per suite");
  verify->add_option("--seed", verify_seed, "instance generator seed");

  Overrides mc_opts;
  std::size_t mc_trials = 2000;
  auto* mc = app.add_subcommand("theorem1", "Monte-Carlo estimate of joint optimality vs the bound");
  mc_opts.attach(mc);
  mc->add_option("--trials", mc_trials, "number of trials");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ScenarioSpec spec = run_opts.resolve();
      spec.seeds = {run_seed};
      write_outputs(run_benchmark(spec), run_csv, run_json);
    } else if (*sweep) {
      const ScenarioSpec spec = sweep_spec(
          sweep_opts.resolve(), sweep_axis == "k" ? SweepAxis::kTopK : SweepAxis::kGamma0);
      write_outputs(run_benchmark(spec), sweep_csv, sweep_json);
    } else if (*verify) {
      std::cout << "kernels: " << kernels::active().name << std::endl;
      bool ok = verify_des(verify_instances, verify_seed);
      ok = verify_assignment(verify_instances, verify_seed) && ok;
      ok = verify_jesa(std::min<std::size_t>(verify_instances, 200), verify_seed) && ok;
      return ok ? 0 : 1;
    } else if (*mc) {
      ScenarioSpec spec = mc_opts.resolve();
      spec.tokens_per_expert.assign(spec.system.num_experts, mc_opts.tokens.value_or(1));
      const Theorem1Estimate est = montecarlo_theorem1(spec, mc_trials);
      std::printf("K=%zu M=%zu trials=%zu matches=%zu fraction=%.6f se=%.6f bound=%.6f %s\n",
                  spec.system.num_experts, spec.system.num_subcarriers, est.trials, est.matches,
                  est.fraction, est.std_error, est.bound,
                  est.within_3_sigma() ? "within-3-sigma" : "BELOW-BOUND");
      if (est.not_converged > 0) {
        std::fprintf(stderr, "warning: %zu trials hit the BCD iteration cap\n", est.not_converged);
      }
      return est.within_3_sigma() ? 0 : 1;
    }
  } catch (const dmoe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
