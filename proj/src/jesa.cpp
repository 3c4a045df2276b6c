#include "dmoe/jesa.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "dmoe/error.hpp"

namespace dmoe {

namespace {

std::size_t num_links(std::size_t k) { return k * (k - 1); }

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void check_feasible(const Scenario& scenario, const SelectionMatrix& alpha,
                    const SubcarrierAssignment& beta, double threshold,
                    std::size_t max_experts) {
  const std::size_t k = scenario.cfg.num_experts;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t n = 0; n < alpha.tokens(i); ++n) {
      const auto row = alpha.row(i, n);
      const auto chosen = static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
      if (chosen == 0 || chosen > max_experts) {
        throw std::logic_error("selection violates the expert-count constraint");
      }
      const auto g = scenario.gating.scores(scenario.layer, i, n);
      if (!qos_satisfied(g, row, threshold)) {
        // Only a Top-D fallback may miss the threshold.
        const SelectionResult top = select_top_k(g, std::min(max_experts, k));
        std::vector<std::size_t> ids;
        for (std::size_t j = 0; j < k; ++j) {
          if (row[j] != 0) ids.push_back(j);
        }
        if (ids != top.selected) {
          throw std::logic_error("selection misses the QoS threshold");
        }
      }
    }
  }
  if (!beta.is_exclusive()) throw std::logic_error("subcarriers are not exclusive");
  const TrafficMatrix traffic = traffic_of(alpha);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j && traffic.count(i, j) > 0 && beta.count(i, j) == 0) {
        throw std::logic_error("active link without a subcarrier");
      }
    }
  }
}

}  // namespace

double Scenario::threshold() const {
  return layer_threshold(policy, layer, cfg.num_layers);
}

void Scenario::validate() const {
  cfg.validate();
  policy.validate();
  const std::size_t k = cfg.num_experts;
  if (profiles.size() != k || tokens_per_expert.size() != k) {
    throw DomainError("scenario: per-expert vectors must have K entries");
  }
  if (gating.num_experts() != k || gating.tokens_per_expert() != tokens_per_expert) {
    throw DomainError("scenario: gating tensor shape does not match");
  }
  if (layer < 1 || layer > gating.num_layers() || layer > cfg.num_layers) {
    throw DomainError("scenario: layer out of range");
  }
  if (channel.rates.extent0() != k || channel.rates.extent2() != cfg.num_subcarriers) {
    throw DomainError("scenario: channel shape does not match");
  }
  if (std::accumulate(tokens_per_expert.begin(), tokens_per_expert.end(),
                      std::size_t{0}) == 0) {
    throw DomainError("scenario: no tokens");
  }
}

std::vector<double> IterationTrace::objectives() const {
  std::vector<double> out;
  for (const auto& it : iterations) {
    out.push_back(it.after_selection);
    out.push_back(it.after_allocation);
  }
  return out;
}

SubcarrierAssignment random_init_assignment(Rng& rng, std::size_t num_subcarriers,
                                            std::size_t num_experts) {
  const std::size_t links = num_links(num_experts);
  if (num_subcarriers < links) {
    throw CapacityError("random initial assignment needs M >= K(K-1)");
  }
  std::vector<std::size_t> pool(num_subcarriers);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `links` entries are a uniform draw
  // without replacement.
  for (std::size_t a = 0; a < links; ++a) {
    std::uniform_int_distribution<std::size_t> pick(a, num_subcarriers - 1);
    std::swap(pool[a], pool[pick(rng)]);
  }
  SubcarrierAssignment beta(num_experts, num_subcarriers);
  std::size_t next = 0;
  for (std::size_t i = 0; i < num_experts; ++i) {
    for (std::size_t j = 0; j < num_experts; ++j) {
      if (i != j) beta.set(i, j, pool[next++]);
    }
  }
  return beta;
}

SubcarrierAssignment equal_bandwidth_assignment(std::size_t num_experts,
                                                std::size_t num_subcarriers) {
  const std::size_t links = num_links(num_experts);
  if (links == 0 || num_subcarriers < links) {
    throw CapacityError("equal bandwidth allocation needs M >= K(K-1)");
  }
  const std::size_t usable = num_subcarriers / links * links;
  SubcarrierAssignment beta(num_experts, num_subcarriers);
  for (std::size_t m = 0; m < usable; ++m) {
    std::size_t link = m % links;
    const std::size_t i = link / (num_experts - 1);
    std::size_t j = link % (num_experts - 1);
    if (j >= i) ++j;
    beta.set(i, j, m);
  }
  return beta;
}

ExpertStep select_experts_given(const Scenario& scenario,
                                const SubcarrierAssignment& beta, double threshold,
                                std::size_t max_experts, const DesOptions& options) {
  const SystemConfig& cfg = scenario.cfg;
  const std::size_t k = cfg.num_experts;
  ExpertStep step{SelectionMatrix(k, scenario.tokens_per_expert), 0, 0.0};
  std::vector<double> rates(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      rates[j] = link_rate(beta.row(i, j), scenario.channel.rates.row(i, j));
      counts[j] = beta.count(i, j);
    }
    rates[i] = 0.0;
    counts[i] = 0;
    for (std::size_t n = 0; n < scenario.tokens_per_expert[i]; ++n) {
      const auto g = scenario.gating.scores(scenario.layer, i, n);
      const auto candidates =
          candidate_costs(i, g, rates, counts, scenario.profiles, cfg);
      const SelectionResult pick =
          select_experts_des(candidates, threshold, max_experts, options);
      auto row = step.alpha.row(i, n);
      for (std::size_t j : pick.selected) row[j] = 1;
      if (pick.fallback_used) ++step.fallback_tokens;
      step.qos_score_sum += selection_score(g, row);
    }
  }
  return step;
}

SubcarrierAssignment allocate_subcarriers(const Scenario& scenario,
                                          const SelectionMatrix& alpha,
                                          bool reserve_idle_links) {
  const SystemConfig& cfg = scenario.cfg;
  const std::size_t k = cfg.num_experts;
  const std::size_t m = cfg.num_subcarriers;
  const TrafficMatrix traffic = traffic_of(alpha);
  const AssignmentProblem problem = build_assignment(traffic, scenario.channel, cfg);
  const AssignmentResult active = solve_assignment(problem);

  SubcarrierAssignment beta(k, m);
  std::vector<std::uint8_t> taken(m, 0);
  for (std::size_t l = 0; l < problem.num_links(); ++l) {
    beta.set(problem.links[l].source, problem.links[l].target, active.subcarrier[l]);
    taken[active.subcarrier[l]] = 1;
  }
  if (!reserve_idle_links) return beta;

  AssignmentProblem idle;
  std::vector<std::size_t> free_cols;
  for (std::size_t c = 0; c < m; ++c) {
    if (taken[c] == 0) free_cols.push_back(c);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j && traffic.count(i, j) == 0) idle.links.push_back({i, j});
    }
  }
  if (idle.links.empty() || idle.links.size() > free_cols.size()) return beta;
  idle.num_subcarriers = free_cols.size();
  idle.weights.resize(idle.links.size() * free_cols.size());
  const double one_token = cfg.tx_power * cfg.hidden_state_bits;
  for (std::size_t l = 0; l < idle.links.size(); ++l) {
    const auto rates = scenario.channel.rates.row(idle.links[l].source, idle.links[l].target);
    for (std::size_t c = 0; c < free_cols.size(); ++c) {
      idle.weights[l * free_cols.size() + c] = one_token / rates[free_cols[c]];
    }
  }
  try {
    const AssignmentResult spare = solve_assignment(idle);
    for (std::size_t l = 0; l < idle.links.size(); ++l) {
      beta.set(idle.links[l].source, idle.links[l].target, free_cols[spare.subcarrier[l]]);
    }
  } catch (const InfeasibleAssignmentError&) {
    // Some idle link has no usable subcarrier left; leave idle links bare.
  }
  return beta;
}

double objective(const Scenario& scenario, const SelectionMatrix& alpha,
                 const SubcarrierAssignment& beta) {
  return total_energy(alpha, beta, scenario.channel, scenario.profiles, scenario.cfg)
      .total;
}

JesaResult jesa_bcd(const Scenario& scenario, const JesaOptions& options) {
  scenario.validate();
  const SystemConfig& cfg = scenario.cfg;
  const double threshold = scenario.threshold();
  const std::size_t max_experts = scenario.policy.max_experts;

  Rng rng = make_rng({scenario.seed, stream::kInit, scenario.layer});
  JesaResult result;
  result.beta = random_init_assignment(rng, cfg.num_subcarriers, cfg.num_experts);
  result.alpha = SelectionMatrix(cfg.num_experts, scenario.tokens_per_expert);
  result.alpha.fill(true);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    ExpertStep step =
        select_experts_given(scenario, result.beta, threshold, max_experts, options.des);
    IterationRecord record;
    record.after_selection = objective(scenario, step.alpha, result.beta);
    if (options.check_invariants) {
      check_feasible(scenario, step.alpha, result.beta, threshold, max_experts);
    }
    SubcarrierAssignment beta = allocate_subcarriers(scenario, step.alpha, true);
    record.after_allocation = objective(scenario, step.alpha, beta);
    if (options.check_invariants) {
      check_feasible(scenario, step.alpha, beta, threshold, max_experts);
    }
    record.alpha_changed = !(step.alpha == result.alpha);
    record.beta_changed = !(beta == result.beta);
    result.trace.iterations.push_back(record);
    result.alpha = std::move(step.alpha);
    result.beta = std::move(beta);
    result.fallback_tokens = step.fallback_tokens;
    result.objective = record.after_allocation;
    if (!record.alpha_changed && !record.beta_changed) {
      result.trace.converged = true;
      break;
    }
  }
  return result;
}

QosPolicy scheme_policy(const SchemeKind& scheme, const QosPolicy& fallback) {
  return std::visit(
      [&](const auto& s) -> QosPolicy {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Homogeneous>) {
          return {s.z, 1.0, s.max_experts, QosMode::kHomogeneous};
        } else if constexpr (std::is_same_v<T, Jesa> || std::is_same_v<T, LowerBound>) {
          return {1.0, s.gamma0, s.max_experts, QosMode::kGeometric};
        } else {
          return fallback;
        }
      },
      scheme);
}

double theorem1_bound(std::size_t num_experts, std::size_t num_subcarriers) {
  const std::size_t links = num_links(num_experts);
  if (num_subcarriers < links) return 0.0;
  double p = 1.0;
  const auto m = static_cast<double>(num_subcarriers);
  for (std::size_t i = 0; i < links; ++i) p *= (m - static_cast<double>(i)) / m;
  return p;
}

std::string scheme_label(const SchemeKind& scheme) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TopK>) {
          return "top-" + std::to_string(s.k);
        } else if constexpr (std::is_same_v<T, Homogeneous>) {
          return "h(" + shortest(s.z) + "," + std::to_string(s.max_experts) + ")";
        } else if constexpr (std::is_same_v<T, Jesa>) {
          return "jesa(" + shortest(s.gamma0) + "," + std::to_string(s.max_experts) + ")";
        } else {
          return "lb(" + shortest(s.gamma0) + "," + std::to_string(s.max_experts) + ")";
        }
      },
      scheme);
}

std::optional<SchemeKind> parse_scheme(std::string_view text) {
  const std::string s(text);
  std::size_t count = 0;
  double value = 0.0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "top-%zu%c", &count, &tail) == 1) return TopK{count};
  if (std::sscanf(s.c_str(), "h(%lf,%zu)%c", &value, &count, &tail) == 2) {
    return Homogeneous{value, count};
  }
  if (std::sscanf(s.c_str(), "jesa(%lf,%zu)%c", &value, &count, &tail) == 2) {
    return Jesa{value, count};
  }
  if (std::sscanf(s.c_str(), "lb(%lf,%zu)%c", &value, &count, &tail) == 2) {
    return LowerBound{value, count};
  }
  return std::nullopt;
}

void validate_scheme(const SchemeKind& scheme, std::size_t num_experts) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TopK>) {
          if (s.k == 0 || s.k > num_experts) throw DomainError("top-k needs 1 <= k <= K");
        } else {
          if (s.max_experts == 0 || s.max_experts > num_experts) {
            throw DomainError("scheme needs 1 <= D <= K");
          }
          scheme_policy(scheme, {}).validate();
        }
      },
      scheme);
}

SchemeOutcome run_scheme(const Scenario& scenario, const SchemeKind& scheme,
                         const JesaOptions& options) {
  validate_scheme(scheme, scenario.cfg.num_experts);
  Scenario local = scenario;
  local.policy = scheme_policy(scheme, scenario.policy);
  local.validate();
  const std::size_t total_tokens = std::accumulate(
      local.tokens_per_expert.begin(), local.tokens_per_expert.end(), std::size_t{0});

  SchemeOutcome out;
  if (const auto* top = std::get_if<TopK>(&scheme)) {
    const std::size_t k = local.cfg.num_experts;
    out.alpha = SelectionMatrix(k, local.tokens_per_expert);
    double qos = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t n = 0; n < local.tokens_per_expert[i]; ++n) {
        const auto g = local.gating.scores(local.layer, i, n);
        auto row = out.alpha.row(i, n);
        for (std::size_t j : select_top_k(g, top->k).selected) row[j] = 1;
        qos += selection_score(g, row);
      }
    }
    out.beta = allocate_subcarriers(local, out.alpha, false);
    out.qos_score_mean = qos / static_cast<double>(total_tokens);
  } else if (std::holds_alternative<LowerBound>(scheme)) {
    const std::size_t k = local.cfg.num_experts;
    SubcarrierAssignment relaxed(k, local.cfg.num_subcarriers);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        const auto rates = local.channel.rates.row(i, j);
        const auto best = std::max_element(rates.begin(), rates.end());
        relaxed.set(i, j, static_cast<std::size_t>(best - rates.begin()));
      }
    }
    ExpertStep step = select_experts_given(local, relaxed, local.threshold(),
                                           local.policy.max_experts, options.des);
    out.alpha = std::move(step.alpha);
    // Only links carrying traffic keep their subcarrier in the report.
    const TrafficMatrix traffic = traffic_of(out.alpha);
    out.beta = SubcarrierAssignment(k, local.cfg.num_subcarriers);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j || traffic.count(i, j) == 0) continue;
        for (std::size_t c = 0; c < local.cfg.num_subcarriers; ++c) {
          if (relaxed.get(i, j, c)) out.beta.set(i, j, c);
        }
      }
    }
    out.fallback_tokens = step.fallback_tokens;
    out.qos_score_mean = step.qos_score_sum / static_cast<double>(total_tokens);
  } else {
    JesaResult bcd = jesa_bcd(local, options);
    const double threshold = local.threshold();
    double qos = 0.0;
    for (std::size_t i = 0; i < local.cfg.num_experts; ++i) {
      for (std::size_t n = 0; n < local.tokens_per_expert[i]; ++n) {
        const auto g = local.gating.scores(local.layer, i, n);
        qos += selection_score(g, bcd.alpha.row(i, n));
      }
    }
    (void)threshold;
    out.alpha = std::move(bcd.alpha);
    out.beta = std::move(bcd.beta);
    out.bcd_iterations = bcd.trace.iterations.size();
    out.fallback_tokens = bcd.fallback_tokens;
    out.converged = bcd.trace.converged;
    out.qos_score_mean = qos / static_cast<double>(total_tokens);
  }
  out.report = total_energy(out.alpha, out.beta, local.channel, local.profiles, local.cfg);
  return out;
}

double backward_comm_energy(const Scenario& scenario, const SelectionMatrix& alpha,
                            const SubcarrierAssignment& beta) {
  const SystemConfig& cfg = scenario.cfg;
  const TrafficMatrix traffic = traffic_of(alpha);
  double total = 0.0;
  for (std::size_t i = 0; i < cfg.num_experts; ++i) {
    for (std::size_t j = 0; j < cfg.num_experts; ++j) {
      if (i == j) continue;
      total += comm_energy(traffic.bits(i, j, cfg), beta.row(i, j),
                           scenario.channel.rates.row(j, i), cfg);
    }
  }
  return total;
}

Scenario QueryScenario::layer_scenario(std::size_t layer) const {
  Scenario s;
  s.cfg = cfg;
  s.profiles = profiles;
  s.channel = fixed_channel ? *fixed_channel
                            : sample_channel(seed * 1000003ULL + layer, cfg);
  s.gating = gating;
  s.tokens_per_expert = tokens_per_expert;
  s.layer = layer;
  s.seed = seed;
  return s;
}

std::vector<LayerReport> simulate_query(const QueryScenario& query,
                                        const SchemeKind& scheme,
                                        const JesaOptions& options) {
  if (query.gating.num_layers() < query.cfg.num_layers) {
    throw DomainError("simulate_query needs a gating tensor covering all L layers");
  }
  std::vector<LayerReport> layers;
  layers.reserve(query.cfg.num_layers);
  for (std::size_t l = 1; l <= query.cfg.num_layers; ++l) {
    Scenario scenario = query.layer_scenario(l);
    SchemeOutcome outcome = run_scheme(scenario, scheme, options);
    LayerReport report;
    report.layer = l;
    scenario.policy = scheme_policy(scheme, scenario.policy);
    report.threshold = std::holds_alternative<TopK>(scheme) ? 0.0 : scenario.threshold();
    report.backward_comm = backward_comm_energy(scenario, outcome.alpha, outcome.beta);
    report.forward = std::move(outcome.report);
    report.bcd_iterations = outcome.bcd_iterations;
    report.fallback_tokens = outcome.fallback_tokens;
    report.total_tokens = std::accumulate(query.tokens_per_expert.begin(),
                                          query.tokens_per_expert.end(), std::size_t{0});
    report.qos_score_mean = outcome.qos_score_mean;
    report.converged = outcome.converged;
    layers.push_back(std::move(report));
  }
  return layers;
}

}  // namespace dmoe
