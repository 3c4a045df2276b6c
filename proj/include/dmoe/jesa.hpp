#pragma once

// Joint expert and subcarrier allocation by block coordinate descent, the
// benchmark schemes built around it, and the per-layer protocol simulation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dmoe/assignment.hpp"
#include "dmoe/gating.hpp"
#include "dmoe/rng.hpp"
#include "dmoe/selection.hpp"
#include "dmoe/sysmodel.hpp"

namespace dmoe {

// One allocation round: everything needed to decide alpha and beta for a
// single layer.
struct Scenario {
  SystemConfig cfg;
  std::vector<ExpertProfile> profiles;
  ChannelRealization channel;
  GatingTensor gating;
  QosPolicy policy;
  std::vector<std::size_t> tokens_per_expert;
  std::size_t layer = 1;
  std::uint64_t seed = 0;  // drives the random initial subcarrier assignment

  double threshold() const;
  void validate() const;
};

struct IterationRecord {
  double after_selection = 0.0;   // F(alpha_{k+1}, beta_k)
  double after_allocation = 0.0;  // F(alpha_{k+1}, beta_{k+1})
  bool alpha_changed = false;
  bool beta_changed = false;
};

struct IterationTrace {
  std::vector<IterationRecord> iterations;
  bool converged = false;

  // Objective after every half-step, in order.
  std::vector<double> objectives() const;
};

struct JesaOptions {
  std::size_t max_iterations = 50;
  // Verify C1/C2/C3 feasibility after every half-step; throws std::logic_error.
  bool check_invariants = false;
  DesOptions des;
};

struct JesaResult {
  SelectionMatrix alpha;
  SubcarrierAssignment beta;
  IterationTrace trace;
  std::size_t fallback_tokens = 0;
  double objective = 0.0;
};

// Each of the K(K-1) directed links gets one distinct subcarrier, uniformly
// without replacement. Throws CapacityError when M < K(K-1).
SubcarrierAssignment random_init_assignment(Rng& rng, std::size_t num_subcarriers,
                                            std::size_t num_experts);

// floor(M / K(K-1)) subcarriers per link, dealt round-robin by index.
SubcarrierAssignment equal_bandwidth_assignment(std::size_t num_experts,
                                                std::size_t num_subcarriers);

struct ExpertStep {
  SelectionMatrix alpha;
  std::size_t fallback_tokens = 0;
  double qos_score_sum = 0.0;  // sum over tokens of the attained C1 score
};

// Alpha block: DES for every token given beta.
ExpertStep select_experts_given(const Scenario& scenario,
                                const SubcarrierAssignment& beta, double threshold,
                                std::size_t max_experts,
                                const DesOptions& options = {});

// Beta block: optimal one-subcarrier-per-link matching for the active links.
// With reserve_idle_links, idle links then receive the remaining subcarriers
// (matched by single-token energy) so they stay reachable; this costs nothing
// since their traffic is zero.
SubcarrierAssignment allocate_subcarriers(const Scenario& scenario,
                                          const SelectionMatrix& alpha,
                                          bool reserve_idle_links);

double objective(const Scenario& scenario, const SelectionMatrix& alpha,
                 const SubcarrierAssignment& beta);

JesaResult jesa_bcd(const Scenario& scenario, const JesaOptions& options = {});

// prod_{i < K(K-1)} (M - i) / M^{K(K-1)}; 0 when M < K(K-1).
double theorem1_bound(std::size_t num_experts, std::size_t num_subcarriers);

struct TopK {
  std::size_t k = 2;
  bool operator==(const TopK&) const = default;
};
struct Homogeneous {
  double z = 0.5;
  std::size_t max_experts = 2;
  bool operator==(const Homogeneous&) const = default;
};
struct Jesa {
  double gamma0 = 0.9;
  std::size_t max_experts = 2;
  bool operator==(const Jesa&) const = default;
};
struct LowerBound {
  double gamma0 = 0.9;
  std::size_t max_experts = 2;
  bool operator==(const LowerBound&) const = default;
};
using SchemeKind = std::variant<TopK, Homogeneous, Jesa, LowerBound>;

// "top-2", "h(0.5,2)", "jesa(0.9,2)", "lb(0.9,2)".
std::string scheme_label(const SchemeKind& scheme);
std::optional<SchemeKind> parse_scheme(std::string_view text);
void validate_scheme(const SchemeKind& scheme, std::size_t num_experts);

// The QoS policy a scheme imposes; TopK keeps `fallback`.
QosPolicy scheme_policy(const SchemeKind& scheme, const QosPolicy& fallback);

struct SchemeOutcome {
  SelectionMatrix alpha;
  SubcarrierAssignment beta;
  EnergyReport report;
  std::size_t bcd_iterations = 0;
  std::size_t fallback_tokens = 0;
  double qos_score_mean = 0.0;
  bool converged = true;
};

// Runs one scheme on one layer. The scenario's own policy is replaced by the
// scheme's: Homogeneous -> gamma = 1 with base z; Jesa / LowerBound -> z = 1,
// gamma^(l) = gamma0^l. LowerBound lets every link use its best subcarrier
// regardless of exclusivity, so its beta need not be exclusive.
SchemeOutcome run_scheme(const Scenario& scenario, const SchemeKind& scheme,
                         const JesaOptions& options = {});

// Return-path energy: each active link's traffic sent back from target to
// source on the same subcarrier indices, at the reverse-direction rates.
double backward_comm_energy(const Scenario& scenario, const SelectionMatrix& alpha,
                            const SubcarrierAssignment& beta);

// A full query across L layers. Channels are redrawn per layer from
// (seed, layer) unless fixed_channel is given.
struct QueryScenario {
  SystemConfig cfg;
  std::vector<ExpertProfile> profiles;
  GatingTensor gating;
  std::vector<std::size_t> tokens_per_expert;
  std::uint64_t seed = 0;
  std::optional<ChannelRealization> fixed_channel;

  Scenario layer_scenario(std::size_t layer) const;
};

struct LayerReport {
  std::size_t layer = 0;
  double threshold = 0.0;
  EnergyReport forward;
  double backward_comm = 0.0;
  std::size_t bcd_iterations = 0;
  std::size_t fallback_tokens = 0;
  std::size_t total_tokens = 0;
  double qos_score_mean = 0.0;
  bool converged = true;
};

std::vector<LayerReport> simulate_query(const QueryScenario& query,
                                        const SchemeKind& scheme,
                                        const JesaOptions& options = {});

}  // namespace dmoe
