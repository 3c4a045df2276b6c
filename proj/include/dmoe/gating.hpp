#pragma once

// Per-layer, per-token gating scores and the QoS policy built on them.
// Layers are numbered 1..L throughout; experts and tokens from 0.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dmoe/sysmodel.hpp"

namespace dmoe {

// scores(l, i, n) is a length-K simplex vector: the gate's estimate of each
// expert's relevance for token n of source expert i at layer l.
class GatingTensor {
 public:
  GatingTensor() = default;
  GatingTensor(std::size_t num_layers, std::size_t num_experts,
               std::vector<std::size_t> tokens_per_expert);

  std::size_t num_layers() const { return num_layers_; }
  std::size_t num_experts() const { return num_experts_; }
  const std::vector<std::size_t>& tokens_per_expert() const {
    return tokens_per_expert_;
  }

  std::span<double> scores(std::size_t layer, std::size_t source,
                           std::size_t token);
  std::span<const double> scores(std::size_t layer, std::size_t source,
                                 std::size_t token) const;

  // Nonnegative entries and every vector summing to 1 within tolerance.
  bool is_valid(double tolerance = 1e-9) const;

  bool operator==(const GatingTensor&) const = default;

 private:
  std::size_t offset(std::size_t layer, std::size_t source,
                     std::size_t token) const;

  std::size_t num_layers_ = 0;
  std::size_t num_experts_ = 0;
  std::vector<std::size_t> tokens_per_expert_;
  std::vector<std::size_t> token_offsets_{0};
  std::vector<double> data_;
};

enum class QosMode { kHomogeneous, kGeometric };

struct QosPolicy {
  double base_threshold = 1.0;  // z
  double gamma0 = 0.9;          // importance base
  std::size_t max_experts = 2;  // D
  QosMode mode = QosMode::kGeometric;

  void validate() const;
  bool operator==(const QosPolicy&) const = default;
};

struct GatingSynthSpec {
  double concentration = 0.5;
  double specialist_boost = 4.0;
  std::uint64_t rng_seed = 0;

  bool operator==(const GatingSynthSpec&) const = default;
};

// Dirichlet(concentration) draws per (l, i, n); one uniformly chosen expert's
// raw weight is multiplied by specialist_boost before renormalising.
GatingTensor synth_gating(const GatingSynthSpec& spec, const SystemConfig& cfg,
                          const std::vector<std::size_t>& tokens_per_expert);

// z * gamma0^l (geometric) or z (homogeneous). Throws DomainError unless
// 1 <= layer <= num_layers.
double layer_threshold(const QosPolicy& policy, std::size_t layer,
                       std::size_t num_layers);

// Canonical C1 score of a selection: striped sum of the selected scores.
double selection_score(std::span<const double> scores,
                       std::span<const std::uint8_t> selection);

// True iff selection_score >= threshold (no slack; ties count as satisfied).
bool qos_satisfied(std::span<const double> scores,
                   std::span<const std::uint8_t> selection, double threshold);

// w_j = a_j g_j / sum(a g). Throws DegenerateGateError if the selected
// scores sum to zero.
std::vector<double> aggregation_weights(std::span<const double> scores,
                                        std::span<const std::uint8_t> selection);

}  // namespace dmoe
