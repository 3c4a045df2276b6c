#include "dmoe/gating.hpp"

#include <cmath>
#include <random>

#include "dmoe/error.hpp"
#include "dmoe/kernels.hpp"
#include "dmoe/rng.hpp"

namespace dmoe {

GatingTensor::GatingTensor(std::size_t num_layers, std::size_t num_experts,
                           std::vector<std::size_t> tokens_per_expert)
    : num_layers_(num_layers),
      num_experts_(num_experts),
      tokens_per_expert_(std::move(tokens_per_expert)) {
  token_offsets_.assign(1, 0);
  for (std::size_t n : tokens_per_expert_) {
    token_offsets_.push_back(token_offsets_.back() + n);
  }
  data_.assign(num_layers_ * token_offsets_.back() * num_experts_, 0.0);
}

std::size_t GatingTensor::offset(std::size_t layer, std::size_t source,
                                 std::size_t token) const {
  if (layer < 1 || layer > num_layers_) {
    throw DomainError("gating layer index out of range");
  }
  const std::size_t per_layer = token_offsets_.back();
  return ((layer - 1) * per_layer + token_offsets_[source] + token) * num_experts_;
}

std::span<double> GatingTensor::scores(std::size_t layer, std::size_t source,
                                       std::size_t token) {
  return {data_.data() + offset(layer, source, token), num_experts_};
}

std::span<const double> GatingTensor::scores(std::size_t layer,
                                             std::size_t source,
                                             std::size_t token) const {
  return {data_.data() + offset(layer, source, token), num_experts_};
}

bool GatingTensor::is_valid(double tolerance) const {
  if (num_experts_ == 0) return data_.empty();
  const auto& kt = kernels::active();
  for (std::size_t v = 0; v < data_.size(); v += num_experts_) {
    for (std::size_t j = 0; j < num_experts_; ++j) {
      if (!(data_[v + j] >= 0.0)) return false;
    }
    if (std::abs(kt.sum(data_.data() + v, num_experts_) - 1.0) > tolerance) {
      return false;
    }
  }
  return true;
}

void QosPolicy::validate() const {
  if (!(base_threshold >= 0.0 && base_threshold <= 1.0)) {
    throw DomainError("QosPolicy.z must lie in [0, 1]");
  }
  if (!(gamma0 > 0.0 && gamma0 <= 1.0)) {
    throw DomainError("QosPolicy.gamma0 must lie in (0, 1]");
  }
  if (max_experts == 0) throw DomainError("QosPolicy.max_experts must be positive");
}

GatingTensor synth_gating(const GatingSynthSpec& spec, const SystemConfig& cfg,
                          const std::vector<std::size_t>& tokens_per_expert) {
  if (!(spec.concentration > 0.0)) {
    throw DomainError("GatingSynthSpec.concentration must be positive");
  }
  if (!(spec.specialist_boost >= 1.0)) {
    throw DomainError("GatingSynthSpec.specialist_boost must be >= 1");
  }
  const std::size_t k = cfg.num_experts;
  if (tokens_per_expert.size() != k) {
    throw DomainError("tokens_per_expert must have one entry per expert");
  }
  GatingTensor tensor(cfg.num_layers, k, tokens_per_expert);
  Rng rng = make_rng({spec.rng_seed, stream::kGating});
  std::gamma_distribution<double> raw(spec.concentration, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  const auto& kt = kernels::active();

  for (std::size_t l = 1; l <= cfg.num_layers; ++l) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t n = 0; n < tokens_per_expert[i]; ++n) {
        auto g = tensor.scores(l, i, n);
        for (double& x : g) x = raw(rng);
        g[pick(rng)] *= spec.specialist_boost;
        double total = kt.sum(g.data(), k);
        if (!(total > 0.0)) {
          // Every gamma draw underflowed; fall back to the uniform vector.
          std::fill(g.begin(), g.end(), 1.0);
          total = static_cast<double>(k);
        }
        kt.divide(g.data(), total, k);
      }
    }
  }
  return tensor;
}

double layer_threshold(const QosPolicy& policy, std::size_t layer,
                       std::size_t num_layers) {
  if (layer < 1 || layer > num_layers) {
    throw DomainError("layer index must satisfy 1 <= l <= L");
  }
  if (policy.mode == QosMode::kHomogeneous) return policy.base_threshold;
  return policy.base_threshold *
         std::pow(policy.gamma0, static_cast<double>(layer));
}

double selection_score(std::span<const double> scores,
                       std::span<const std::uint8_t> selection) {
  if (scores.size() != selection.size()) {
    throw DomainError("score and selection vectors differ in length");
  }
  return kernels::active().masked_sum(selection.data(), scores.data(),
                                      scores.size());
}

bool qos_satisfied(std::span<const double> scores,
                   std::span<const std::uint8_t> selection, double threshold) {
  return selection_score(scores, selection) >= threshold;
}

std::vector<double> aggregation_weights(std::span<const double> scores,
                                        std::span<const std::uint8_t> selection) {
  const double denom = selection_score(scores, selection);
  if (!(denom > 0.0)) {
    throw DegenerateGateError("selected experts have zero total gating score");
  }
  std::vector<double> weights(scores.size(), 0.0);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (selection[j] != 0) weights[j] = scores[j] / denom;
  }
  return weights;
}

}  // namespace dmoe
