#pragma once

// Physical-layer and energy models: per-subcarrier rates, link rates, and the
// communication / computation energy terms that every objective is built from.
//
// Units: data sizes in bits, rates in bits/s, power in watts, energy in joules.
// Per-expert computation cost is held per token (J/token).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dmoe/array.hpp"

namespace dmoe {

struct SystemConfig {
  std::size_t num_experts = 8;
  std::size_t num_subcarriers = 64;
  std::size_t num_layers = 16;
  double subcarrier_bandwidth = 1e6;   // Hz
  double tx_power = 1e-2;              // W per subcarrier
  double noise_power = 1e-3;           // W; P0/N0 = 10 (10 dB)
  double hidden_state_bits = 65536.0;  // 8 KiB hidden state
  double mean_path_loss = 1e-2;

  double snr() const { return tx_power / noise_power; }

  // Throws DomainError naming the first non-positive field.
  void validate() const;

  bool operator==(const SystemConfig&) const = default;
};

struct ExpertProfile {
  double comp_energy_per_token = 1e-3;  // a_j, J/token
  double comp_energy_offset = 0.0;      // b_j, J

  bool operator==(const ExpertProfile&) const = default;
};

// a_j = (j + 1) * 1e-3 J/token for zero-based j, b_j = 0.
std::vector<ExpertProfile> default_profiles(std::size_t num_experts);

// Per-link, per-subcarrier channel. Diagonal (i == i) entries are zero and
// never read.
struct ChannelRealization {
  Array3<double> gains;  // K x K x M
  Array3<double> rates;  // K x K x M, bits/s
  std::uint64_t rng_seed = 0;
};

// Subcarrier indicator beta[i][j][m]. Exclusivity is a property checked by
// is_exclusive(), not enforced, so relaxed allocations can be represented.
class SubcarrierAssignment {
 public:
  SubcarrierAssignment() = default;
  SubcarrierAssignment(std::size_t num_experts, std::size_t num_subcarriers)
      : beta_(num_experts, num_experts, num_subcarriers, 0) {}

  std::size_t num_experts() const { return beta_.extent0(); }
  std::size_t num_subcarriers() const { return beta_.extent2(); }

  void set(std::size_t i, std::size_t j, std::size_t m, bool on = true) {
    beta_(i, j, m) = on ? 1 : 0;
  }
  bool get(std::size_t i, std::size_t j, std::size_t m) const {
    return beta_(i, j, m) != 0;
  }
  std::span<const std::uint8_t> row(std::size_t i, std::size_t j) const {
    return beta_.row(i, j);
  }
  std::size_t count(std::size_t i, std::size_t j) const;

  // Each subcarrier serves at most one off-diagonal link, and the diagonal
  // carries nothing.
  bool is_exclusive() const;

  bool operator==(const SubcarrierAssignment&) const = default;

 private:
  Array3<std::uint8_t> beta_;
};

// alpha[i][n][j]: token n of source expert i is processed by expert j.
class SelectionMatrix {
 public:
  SelectionMatrix() = default;
  SelectionMatrix(std::size_t num_experts,
                  std::vector<std::size_t> tokens_per_expert);

  std::size_t num_experts() const { return num_experts_; }
  std::size_t tokens(std::size_t source) const {
    return tokens_per_expert_[source];
  }
  const std::vector<std::size_t>& tokens_per_expert() const {
    return tokens_per_expert_;
  }
  std::size_t total_tokens() const { return offsets_.back(); }

  std::span<std::uint8_t> row(std::size_t source, std::size_t token);
  std::span<const std::uint8_t> row(std::size_t source,
                                    std::size_t token) const;

  void fill(bool on);

  bool operator==(const SelectionMatrix&) const = default;

 private:
  std::size_t num_experts_ = 0;
  std::vector<std::size_t> tokens_per_expert_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint8_t> flags_;
};

// Token counts per (source, target); bits(i, j) = s0 * count.
struct TrafficMatrix {
  std::size_t num_experts = 0;
  std::vector<std::uint64_t> tokens;  // K x K row-major

  std::uint64_t count(std::size_t i, std::size_t j) const {
    return tokens[i * num_experts + j];
  }
  double bits(std::size_t i, std::size_t j, const SystemConfig& cfg) const {
    return cfg.hidden_state_bits * static_cast<double>(count(i, j));
  }
};

TrafficMatrix traffic_of(const SelectionMatrix& alpha);

struct EnergyReport {
  std::vector<double> comm;  // K x K row-major; diagonal is 0
  std::vector<double> comp;  // per expert
  double comm_total = 0.0;
  double comp_total = 0.0;
  double total = 0.0;
};

// B0 * log2(1 + gain * P0 / N0). Throws DomainError for negative gain.
double subcarrier_rate(double gain, const SystemConfig& cfg);

// Sum of rates over the flagged subcarriers.
double link_rate(std::span<const std::uint8_t> beta_row,
                 std::span<const double> rates_row);

// (s / R) * (#flags) * P0; 0 when s == 0. Throws InfeasibleLinkError when
// s > 0 and R == 0.
double comm_energy(double s_bits, std::span<const std::uint8_t> beta_row,
                   std::span<const double> rates_row, const SystemConfig& cfg);

double comp_energy(const ExpertProfile& profile, std::uint64_t inbound_tokens);

EnergyReport total_energy(const SelectionMatrix& alpha,
                          const SubcarrierAssignment& beta,
                          const ChannelRealization& channel,
                          std::span<const ExpertProfile> profiles,
                          const SystemConfig& cfg);

// Rayleigh block: gains = mean_path_loss * Exp(1), i.i.d. over (i, j, m).
ChannelRealization sample_channel(std::uint64_t rng_seed,
                                  const SystemConfig& cfg);

// Channel from externally supplied gains (K x K x M); rates are derived.
ChannelRealization channel_from_gains(Array3<double> gains,
                                      const SystemConfig& cfg,
                                      std::uint64_t rng_seed = 0);

}  // namespace dmoe
