#include "dmoe/sysmodel.hpp"

#include <cmath>
#include <string>

#include "dmoe/error.hpp"
#include "dmoe/kernels.hpp"
#include "dmoe/rng.hpp"

namespace dmoe {

namespace {

void require_positive(double value, const char* field) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(std::string("SystemConfig.") + field +
                      " must be strictly positive");
  }
}

}  // namespace

void SystemConfig::validate() const {
  if (num_experts == 0) throw DomainError("SystemConfig.num_experts must be positive");
  if (num_subcarriers == 0) {
    throw DomainError("SystemConfig.num_subcarriers must be positive");
  }
  if (num_layers == 0) throw DomainError("SystemConfig.num_layers must be positive");
  require_positive(subcarrier_bandwidth, "subcarrier_bandwidth");
  require_positive(tx_power, "tx_power");
  require_positive(noise_power, "noise_power");
  require_positive(hidden_state_bits, "hidden_state_bits");
  require_positive(mean_path_loss, "mean_path_loss");
}

std::vector<ExpertProfile> default_profiles(std::size_t num_experts) {
  std::vector<ExpertProfile> profiles(num_experts);
  for (std::size_t j = 0; j < num_experts; ++j) {
    profiles[j].comp_energy_per_token = static_cast<double>(j + 1) * 1e-3;
  }
  return profiles;
}

std::size_t SubcarrierAssignment::count(std::size_t i, std::size_t j) const {
  std::size_t n = 0;
  for (std::uint8_t flag : beta_.row(i, j)) n += flag != 0 ? 1 : 0;
  return n;
}

bool SubcarrierAssignment::is_exclusive() const {
  const std::size_t k = num_experts();
  for (std::size_t m = 0; m < num_subcarriers(); ++m) {
    std::size_t users = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (beta_(i, j, m) == 0) continue;
        if (i == j) return false;
        ++users;
      }
    }
    if (users > 1) return false;
  }
  return true;
}

SelectionMatrix::SelectionMatrix(std::size_t num_experts,
                                 std::vector<std::size_t> tokens_per_expert)
    : num_experts_(num_experts), tokens_per_expert_(std::move(tokens_per_expert)) {
  offsets_.assign(1, 0);
  for (std::size_t n : tokens_per_expert_) offsets_.push_back(offsets_.back() + n);
  flags_.assign(offsets_.back() * num_experts_, 0);
}

std::span<std::uint8_t> SelectionMatrix::row(std::size_t source,
                                             std::size_t token) {
  return {flags_.data() + (offsets_[source] + token) * num_experts_, num_experts_};
}

std::span<const std::uint8_t> SelectionMatrix::row(std::size_t source,
                                                   std::size_t token) const {
  return {flags_.data() + (offsets_[source] + token) * num_experts_, num_experts_};
}

void SelectionMatrix::fill(bool on) { std::fill(flags_.begin(), flags_.end(), on ? 1 : 0); }

TrafficMatrix traffic_of(const SelectionMatrix& alpha) {
  const std::size_t k = alpha.num_experts();
  TrafficMatrix traffic{k, std::vector<std::uint64_t>(k * k, 0)};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t n = 0; n < alpha.tokens(i); ++n) {
      const auto flags = alpha.row(i, n);
      for (std::size_t j = 0; j < k; ++j) traffic.tokens[i * k + j] += flags[j];
    }
  }
  return traffic;
}

double subcarrier_rate(double gain, const SystemConfig& cfg) {
  if (!(gain >= 0.0)) throw DomainError("channel gain must be nonnegative");
  return cfg.subcarrier_bandwidth * std::log2(1.0 + gain * cfg.snr());
}

double link_rate(std::span<const std::uint8_t> beta_row,
                 std::span<const double> rates_row) {
  if (beta_row.size() != rates_row.size()) {
    throw DomainError("link_rate: beta and rate rows differ in length");
  }
  return kernels::active().masked_sum(beta_row.data(), rates_row.data(),
                                      rates_row.size());
}

double comm_energy(double s_bits, std::span<const std::uint8_t> beta_row,
                   std::span<const double> rates_row, const SystemConfig& cfg) {
  if (s_bits == 0.0) return 0.0;
  const double rate = link_rate(beta_row, rates_row);
  if (!(rate > 0.0)) {
    throw InfeasibleLinkError("traffic scheduled on a link with zero rate");
  }
  std::size_t used = 0;
  for (std::uint8_t flag : beta_row) used += flag != 0 ? 1 : 0;
  return s_bits / rate * static_cast<double>(used) * cfg.tx_power;
}

double comp_energy(const ExpertProfile& profile, std::uint64_t inbound_tokens) {
  return profile.comp_energy_per_token * static_cast<double>(inbound_tokens) +
         profile.comp_energy_offset;
}

EnergyReport total_energy(const SelectionMatrix& alpha,
                          const SubcarrierAssignment& beta,
                          const ChannelRealization& channel,
                          std::span<const ExpertProfile> profiles,
                          const SystemConfig& cfg) {
  const std::size_t k = cfg.num_experts;
  if (alpha.num_experts() != k || beta.num_experts() != k ||
      beta.num_subcarriers() != cfg.num_subcarriers || profiles.size() != k) {
    throw DomainError("total_energy: shapes inconsistent with SystemConfig");
  }
  const TrafficMatrix traffic = traffic_of(alpha);
  EnergyReport report;
  report.comm.assign(k * k, 0.0);
  report.comp.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      report.comm[i * k + j] = comm_energy(traffic.bits(i, j, cfg), beta.row(i, j),
                                           channel.rates.row(i, j), cfg);
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::uint64_t inbound = 0;
    for (std::size_t i = 0; i < k; ++i) inbound += traffic.count(i, j);
    report.comp[j] = comp_energy(profiles[j], inbound);
  }
  const auto& kt = kernels::active();
  report.comm_total = kt.sum(report.comm.data(), report.comm.size());
  report.comp_total = kt.sum(report.comp.data(), report.comp.size());
  report.total = report.comm_total + report.comp_total;
  return report;
}

ChannelRealization sample_channel(std::uint64_t rng_seed,
                                  const SystemConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.num_experts;
  const std::size_t m = cfg.num_subcarriers;
  Rng rng = make_rng({rng_seed, stream::kChannel});
  std::exponential_distribution<double> fading(1.0);
  Array3<double> gains(k, k, m, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      for (std::size_t c = 0; c < m; ++c) {
        gains(i, j, c) = cfg.mean_path_loss * fading(rng);
      }
    }
  }
  return channel_from_gains(std::move(gains), cfg, rng_seed);
}

ChannelRealization channel_from_gains(Array3<double> gains,
                                      const SystemConfig& cfg,
                                      std::uint64_t rng_seed) {
  const std::size_t k = cfg.num_experts;
  const std::size_t m = cfg.num_subcarriers;
  if (gains.extent0() != k || gains.extent1() != k || gains.extent2() != m) {
    throw DomainError("channel gains must be K x K x M");
  }
  ChannelRealization channel;
  channel.rates = Array3<double>(k, k, m, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      for (std::size_t c = 0; c < m; ++c) {
        channel.rates(i, j, c) = subcarrier_rate(gains(i, j, c), cfg);
      }
    }
  }
  channel.gains = std::move(gains);
  channel.rng_seed = rng_seed;
  return channel;
}

}  // namespace dmoe
