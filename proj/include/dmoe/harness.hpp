#pragma once

// Scenario documents, benchmark grids, Monte-Carlo checks and result files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmoe/array.hpp"
#include "dmoe/gating.hpp"
#include "dmoe/jesa.hpp"
#include "dmoe/sysmodel.hpp"

namespace dmoe {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kArtifactVersion = "dmoe-1.0.0";

struct SweepGrid {
  std::vector<double> gamma0{0.85, 0.9, 0.95, 1.0};
  std::vector<std::size_t> k{1, 2, 3};

  bool operator==(const SweepGrid&) const = default;
};

struct ScenarioSpec {
  SystemConfig system;
  std::vector<ExpertProfile> experts;  // resolved; K entries
  std::vector<std::size_t> tokens_per_expert;
  GatingSynthSpec gating;
  std::optional<GatingTensor> injected_gating;
  std::optional<Array3<double>> channel_gains;  // fixed K x K x M gains
  QosPolicy policy;
  std::vector<SchemeKind> schemes;
  std::vector<std::uint64_t> seeds;
  SweepGrid sweep;
  bool oracle = false;
  std::size_t max_iterations = 50;

  bool operator==(const ScenarioSpec&) const = default;
};

// Defaults for K experts: a_j = (j + 1) * 1e-3, 16 tokens per expert,
// schemes top-2 / jesa(0.9,2) / lb(0.9,2), seeds 1..50.
ScenarioSpec default_spec();

// Throws ScenarioError naming the offending field.
void validate_spec(const ScenarioSpec& spec);

// Unknown keys are rejected. Parse errors carry line and column.
ScenarioSpec parse_scenario(std::string_view text);
ScenarioSpec load_scenario(const std::filesystem::path& path);
std::string dump_scenario(const ScenarioSpec& spec);
void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path);

// One (scheme, seed, layer) result.
struct RunRow {
  std::string scheme;
  std::uint64_t seed = 0;
  std::size_t layer = 0;
  double comm_j = 0.0;
  double comp_j = 0.0;
  double total_j = 0.0;
  double per_token_j = 0.0;
  std::size_t bcd_iters = 0;
  double fallback_rate = 0.0;
  double backward_comm_j = 0.0;
  double qos_score_mean = 0.0;  // proxy: attained score per token, not accuracy
  bool converged = true;
  std::optional<bool> oracle_match;

  bool operator==(const RunRow&) const = default;
};

struct CellError {
  std::string scheme;
  std::uint64_t seed = 0;
  std::string message;

  bool operator==(const CellError&) const = default;
};

struct RunReport {
  std::string version{kArtifactVersion};
  ScenarioSpec spec;
  std::vector<RunRow> rows;
  std::vector<CellError> errors;

  bool operator==(const RunReport&) const = default;
};

// The query a (spec, seed) cell runs: gating synthesised from the seed
// unless injected, channels per layer unless fixed.
QueryScenario query_for_seed(const ScenarioSpec& spec, std::uint64_t seed);

// Every (scheme, seed) cell in spec order; rows ordered scheme, seed, layer.
RunReport run_benchmark(const ScenarioSpec& spec);

// Spec with schemes replaced by jesa(g, D) over the gamma0 grid, or top-k
// over the k grid.
enum class SweepAxis { kGamma0, kTopK };
ScenarioSpec sweep_spec(const ScenarioSpec& spec, SweepAxis axis);

inline constexpr std::string_view kCsvHeader =
    "scheme,seed,layer,comm_J,comp_J,total_J,per_token_J,bcd_iters,fallback_rate";

std::string format_double(double value);
std::string report_csv(const RunReport& report);
std::string report_json(const RunReport& report);
RunReport report_from_json(std::string_view text);

enum class EmitFormat { kCsv, kJson };
// Throws Error when the file cannot be written.
void emit_results(const RunReport& report, EmitFormat format,
                  const std::filesystem::path& path);

struct Theorem1Estimate {
  std::size_t trials = 0;
  std::size_t matches = 0;
  double fraction = 0.0;
  double std_error = 0.0;  // binomial, from the empirical fraction
  double bound = 0.0;      // theorem1_bound(K, M)
  std::size_t not_converged = 0;

  bool within_3_sigma() const { return fraction >= bound - 3.0 * std_error; }
};

// Independent trials with fresh channels and gating from (first seed, trial);
// JESA under spec.policy against the joint enumeration oracle. Requires
// K <= 3, M <= 12, one token per expert.
Theorem1Estimate montecarlo_theorem1(const ScenarioSpec& spec, std::size_t trials);

}  // namespace dmoe
