#pragma once

// Data-parallel inner loops shared by the solvers.
//
// Every kernel has a scalar reference implementation and, where the build and
// the CPU allow it, an AVX2 variant. The two are required to produce bitwise
// identical results: reductions use a fixed 4-lane striped order (lane k
// accumulates elements i with i % 4 == k over full blocks, lanes combine as
// (l0 + l1) + (l2 + l3), the tail is then added sequentially), and no kernel
// uses fused multiply-add. Callers therefore get the same numbers whichever
// table is active.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace dmoe::kernels {

struct RelaxOutcome {
  double delta;         // smallest slack over unused columns
  std::size_t column;   // its column, lowest index on ties; == m if none
};

struct KernelTable {
  std::string_view name;

  // Striped sum of x[0..n).
  double (*sum)(const double* x, std::size_t n);

  // Striped sum of x[i] over i with mask[i] != 0.
  double (*masked_sum)(const std::uint8_t* mask, const double* x, std::size_t n);

  // out[i] = numerator / denominators[i]  (IEEE: x/0 -> +inf for x > 0).
  void (*reciprocal_scale)(double numerator, const double* denominators,
                           double* out, std::size_t n);

  // x[i] = x[i] / divisor.
  void (*divide)(double* x, double divisor, std::size_t n);

  // One row scan of the shortest-augmenting-path assignment solver.
  // For each column c with !used[c]:
  //   slack = (row[c] - row_potential) - col_potential[c]
  //   if slack < minv[c]: minv[c] = slack, way[c] = from
  // Returns the argmin of minv over unused columns.
  RelaxOutcome (*hungarian_relax)(const double* row, double row_potential,
                                  const double* col_potential, double* minv,
                                  std::int64_t* way, const std::uint8_t* used,
                                  std::int64_t from, std::size_t m);

  // Dual update after a relax step: used columns get col_potential -= delta,
  // unused columns get minv -= delta.
  void (*hungarian_shift)(double* col_potential, double* minv,
                          const std::uint8_t* used, double delta,
                          std::size_t m);
};

enum class Isa { kScalar, kAvx2 };

const KernelTable& scalar_table();

// nullptr when the AVX2 variant was not built or the CPU lacks AVX2.
const KernelTable* avx2_table();

// The active table. Chosen once: AVX2 when available, unless the environment
// variable DMOE_KERNELS=scalar asks otherwise.
const KernelTable& active();

// Overrides the active table; returns false if the ISA is unavailable.
bool select(Isa isa);

}  // namespace dmoe::kernels
