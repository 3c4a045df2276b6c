#include "kernels_impl.hpp"

#include <limits>

namespace dmoe::kernels::detail {

namespace {

double striped_combine(const double lanes[4]) {
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double scalar_sum(const double* x, std::size_t n) {
  double lanes[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t blocks = n / 4 * 4;
  for (std::size_t i = 0; i < blocks; i += 4) {
    for (std::size_t k = 0; k < 4; ++k) lanes[k] += x[i + k];
  }
  double total = striped_combine(lanes);
  for (std::size_t i = blocks; i < n; ++i) total += x[i];
  return total;
}

double scalar_masked_sum(const std::uint8_t* mask, const double* x,
                         std::size_t n) {
  double lanes[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t blocks = n / 4 * 4;
  for (std::size_t i = 0; i < blocks; i += 4) {
    for (std::size_t k = 0; k < 4; ++k) {
      lanes[k] += mask[i + k] != 0 ? x[i + k] : 0.0;
    }
  }
  double total = striped_combine(lanes);
  for (std::size_t i = blocks; i < n; ++i) {
    total += mask[i] != 0 ? x[i] : 0.0;
  }
  return total;
}

void scalar_reciprocal_scale(double numerator, const double* denominators,
                             double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = numerator / denominators[i];
}

void scalar_divide(double* x, double divisor, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] / divisor;
}

RelaxOutcome scalar_hungarian_relax(const double* row, double row_potential,
                                    const double* col_potential, double* minv,
                                    std::int64_t* way, const std::uint8_t* used,
                                    std::int64_t from, std::size_t m) {
  RelaxOutcome best{std::numeric_limits<double>::infinity(), m};
  for (std::size_t c = 0; c < m; ++c) {
    if (used[c] != 0) continue;
    const double slack = (row[c] - row_potential) - col_potential[c];
    if (slack < minv[c]) {
      minv[c] = slack;
      way[c] = from;
    }
    if (minv[c] < best.delta) {
      best.delta = minv[c];
      best.column = c;
    }
  }
  return best;
}

void scalar_hungarian_shift(double* col_potential, double* minv,
                            const std::uint8_t* used, double delta,
                            std::size_t m) {
  for (std::size_t c = 0; c < m; ++c) {
    if (used[c] != 0) {
      col_potential[c] = col_potential[c] - delta;
    } else {
      minv[c] = minv[c] - delta;
    }
  }
}

}  // namespace

const KernelTable kScalarTable{
    "scalar",
    &scalar_sum,
    &scalar_masked_sum,
    &scalar_reciprocal_scale,
    &scalar_divide,
    &scalar_hungarian_relax,
    &scalar_hungarian_shift,
};

}  // namespace dmoe::kernels::detail
