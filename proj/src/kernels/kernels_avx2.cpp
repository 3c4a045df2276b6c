#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cstring>
#include <limits>

namespace dmoe::kernels::detail {

namespace {

// All-ones 64-bit lanes where the byte mask is zero.
inline __m256d zero_lanes(const std::uint8_t* mask) {
  std::int32_t packed;
  std::memcpy(&packed, mask, sizeof(packed));
  const __m256i wide = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(packed));
  return _mm256_castsi256_pd(
      _mm256_cmpeq_epi64(wide, _mm256_setzero_si256()));
}

inline double combine(__m256d acc) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double avx2_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t blocks = n / 4 * 4;
  for (std::size_t i = 0; i < blocks; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  }
  double total = combine(acc);
  for (std::size_t i = blocks; i < n; ++i) total += x[i];
  return total;
}

double avx2_masked_sum(const std::uint8_t* mask, const double* x,
                       std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t blocks = n / 4 * 4;
  for (std::size_t i = 0; i < blocks; i += 4) {
    const __m256d off = zero_lanes(mask + i);
    acc = _mm256_add_pd(acc, _mm256_blendv_pd(_mm256_loadu_pd(x + i), zero, off));
  }
  double total = combine(acc);
  for (std::size_t i = blocks; i < n; ++i) {
    total += mask[i] != 0 ? x[i] : 0.0;
  }
  return total;
}

void avx2_reciprocal_scale(double numerator, const double* denominators,
                           double* out, std::size_t n) {
  const __m256d num = _mm256_set1_pd(numerator);
  const std::size_t blocks = n / 4 * 4;
  for (std::size_t i = 0; i < blocks; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_div_pd(num, _mm256_loadu_pd(denominators + i)));
  }
  for (std::size_t i = blocks; i < n; ++i) out[i] = numerator / denominators[i];
}

void avx2_divide(double* x, double divisor, std::size_t n) {
  const __m256d d = _mm256_set1_pd(divisor);
  const std::size_t blocks = n / 4 * 4;
  for (std::size_t i = 0; i < blocks; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_div_pd(_mm256_loadu_pd(x + i), d));
  }
  for (std::size_t i = blocks; i < n; ++i) x[i] = x[i] / divisor;
}

RelaxOutcome avx2_hungarian_relax(const double* row, double row_potential,
                                  const double* col_potential, double* minv,
                                  std::int64_t* way, const std::uint8_t* used,
                                  std::int64_t from, std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  const __m256d rp = _mm256_set1_pd(row_potential);
  const __m256d from_v = _mm256_castsi256_pd(_mm256_set1_epi64x(from));
  __m256d best_val = _mm256_set1_pd(inf);
  __m256i best_idx = _mm256_set1_epi64x(static_cast<std::int64_t>(m));
  __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
  const __m256i step = _mm256_set1_epi64x(4);

  const std::size_t blocks = m / 4 * 4;
  for (std::size_t c = 0; c < blocks; c += 4) {
    const __m256d unused = zero_lanes(used + c);
    const __m256d slack = _mm256_sub_pd(
        _mm256_sub_pd(_mm256_loadu_pd(row + c), rp), _mm256_loadu_pd(col_potential + c));
    __m256d mv = _mm256_loadu_pd(minv + c);
    const __m256d improve =
        _mm256_and_pd(_mm256_cmp_pd(slack, mv, _CMP_LT_OQ), unused);
    mv = _mm256_blendv_pd(mv, slack, improve);
    _mm256_storeu_pd(minv + c, mv);
    const __m256d w = _mm256_loadu_pd(reinterpret_cast<const double*>(way + c));
    _mm256_storeu_pd(reinterpret_cast<double*>(way + c),
                     _mm256_blendv_pd(w, from_v, improve));

    const __m256d better =
        _mm256_and_pd(_mm256_cmp_pd(mv, best_val, _CMP_LT_OQ), unused);
    best_val = _mm256_blendv_pd(best_val, mv, better);
    best_idx = _mm256_castpd_si256(_mm256_blendv_pd(
        _mm256_castsi256_pd(best_idx), _mm256_castsi256_pd(idx), better));
    idx = _mm256_add_epi64(idx, step);
  }

  alignas(32) double vals[4];
  alignas(32) std::int64_t cols[4];
  _mm256_store_pd(vals, best_val);
  _mm256_store_si256(reinterpret_cast<__m256i*>(cols), best_idx);
  RelaxOutcome best{inf, m};
  for (int k = 0; k < 4; ++k) {
    const auto col = static_cast<std::size_t>(cols[k]);
    if (vals[k] < best.delta || (vals[k] == best.delta && col < best.column)) {
      best.delta = vals[k];
      best.column = col;
    }
  }

  for (std::size_t c = blocks; c < m; ++c) {
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

void avx2_hungarian_shift(double* col_potential, double* minv,
                          const std::uint8_t* used, double delta,
                          std::size_t m) {
  const __m256d d = _mm256_set1_pd(delta);
  const std::size_t blocks = m / 4 * 4;
  for (std::size_t c = 0; c < blocks; c += 4) {
    const __m256d unused = zero_lanes(used + c);
    const __m256d cp = _mm256_loadu_pd(col_potential + c);
    const __m256d mv = _mm256_loadu_pd(minv + c);
    _mm256_storeu_pd(col_potential + c,
                     _mm256_blendv_pd(_mm256_sub_pd(cp, d), cp, unused));
    _mm256_storeu_pd(minv + c,
                     _mm256_blendv_pd(mv, _mm256_sub_pd(mv, d), unused));
  }
  for (std::size_t c = blocks; c < m; ++c) {
    if (used[c] != 0) {
      col_potential[c] = col_potential[c] - delta;
    } else {
      minv[c] = minv[c] - delta;
    }
  }
}

}  // namespace

const KernelTable kAvx2Table{
    "avx2",
    &avx2_sum,
    &avx2_masked_sum,
    &avx2_reciprocal_scale,
    &avx2_divide,
    &avx2_hungarian_relax,
    &avx2_hungarian_shift,
};

}  // namespace dmoe::kernels::detail
