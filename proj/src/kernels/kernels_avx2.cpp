// AVX2 kernel variants. This translation unit is compiled with -mavx2 -mfma;
// nothing in it runs unless dispatch selected the avx2 backend.
#include "csel/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace csel::kernels {

namespace {

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

float squared_l2_avx2(const float* a, const float* b, size_t dim) {
  __m256 acc = _mm256_setzero_ps();
  size_t j = 0;
  for (; j + 8 <= dim; j += 8) {
    const __m256 va = _mm256_loadu_ps(a + j);
    const __m256 vb = _mm256_loadu_ps(b + j);
    const __m256 d = _mm256_sub_ps(va, vb);
    acc = _mm256_fmadd_ps(d, d, acc);
  }
  float total = hsum256(acc);
  for (; j < dim; ++j) {
    const float d = a[j] - b[j];
    total += d * d;
  }
  return total;
}

size_t nearest_centroid_avx2(const float* point, const float* centroids,
                             size_t k, size_t dim, float* out_dist) {
  size_t best = 0;
  float best_dist = squared_l2_avx2(point, centroids, dim);
  for (size_t c = 1; c < k; ++c) {
    const float d = squared_l2_avx2(point, centroids + c * dim, dim);
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  if (out_dist) *out_dist = best_dist;
  return best;
}

void accumulate_row_avx2(double* acc, const float* row, size_t dim) {
  size_t j = 0;
  for (; j + 8 <= dim; j += 8) {
    const __m256 v = _mm256_loadu_ps(row + j);
    const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
    const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
    _mm256_storeu_pd(acc + j, _mm256_add_pd(_mm256_loadu_pd(acc + j), lo));
    _mm256_storeu_pd(acc + j + 4, _mm256_add_pd(_mm256_loadu_pd(acc + j + 4), hi));
  }
  for (; j < dim; ++j) acc[j] += static_cast<double>(row[j]);
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops table{squared_l2_avx2, nearest_centroid_avx2,
                         accumulate_row_avx2};
  return table;
}

}  // namespace csel::kernels

#endif  // x86_64
