#include "csel/kernels.hpp"

namespace csel::kernels {

namespace {

float squared_l2_scalar(const float* a, const float* b, size_t dim) {
  float acc = 0.0f;
  for (size_t j = 0; j < dim; ++j) {
    const float d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

size_t nearest_centroid_scalar(const float* point, const float* centroids,
                               size_t k, size_t dim, float* out_dist) {
  size_t best = 0;
  float best_dist = squared_l2_scalar(point, centroids, dim);
  for (size_t c = 1; c < k; ++c) {
    const float d = squared_l2_scalar(point, centroids + c * dim, dim);
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  if (out_dist) *out_dist = best_dist;
  return best;
}

void accumulate_row_scalar(double* acc, const float* row, size_t dim) {
  for (size_t j = 0; j < dim; ++j) acc[j] += static_cast<double>(row[j]);
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table{squared_l2_scalar, nearest_centroid_scalar,
                         accumulate_row_scalar};
  return table;
}

}  // namespace csel::kernels
