#pragma once

#include <cstddef>
#include <string>

namespace csel::kernels {

// Data-parallel inner loops behind the quantizer. Each kernel has a scalar
// reference implementation and an AVX2 variant; the active set is picked once
// per process from CPU capabilities, overridable with CSEL_KERNELS=scalar|avx2.
//
// Tie-break contract for nearest_centroid: strictly-smaller comparison while
// scanning centroids in index order, so equal distances resolve to the lowest
// centroid index in every backend.
struct Ops {
  // Squared Euclidean distance between two dim-length rows.
  float (*squared_l2)(const float* a, const float* b, size_t dim);
  // Index of the nearest centroid row; *out_dist receives its squared distance.
  size_t (*nearest_centroid)(const float* point, const float* centroids,
                             size_t k, size_t dim, float* out_dist);
  // acc[j] += row[j] with double accumulation (centroid update step).
  void (*accumulate_row)(double* acc, const float* row, size_t dim);
};

enum class Backend { scalar, avx2 };

bool avx2_supported();

// Kernel table for an explicit backend (equivalence tests use this directly).
// Throws if the backend is not available on this machine.
const Ops& ops(Backend backend);

// Process-wide active kernel table.
const Ops& active();
Backend active_backend();
const char* backend_name(Backend backend);

}  // namespace csel::kernels
