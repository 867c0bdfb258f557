#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace csel {

// Frame-level feature vectors, row-major. Produced upstream of this artifact
// and ingested from file; all values must be finite.
struct FeatureMatrix {
  uint32_t n_frames = 0;
  uint32_t dim = 0;
  std::vector<float> values;  // n_frames * dim

  const float* row(size_t i) const { return values.data() + i * dim; }
  void validate() const;
};

// Binary feature file: magic "FEAT", u32le n_frames, u32le dim, then
// n_frames*dim little-endian f32, row-major.
FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const FeatureMatrix& features,
                    const std::filesystem::path& path);

struct Codebook {
  uint32_t k = 0;
  uint32_t dim = 0;
  uint64_t seed = 0;
  uint32_t iterations_run = 0;
  double inertia = 0.0;
  std::vector<float> centroids;  // k * dim

  const float* centroid(size_t c) const { return centroids.data() + c * dim; }
};

struct FitOptions {
  uint32_t k = 500;
  uint64_t seed = 0;
  uint32_t max_iters = 100;
  double tol = 1e-4;
  int threads = 0;  // 0 = hardware concurrency
  // Filled per iteration when non-null (inertia monotonicity checks).
  std::vector<double>* inertia_trace = nullptr;
};

// Lloyd's algorithm with k-means++ seeding. Deterministic in
// (features, k, seed, max_iters, tol); stops when the largest centroid
// displacement drops to tol or max_iters is reached. Empty clusters are
// re-seeded with the point farthest from its assigned centroid.
Codebook fit_codebook(const FeatureMatrix& features, const FitOptions& options);

// Nearest centroid per frame by squared Euclidean distance, equal distances
// resolving to the lowest centroid index.
std::vector<uint32_t> assign_ids(const Codebook& codebook,
                                 const FeatureMatrix& features,
                                 int threads = 0);
std::vector<std::string> assign(const Codebook& codebook,
                                const FeatureMatrix& features,
                                int threads = 0);

// Total squared distance of each frame to its nearest centroid.
double assignment_inertia(const Codebook& codebook,
                          const FeatureMatrix& features, int threads = 0);

// Merge consecutive duplicate tokens ([a,a,b,b,a] -> [a,b,a]).
std::vector<std::string> collapse_runs(const std::vector<std::string>& tokens);

// Codebook file: JSON {"k", "dim", "seed", "iterations_run", "inertia",
// "centroids": [[...], ...]}.
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace csel
