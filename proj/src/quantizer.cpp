#include "csel/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "csel/kernels.hpp"
#include "csel/parallel.hpp"
#include "csel/rng.hpp"
#include "json.hpp"

namespace csel {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void assign_into(const float* centroids, uint32_t k, const FeatureMatrix& f,
                 int threads, uint32_t* assignment, float* distance) {
  const kernels::Ops& kernel = kernels::active();
  parallel_chunks(f.n_frames, threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      float d;
      assignment[i] = static_cast<uint32_t>(
          kernel.nearest_centroid(f.row(i), centroids, k, f.dim, &d));
      distance[i] = d;
    }
  });
}

uint32_t read_u32le(std::istream& in, const std::string& path, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    fail(path + ": truncated feature file reading " + what);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void write_u32le(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
      static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void FeatureMatrix::validate() const {
  if (values.size() != static_cast<size_t>(n_frames) * dim)
    fail("feature matrix holds " + std::to_string(values.size()) +
         " values, expected " + std::to_string(n_frames) + "x" +
         std::to_string(dim));
  if (n_frames > 0 && dim == 0) fail("feature matrix has zero dimension");
  for (float v : values)
    if (!std::isfinite(v)) fail("feature matrix contains a non-finite value");
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open feature file '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FEAT", 4) != 0)
    fail(path.string() + ": bad magic, expected FEAT");
  FeatureMatrix m;
  m.n_frames = read_u32le(in, path.string(), "n_frames");
  m.dim = read_u32le(in, path.string(), "dim");
  const size_t count = static_cast<size_t>(m.n_frames) * m.dim;
  m.values.resize(count);
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  if (count > 0 &&
      !in.read(reinterpret_cast<char*>(m.values.data()), count * 4))
    fail(path.string() + ": truncated feature file reading values");
  if (in.peek() != std::char_traits<char>::eof())
    fail(path.string() + ": trailing bytes after feature values");
  m.validate();
  return m;
}

void write_features(const FeatureMatrix& features,
                    const std::filesystem::path& path) {
  features.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write feature file '" + path.string() + "'");
  out.write("FEAT", 4);
  write_u32le(out, features.n_frames);
  write_u32le(out, features.dim);
  out.write(reinterpret_cast<const char*>(features.values.data()),
            static_cast<std::streamsize>(features.values.size() * 4));
  if (!out) fail("short write to feature file '" + path.string() + "'");
}

Codebook fit_codebook(const FeatureMatrix& features, const FitOptions& options) {
  features.validate();
  const size_t n = features.n_frames;
  const uint32_t dim = features.dim;
  const uint32_t k = options.k;
  if (k == 0) fail("fit_codebook: k must be positive");
  if (n < k)
    fail("fit_codebook: " + std::to_string(n) + " frames cannot seed k=" +
         std::to_string(k));

  const kernels::Ops& kernel = kernels::active();
  Rng rng(options.seed);
  std::vector<float> centroids(static_cast<size_t>(k) * dim);

  // k-means++: first center uniform, the rest proportional to the squared
  // distance from the centers chosen so far.
  auto copy_center = [&](uint32_t c, size_t point) {
    std::memcpy(centroids.data() + static_cast<size_t>(c) * dim,
                features.row(point), dim * sizeof(float));
  };
  copy_center(0, rng.below(n));
  std::vector<double> d2(n);
  for (size_t i = 0; i < n; ++i)
    d2[i] = kernel.squared_l2(features.row(i), centroids.data(), dim);
  for (uint32_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    const size_t point = total > 0.0 ? rng.weighted(d2) : rng.below(n);
    copy_center(c, point);
    const float* center = centroids.data() + static_cast<size_t>(c) * dim;
    for (size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], static_cast<double>(kernel.squared_l2(
                                  features.row(i), center, dim)));
  }

  std::vector<uint32_t> assignment(n);
  std::vector<float> distance(n);
  std::vector<double> sums(static_cast<size_t>(k) * dim);
  std::vector<size_t> counts(k);
  std::vector<float> updated(static_cast<size_t>(k) * dim);

  uint32_t iterations = 0;
  while (iterations < options.max_iters) {
    assign_into(centroids.data(), k, features, options.threads,
                assignment.data(), distance.data());
    double inertia = 0.0;
    for (size_t i = 0; i < n; ++i) inertia += distance[i];
    if (options.inertia_trace) options.inertia_trace->push_back(inertia);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (size_t i = 0; i < n; ++i) {
      kernel.accumulate_row(sums.data() + static_cast<size_t>(assignment[i]) * dim,
                            features.row(i), dim);
      ++counts[assignment[i]];
    }

    // Re-seed empty clusters with the farthest points, one per cluster,
    // lowest point index on ties.
    for (uint32_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      size_t farthest = 0;
      for (size_t i = 1; i < n; ++i)
        if (distance[i] > distance[farthest]) farthest = i;
      distance[farthest] = -1.0f;
      const float* row = features.row(farthest);
      double* sum = sums.data() + static_cast<size_t>(c) * dim;
      for (uint32_t j = 0; j < dim; ++j) sum[j] = row[j];
      counts[c] = 1;
    }

    double max_shift2 = 0.0;
    for (uint32_t c = 0; c < k; ++c) {
      const double* sum = sums.data() + static_cast<size_t>(c) * dim;
      float* next = updated.data() + static_cast<size_t>(c) * dim;
      for (uint32_t j = 0; j < dim; ++j)
        next[j] = static_cast<float>(sum[j] / static_cast<double>(counts[c]));
      max_shift2 = std::max(
          max_shift2, static_cast<double>(kernel.squared_l2(
                          next, centroids.data() + static_cast<size_t>(c) * dim,
                          dim)));
    }
    centroids.swap(updated);
    ++iterations;
    if (max_shift2 <= options.tol * options.tol) break;
  }

  Codebook book;
  book.k = k;
  book.dim = dim;
  book.seed = options.seed;
  book.iterations_run = iterations;
  book.centroids = std::move(centroids);
  book.inertia = assignment_inertia(book, features, options.threads);
  return book;
}

std::vector<uint32_t> assign_ids(const Codebook& codebook,
                                 const FeatureMatrix& features, int threads) {
  features.validate();
  if (features.n_frames > 0 && features.dim != codebook.dim)
    fail("assign_ids: feature dim " + std::to_string(features.dim) +
         " does not match codebook dim " + std::to_string(codebook.dim));
  std::vector<uint32_t> assignment(features.n_frames);
  std::vector<float> distance(features.n_frames);
  assign_into(codebook.centroids.data(), codebook.k, features, threads,
              assignment.data(), distance.data());
  return assignment;
}

std::vector<std::string> assign(const Codebook& codebook,
                                const FeatureMatrix& features, int threads) {
  const std::vector<uint32_t> ids = assign_ids(codebook, features, threads);
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (uint32_t id : ids) tokens.push_back(std::to_string(id));
  return tokens;
}

double assignment_inertia(const Codebook& codebook,
                          const FeatureMatrix& features, int threads) {
  features.validate();
  std::vector<uint32_t> assignment(features.n_frames);
  std::vector<float> distance(features.n_frames);
  assign_into(codebook.centroids.data(), codebook.k, features, threads,
              assignment.data(), distance.data());
  double inertia = 0.0;
  for (float d : distance) inertia += d;
  return inertia;
}

std::vector<std::string> collapse_runs(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& tok : tokens)
    if (out.empty() || out.back() != tok) out.push_back(tok);
  return out;
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  nlohmann::json j;
  j["k"] = codebook.k;
  j["dim"] = codebook.dim;
  j["seed"] = codebook.seed;
  j["iterations_run"] = codebook.iterations_run;
  j["inertia"] = codebook.inertia;
  auto rows = nlohmann::json::array();
  for (uint32_t c = 0; c < codebook.k; ++c) {
    auto row = nlohmann::json::array();
    for (uint32_t d = 0; d < codebook.dim; ++d)
      row.push_back(codebook.centroid(c)[d]);
    rows.push_back(std::move(row));
  }
  j["centroids"] = std::move(rows);
  std::ofstream out(path);
  if (!out) fail("cannot write codebook '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open codebook '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(path.string() + ": invalid codebook JSON: " + e.what());
  }
  Codebook book;
  book.k = j.at("k").get<uint32_t>();
  book.dim = j.at("dim").get<uint32_t>();
  book.seed = j.at("seed").get<uint64_t>();
  book.iterations_run = j.at("iterations_run").get<uint32_t>();
  book.inertia = j.at("inertia").get<double>();
  const auto& rows = j.at("centroids");
  if (rows.size() != book.k)
    fail(path.string() + ": centroid count does not match k");
  book.centroids.reserve(static_cast<size_t>(book.k) * book.dim);
  for (const auto& row : rows) {
    if (row.size() != book.dim)
      fail(path.string() + ": centroid row does not match dim");
    for (const auto& v : row) book.centroids.push_back(v.get<float>());
  }
  return book;
}

}  // namespace csel
