#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "csel/corpus.hpp"
#include "csel/quantizer.hpp"

namespace csel {

// One Markov token source. Tokens are drawn from `initial` for the first
// position and from the `transitions` row of the previous token afterwards.
struct DomainSpec {
  std::string name;
  std::vector<std::string> alphabet;
  std::vector<std::vector<double>> transitions;  // |A| x |A|, row-stochastic
  std::vector<double> initial;                   // defaults to uniform
  int audio_count = 1;
  std::pair<int, int> utterances_per_audio{1, 1};
  std::pair<int, int> utterance_length{1, 1};
};

struct AdaptationSpec {
  // Held-out target-domain utterances emitted as the LM2 adaptation text.
  int utterance_count = 0;
  std::pair<int, int> utterance_length{5, 30};
};

struct SyntheticSpec {
  uint64_t seed = 0;
  std::vector<DomainSpec> domains;
  std::string target_domain;  // empty = first domain
  AdaptationSpec adaptation;
  double seconds_per_token = 0.5;

  const DomainSpec& target() const;
  void validate() const;
};

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
SyntheticSpec parse_synthetic_spec(const std::string& json_text);
void save_synthetic_spec(const SyntheticSpec& spec,
                         const std::filesystem::path& path);

// Ground-truth per-audio score: mean per-token ln(P_mixture / P_target) over
// the audio's realized tokens, mixture weighted by realized per-domain token
// counts. Lower = more target-typical, matching the orientation of eta.
struct OracleScores {
  std::string target_domain;
  std::unordered_map<std::string, double> by_audio;

  double at(const std::string& audio_id) const;
};

void save_oracle(const OracleScores& oracle, const std::filesystem::path& path);
OracleScores load_oracle(const std::filesystem::path& path);

struct SyntheticCorpus {
  Corpus corpus;      // labeled selection pool
  Corpus adaptation;  // target-domain sample, outside the pool
  OracleScores oracle;
};

// Pure function of the spec (including its seed): repeated calls are
// byte-identical after serialization.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Frame features for the kmeans_id pipeline path: every distinct token maps to
// a stable direction on the unit sphere (seed-salted), each token emits one
// frame = center + N(0, noise_sigma^2) per dimension.
struct FeatureSynthesisOptions {
  uint32_t dim = 8;
  double noise_sigma = 0.05;
  uint64_t seed = 0;
  // Distinguishes the noise stream between calls sharing one seed (token
  // centers depend on the seed alone, so they stay aligned across calls).
  std::string stream;
};

FeatureMatrix synthesize_features(const std::vector<std::string>& tokens,
                                  const FeatureSynthesisOptions& options);

}  // namespace csel
