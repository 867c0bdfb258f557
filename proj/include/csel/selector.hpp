#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csel/corpus.hpp"
#include "csel/ngram.hpp"

namespace csel {

struct ContrastiveScore {
  std::string audio_id;
  double ppl_general = 0.0;  // mean PPL under the general model
  double ppl_target = 0.0;   // mean PPL under the adapted model
  double eta = 0.0;          // (ppl_target - ppl_general) / ppl_general
};

enum class Strategy { contrastive, random_order, categorized };

const char* strategy_name(Strategy s);

struct RankedAudio {
  std::string audio_id;
  std::optional<double> eta;  // baselines carry no score
  std::optional<double> ppl_general;
  std::optional<double> ppl_target;
  double duration_s = 0.0;
  double cumulative_s = 0.0;
};

struct SelectionResult {
  Strategy strategy = Strategy::contrastive;
  std::vector<RankedAudio> ranked;  // selected audios only, in rank order
  double budget_s = 0.0;
  double total_selected_s = 0.0;
};

// eta = (ppl_target - ppl_general) / ppl_general over the audio's utterances.
ContrastiveScore contrastive_score(const Corpus& corpus,
                                   const AudioDocument& audio,
                                   const LanguageModel& general,
                                   const LanguageModel& target,
                                   AudioPplMode mode = AudioPplMode::mean_of_utterances);

// One score per audio, corpus order; scoring is parallel over audios.
std::vector<ContrastiveScore> score_corpus(
    const Corpus& corpus, const LanguageModel& general,
    const LanguageModel& target,
    AudioPplMode mode = AudioPplMode::mean_of_utterances, int threads = 0);

// Ascending eta (ties by audio_id), then a greedy prefix: take audios while
// the running total stays within budget_s and stop at the first overflow.
SelectionResult select_budget(const std::vector<ContrastiveScore>& scores,
                              const std::vector<AudioDocument>& audios,
                              double budget_s);

// Uniform shuffle by seed, then the same greedy prefix rule.
SelectionResult random_baseline(const std::vector<AudioDocument>& audios,
                                double budget_s, uint64_t seed);

// Label oracle: target-labeled audios first (shuffled by seed), then the
// greedy prefix rule. With fallback_to_rest the remaining audios follow,
// also shuffled; otherwise the candidate pool is the labeled matches alone.
SelectionResult categorized_baseline(const std::vector<AudioDocument>& audios,
                                     const std::string& target_label,
                                     double budget_s, uint64_t seed,
                                     bool fallback_to_rest = false);

// TSV: rank, audio_id, eta, ppl_general, ppl_target, duration_s,
// cumulative_s. eta and the PPL columns are empty for baselines; eta is
// written with 6 decimal places.
void write_selection_tsv(const SelectionResult& result,
                         const std::filesystem::path& path);
std::vector<RankedAudio> read_selection_tsv(const std::filesystem::path& path);

// Full ranking (every audio, ascending eta) for inspection between the score
// and select stages: audio_id, eta, ppl_general, ppl_target, duration_s.
void write_scores_tsv(const std::vector<ContrastiveScore>& scores,
                      const std::vector<AudioDocument>& audios,
                      const std::filesystem::path& path);
std::vector<ContrastiveScore> read_scores_tsv(
    const std::filesystem::path& path);

}  // namespace csel
