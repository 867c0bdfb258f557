#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csel/corpus.hpp"
#include "csel/ngram.hpp"

namespace csel {

enum class Stage {
  synth,
  quantize,
  bpe_train,
  tokenize,
  lm_train,
  lm_adapt,
  score,
  select,
  eval,
};

const char* stage_name(Stage stage);
std::optional<Stage> stage_from_name(const std::string& name);

// Flat key=value configuration ('#' comments, blank lines ignored). Every key
// matches a field below; unknown keys are rejected.
struct PipelineConfig {
  std::string granularity;  // word | phoneme | kmeans_id

  std::filesystem::path manifest;          // pool manifest (JSONL)
  std::filesystem::path domain_manifest;   // adaptation sample manifest
  std::filesystem::path features;          // dir of <utterance_id>.feat
  std::filesystem::path domain_features;   // dir of <utterance_id>.feat
  std::filesystem::path synthetic;         // synthetic spec; enables synth
  std::filesystem::path out_dir;

  int k = 500;
  int bpe_vocab = 5000;
  int order = 4;
  double discount = 0.75;
  double lambda = 0.5;
  double budget_s = 0.0;
  uint64_t seed = 42;
  bool seed_overridden = false;  // --seed also replaces the synth spec's seed

  size_t min_tokens = 0;
  bool collapse_runs = false;          // kmeans_id: merge repeated ids
  std::string audio_ppl = "mean";      // mean | token_weighted
  std::vector<double> eval_budgets_s;  // empty: evaluate at budget_s
  int eval_seeds = 20;
  bool categorized_fallback = false;
  std::string target_label;  // defaults to the oracle's target domain
  int threads = 0;
  uint32_t feature_dim = 8;
  double feature_noise = 0.05;

  void set(const std::string& key, const std::string& value);
  void validate() const;

  // Granularity the language models operate at (word trains through BPE).
  Granularity lm_granularity() const;
  AudioPplMode ppl_mode() const;
};

PipelineConfig load_config(const std::filesystem::path& path);
// "key=value" as passed to --override.
void apply_override(PipelineConfig& config, const std::string& assignment);

// Stage order for run_all: synth when configured, the granularity's
// tokenization stages (BPE for word, quantize for kmeans_id, none for
// phoneme), then lm-train, lm-adapt, score, select, eval.
std::vector<Stage> plan_stages(const PipelineConfig& config);

// Inputs and outputs of one stage, for dry runs and dependency errors.
struct StageIo {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
};
StageIo stage_io(Stage stage, const PipelineConfig& config);

// Runs one stage; throws with the missing file and its producing stage when
// an upstream artifact is absent. Appends a JSON line to
// <out_dir>/run_log.jsonl. Returns the files written.
std::vector<std::filesystem::path> run_stage(Stage stage,
                                             const PipelineConfig& config);

// Runs plan_stages in order; first failure aborts.
void run_all(const PipelineConfig& config);

}  // namespace csel
