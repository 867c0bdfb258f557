#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csel/corpus.hpp"
#include "csel/selector.hpp"
#include "csel/synthetic.hpp"

namespace csel {

// One line of a sweep: a strategy evaluated at one budget. Random and
// categorized entries aggregate over the sweep seeds (mean and population
// standard deviation); deterministic strategies report std 0.
struct StrategyEval {
  Strategy strategy = Strategy::contrastive;
  double budget_s = 0.0;
  double target_recall = 0.0;
  double recall_std = 0.0;
  std::optional<double> selected_mean_eta;  // contrastive only
  double selected_s = 0.0;  // seconds actually selected (mean over seeds)
  size_t seeds_used = 1;
};

struct EvalReport {
  std::vector<StrategyEval> entries;
  bool has_spearman = false;
  double spearman_rho = 0.0;  // eta against the oracle, when one is given
  std::vector<uint64_t> seeds;
};

// Target-labeled selected seconds / total selected seconds; 0 when empty.
double target_recall(const SelectionResult& selection, const Corpus& corpus,
                     const std::string& target_label);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// eta against oracle scores, paired by audio_id.
double rank_correlation(const std::vector<ContrastiveScore>& scores,
                        const OracleScores& oracle);

struct SweepOptions {
  std::vector<double> budgets_s;  // strictly ascending
  std::vector<uint64_t> seeds;    // shuffling seeds for the baselines
  std::string target_label;
  bool categorized_fallback = false;
};

// One entry per (budget, strategy); strategies run contrastive, random,
// categorized at each budget. Deterministic given corpus, scores and seeds.
EvalReport budget_sweep(const Corpus& corpus,
                        const std::vector<ContrastiveScore>& scores,
                        const OracleScores* oracle, const SweepOptions& options);

void write_eval_report(const EvalReport& report,
                       const std::filesystem::path& path);
EvalReport load_eval_report(const std::filesystem::path& path);

// Flat export for plotting: one row per entry.
void write_eval_tsv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace csel
