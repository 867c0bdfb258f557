#include "csel/selector.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "csel/parallel.hpp"
#include "csel/rng.hpp"

namespace csel {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

constexpr char kHeader[] =
    "rank\taudio_id\teta\tppl_general\tppl_target\tduration_s\tcumulative_s";

std::unordered_map<std::string, const AudioDocument*> index_audios(
    const std::vector<AudioDocument>& audios) {
  std::unordered_map<std::string, const AudioDocument*> index;
  for (const auto& a : audios) index[a.audio_id] = &a;
  return index;
}

// Shared greedy prefix rule: walk the candidate order, keep audios while the
// running total fits, stop at the first one that would overflow.
SelectionResult take_prefix(Strategy strategy,
                            const std::vector<const AudioDocument*>& order,
                            double budget_s,
                            const std::vector<ContrastiveScore>* scores) {
  if (budget_s < 0.0) fail("select: budget_s must be >= 0");
  SelectionResult result;
  result.strategy = strategy;
  result.budget_s = budget_s;
  double cumulative = 0.0;
  for (size_t i = 0; i < order.size(); ++i) {
    const AudioDocument& audio = *order[i];
    if (cumulative + audio.duration_s > budget_s) break;
    cumulative += audio.duration_s;
    RankedAudio row;
    row.audio_id = audio.audio_id;
    if (scores) {
      const ContrastiveScore& s = (*scores)[i];
      row.eta = s.eta;
      row.ppl_general = s.ppl_general;
      row.ppl_target = s.ppl_target;
    }
    row.duration_s = audio.duration_s;
    row.cumulative_s = cumulative;
    result.ranked.push_back(std::move(row));
  }
  result.total_selected_s = cumulative;
  return result;
}

std::vector<size_t> eta_order(const std::vector<ContrastiveScore>& scores) {
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a].eta != scores[b].eta) return scores[a].eta < scores[b].eta;
    return scores[a].audio_id < scores[b].audio_id;
  });
  return order;
}

}  // namespace

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::contrastive:
      return "contrastive";
    case Strategy::random_order:
      return "random";
    case Strategy::categorized:
      return "categorized";
  }
  return "unknown";
}

ContrastiveScore contrastive_score(const Corpus& corpus,
                                   const AudioDocument& audio,
                                   const LanguageModel& general,
                                   const LanguageModel& target,
                                   AudioPplMode mode) {
  const auto utterances = corpus.utterances_of(audio);
  ContrastiveScore score;
  score.audio_id = audio.audio_id;
  score.ppl_general = audio_ppl(general, utterances, mode);
  score.ppl_target = audio_ppl(target, utterances, mode);
  score.eta = (score.ppl_target - score.ppl_general) / score.ppl_general;
  return score;
}

std::vector<ContrastiveScore> score_corpus(const Corpus& corpus,
                                           const LanguageModel& general,
                                           const LanguageModel& target,
                                           AudioPplMode mode, int threads) {
  std::vector<ContrastiveScore> scores(corpus.audios.size());
  parallel_chunks(corpus.audios.size(), threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i)
      scores[i] = contrastive_score(corpus, corpus.audios[i], general, target,
                                    mode);
  });
  return scores;
}

SelectionResult select_budget(const std::vector<ContrastiveScore>& scores,
                              const std::vector<AudioDocument>& audios,
                              double budget_s) {
  const auto index = index_audios(audios);
  std::unordered_set<std::string> seen;
  for (const auto& s : scores) {
    if (!seen.insert(s.audio_id).second)
      fail("select: duplicate audio_id '" + s.audio_id + "' in scores");
    if (index.find(s.audio_id) == index.end())
      fail("select: score for unknown audio '" + s.audio_id + "'");
  }
  const std::vector<size_t> order = eta_order(scores);
  std::vector<const AudioDocument*> candidates;
  std::vector<ContrastiveScore> ordered_scores;
  candidates.reserve(order.size());
  ordered_scores.reserve(order.size());
  for (size_t i : order) {
    candidates.push_back(index.at(scores[i].audio_id));
    ordered_scores.push_back(scores[i]);
  }
  return take_prefix(Strategy::contrastive, candidates, budget_s,
                     &ordered_scores);
}

SelectionResult random_baseline(const std::vector<AudioDocument>& audios,
                                double budget_s, uint64_t seed) {
  std::vector<const AudioDocument*> candidates;
  candidates.reserve(audios.size());
  for (const auto& a : audios) candidates.push_back(&a);
  Rng rng(seed);
  rng.shuffle(candidates);
  return take_prefix(Strategy::random_order, candidates, budget_s, nullptr);
}

SelectionResult categorized_baseline(const std::vector<AudioDocument>& audios,
                                     const std::string& target_label,
                                     double budget_s, uint64_t seed,
                                     bool fallback_to_rest) {
  std::vector<const AudioDocument*> matches;
  std::vector<const AudioDocument*> rest;
  for (const auto& a : audios) {
    if (!a.has_label())
      fail("categorized baseline: audio '" + a.audio_id + "' has no label");
    (a.domain_label == target_label ? matches : rest).push_back(&a);
  }
  Rng rng(seed);
  rng.shuffle(matches);
  if (fallback_to_rest) {
    rng.shuffle(rest);
    matches.insert(matches.end(), rest.begin(), rest.end());
  }
  return take_prefix(Strategy::categorized, matches, budget_s, nullptr);
}

void write_selection_tsv(const SelectionResult& result,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write selection file '" + path.string() + "'");
  out << kHeader << "\n";
  for (size_t i = 0; i < result.ranked.size(); ++i) {
    const RankedAudio& row = result.ranked[i];
    out << i + 1 << "\t" << row.audio_id << "\t"
        << (row.eta ? fixed(*row.eta, 6) : "") << "\t"
        << (row.ppl_general ? fixed(*row.ppl_general, 6) : "") << "\t"
        << (row.ppl_target ? fixed(*row.ppl_target, 6) : "") << "\t"
        << fixed(row.duration_s, 3) << "\t" << fixed(row.cumulative_s, 3)
        << "\n";
  }
  if (!out) fail("short write to selection file '" + path.string() + "'");
}

std::vector<RankedAudio> read_selection_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open selection file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    fail(path.string() + ": missing or unexpected selection header");
  std::vector<RankedAudio> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) fields.push_back(field);
    if (fields.size() < 7)
      fail(path.string() + ":" + std::to_string(line_no) +
           ": expected 7 tab-separated fields");
    RankedAudio row;
    row.audio_id = fields[1];
    if (!fields[2].empty()) row.eta = std::stod(fields[2]);
    if (!fields[3].empty()) row.ppl_general = std::stod(fields[3]);
    if (!fields[4].empty()) row.ppl_target = std::stod(fields[4]);
    row.duration_s = std::stod(fields[5]);
    row.cumulative_s = std::stod(fields[6]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_scores_tsv(const std::vector<ContrastiveScore>& scores,
                      const std::vector<AudioDocument>& audios,
                      const std::filesystem::path& path) {
  const auto index = index_audios(audios);
  std::ofstream out(path);
  if (!out) fail("cannot write scores file '" + path.string() + "'");
  out << "audio_id\teta\tppl_general\tppl_target\tduration_s\n";
  for (size_t i : eta_order(scores)) {
    const ContrastiveScore& s = scores[i];
    const auto it = index.find(s.audio_id);
    if (it == index.end())
      fail("scores: unknown audio '" + s.audio_id + "'");
    out << s.audio_id << "\t" << fixed(s.eta, 6) << "\t"
        << fixed(s.ppl_general, 6) << "\t" << fixed(s.ppl_target, 6) << "\t"
        << fixed(it->second->duration_s, 3) << "\n";
  }
  if (!out) fail("short write to scores file '" + path.string() + "'");
}

std::vector<ContrastiveScore> read_scores_tsv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scores file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) ||
      line != "audio_id\teta\tppl_general\tppl_target\tduration_s")
    fail(path.string() + ": missing or unexpected scores header");
  std::vector<ContrastiveScore> scores;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) fields.push_back(field);
    if (fields.size() < 5)
      fail(path.string() + ":" + std::to_string(line_no) +
           ": expected 5 tab-separated fields");
    ContrastiveScore s;
    s.audio_id = fields[0];
    s.eta = std::stod(fields[1]);
    s.ppl_general = std::stod(fields[2]);
    s.ppl_target = std::stod(fields[3]);
    scores.push_back(std::move(s));
  }
  return scores;
}

}  // namespace csel
