#include "csel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace csel {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<double> average_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0)
    fail("rank correlation undefined: a ranking is constant");
  return cov / std::sqrt(va * vb);
}

struct Moments {
  double mean = 0.0;
  double std_dev = 0.0;
};

Moments moments(const std::vector<double>& values) {
  Moments m;
  const double n = static_cast<double>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - m.mean) * (v - m.mean);
  m.std_dev = std::sqrt(var / n);
  return m;
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "contrastive") return Strategy::contrastive;
  if (name == "random") return Strategy::random_order;
  if (name == "categorized") return Strategy::categorized;
  fail("unknown strategy '" + name + "'");
}

}  // namespace

double target_recall(const SelectionResult& selection, const Corpus& corpus,
                     const std::string& target_label) {
  double selected = 0.0;
  double matched = 0.0;
  for (const auto& row : selection.ranked) {
    const AudioDocument& audio = corpus.audio(row.audio_id);
    if (!audio.has_label())
      fail("target_recall: audio '" + audio.audio_id + "' has no label");
    selected += audio.duration_s;
    if (audio.domain_label == target_label) matched += audio.duration_s;
  }
  return selected == 0.0 ? 0.0 : matched / selected;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    fail("spearman: input lengths differ");
  if (a.size() < 2) fail("spearman: need at least 2 observations");
  return pearson(average_ranks(a), average_ranks(b));
}

double rank_correlation(const std::vector<ContrastiveScore>& scores,
                        const OracleScores& oracle) {
  std::vector<double> etas;
  std::vector<double> truths;
  etas.reserve(scores.size());
  truths.reserve(scores.size());
  for (const auto& s : scores) {
    etas.push_back(s.eta);
    truths.push_back(oracle.at(s.audio_id));
  }
  return spearman(etas, truths);
}

EvalReport budget_sweep(const Corpus& corpus,
                        const std::vector<ContrastiveScore>& scores,
                        const OracleScores* oracle,
                        const SweepOptions& options) {
  if (options.budgets_s.empty()) fail("budget_sweep: no budgets");
  for (size_t i = 0; i + 1 < options.budgets_s.size(); ++i)
    if (options.budgets_s[i] >= options.budgets_s[i + 1])
      fail("budget_sweep: budgets must be strictly ascending");
  if (options.seeds.empty()) fail("budget_sweep: no seeds");
  if (options.target_label.empty()) fail("budget_sweep: no target label");

  EvalReport report;
  report.seeds = options.seeds;
  if (oracle) {
    report.spearman_rho = rank_correlation(scores, *oracle);
    report.has_spearman = true;
  }

  for (double budget : options.budgets_s) {
    {
      const SelectionResult sel = select_budget(scores, corpus.audios, budget);
      StrategyEval e;
      e.strategy = Strategy::contrastive;
      e.budget_s = budget;
      e.target_recall = target_recall(sel, corpus, options.target_label);
      e.selected_s = sel.total_selected_s;
      if (!sel.ranked.empty()) {
        double sum = 0.0;
        for (const auto& row : sel.ranked) sum += *row.eta;
        e.selected_mean_eta = sum / static_cast<double>(sel.ranked.size());
      }
      report.entries.push_back(std::move(e));
    }

    auto aggregate = [&](Strategy strategy, auto&& make_selection) {
      std::vector<double> recalls;
      std::vector<double> totals;
      recalls.reserve(options.seeds.size());
      for (uint64_t seed : options.seeds) {
        const SelectionResult sel = make_selection(seed);
        recalls.push_back(target_recall(sel, corpus, options.target_label));
        totals.push_back(sel.total_selected_s);
      }
      const Moments recall_m = moments(recalls);
      StrategyEval e;
      e.strategy = strategy;
      e.budget_s = budget;
      e.target_recall = recall_m.mean;
      e.recall_std = recall_m.std_dev;
      e.selected_s = moments(totals).mean;
      e.seeds_used = options.seeds.size();
      report.entries.push_back(std::move(e));
    };
    aggregate(Strategy::random_order, [&](uint64_t seed) {
      return random_baseline(corpus.audios, budget, seed);
    });
    aggregate(Strategy::categorized, [&](uint64_t seed) {
      return categorized_baseline(corpus.audios, options.target_label, budget,
                                  seed, options.categorized_fallback);
    });
  }
  return report;
}

void write_eval_report(const EvalReport& report,
                       const std::filesystem::path& path) {
  nlohmann::json j;
  j["seeds"] = report.seeds;
  if (report.has_spearman) j["spearman_rho"] = report.spearman_rho;
  auto entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json ej;
    ej["strategy"] = strategy_name(e.strategy);
    ej["budget_s"] = e.budget_s;
    ej["target_recall"] = e.target_recall;
    ej["recall_std"] = e.recall_std;
    if (e.selected_mean_eta) ej["selected_mean_eta"] = *e.selected_mean_eta;
    ej["selected_s"] = e.selected_s;
    ej["seeds_used"] = e.seeds_used;
    entries.push_back(std::move(ej));
  }
  j["entries"] = std::move(entries);
  std::ofstream out(path);
  if (!out) fail("cannot write eval report '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

EvalReport load_eval_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open eval report '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(path.string() + ": invalid eval report JSON: " + e.what());
  }
  EvalReport report;
  report.seeds = j.value("seeds", std::vector<uint64_t>{});
  if (j.contains("spearman_rho")) {
    report.spearman_rho = j["spearman_rho"].get<double>();
    report.has_spearman = true;
  }
  for (const auto& ej : j.at("entries")) {
    StrategyEval e;
    e.strategy = strategy_from_name(ej.at("strategy").get<std::string>());
    e.budget_s = ej.at("budget_s").get<double>();
    e.target_recall = ej.at("target_recall").get<double>();
    e.recall_std = ej.value("recall_std", 0.0);
    if (ej.contains("selected_mean_eta"))
      e.selected_mean_eta = ej["selected_mean_eta"].get<double>();
    e.selected_s = ej.value("selected_s", 0.0);
    e.seeds_used = ej.value("seeds_used", size_t{1});
    report.entries.push_back(std::move(e));
  }
  return report;
}

void write_eval_tsv(const EvalReport& report,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write eval TSV '" + path.string() + "'");
  out << "strategy\tbudget_s\ttarget_recall\trecall_std\tselected_mean_eta\t"
         "selected_s\tseeds_used\n";
  auto fixed = [](double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return std::string(buf);
  };
  for (const auto& e : report.entries) {
    out << strategy_name(e.strategy) << "\t" << fixed(e.budget_s, 3) << "\t"
        << fixed(e.target_recall, 6) << "\t" << fixed(e.recall_std, 6) << "\t"
        << (e.selected_mean_eta ? fixed(*e.selected_mean_eta, 6) : "") << "\t"
        << fixed(e.selected_s, 3) << "\t" << e.seeds_used << "\n";
  }
  if (!out) fail("short write to eval TSV '" + path.string() + "'");
}

}  // namespace csel
