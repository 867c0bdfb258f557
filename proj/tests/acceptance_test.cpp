// Acceptance gate: every release-blocking property in one binary, one
// PASS/FAIL line each. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csel/bpe.hpp"
#include "csel/corpus.hpp"
#include "csel/eval.hpp"
#include "csel/ngram.hpp"
#include "csel/pipeline.hpp"
#include "csel/quantizer.hpp"
#include "csel/rng.hpp"
#include "csel/selector.hpp"
#include "csel/synthetic.hpp"

namespace fs = std::filesystem;
using namespace csel;

namespace {

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared fixture: the bundled default corpus scored with the production path.

struct Fixture {
  SyntheticSpec spec;
  SyntheticCorpus data;
  std::optional<NGramModel> general;
  std::optional<AdaptedModel> adapted;
  std::vector<ContrastiveScore> scores;
  std::string target_label;
  double target_total_s = 0.0;
  double pool_total_s = 0.0;
  size_t pool_tokens = 0;
};

LmOptions default_lm_options() {
  LmOptions options;
  options.order = 2;
  options.discount = 0.75;
  return options;
}

void score_fixture(Fixture& f) {
  f.general =
      NGramModel::train(token_sequences(f.data.corpus), default_lm_options());
  f.adapted = adapt(*f.general, token_sequences(f.data.adaptation), 0.5);
  f.scores = score_corpus(f.data.corpus, f.adapted->general(), *f.adapted);
  f.target_label = f.data.oracle.target_domain;
  f.target_total_s = 0.0;
  f.pool_total_s = 0.0;
  for (const auto& audio : f.data.corpus.audios) {
    f.pool_total_s += audio.duration_s;
    if (audio.domain_label == f.target_label)
      f.target_total_s += audio.duration_s;
  }
  f.pool_tokens = 0;
  for (const auto& utt : f.data.corpus.utterances)
    f.pool_tokens += utt.tokens.size();
}

Fixture build_fixture(const fs::path& configs_dir) {
  Fixture f;
  f.spec = load_synthetic_spec(configs_dir / "synthetic_default.json");
  f.data = generate_synthetic(f.spec);
  score_fixture(f);
  return f;
}

double contrastive_recall(const Fixture& f, double budget_s) {
  const SelectionResult sel =
      select_budget(f.scores, f.data.corpus.audios, budget_s);
  return target_recall(sel, f.data.corpus, f.target_label);
}

double random_recall_mean(const Fixture& f, double budget_s, uint64_t seed0,
                          int n_seeds) {
  double sum = 0.0;
  for (int i = 0; i < n_seeds; ++i) {
    const SelectionResult sel =
        random_baseline(f.data.corpus.audios, budget_s, seed0 + i);
    sum += target_recall(sel, f.data.corpus, f.target_label);
  }
  return sum / n_seeds;
}

// ---------------------------------------------------------------------------
// Check 1: eta from a (10, 8) perplexity pair.

// Constant-probability model: every scored event gets 1/ppl, so the
// utterance perplexity is the chosen value and eta is exercised through the
// production scoring path.
struct FixedPpl final : LanguageModel {
  double p;
  explicit FixedPpl(double ppl) : p(1.0 / ppl) {}
  double prob(const std::vector<std::string>&,
              const std::string&) const override {
    return p;
  }
  std::vector<double> event_probs(
      const std::vector<std::string>& tokens) const override {
    return std::vector<double>(tokens.size() + 1, p);
  }
  const std::vector<std::string>& predictable_vocab() const override {
    static const std::vector<std::string> v{kUnk, kEos};
    return v;
  }
};

bool c1_eta_exactness(std::string& detail) {
  Corpus corpus;
  Utterance u;
  u.utterance_id = "u1";
  u.audio_id = "a1";
  u.tokens = {"x"};
  u.duration_s = 1.0;
  corpus.utterances = {u};
  corpus.finalize();

  const FixedPpl general(10.0), target(8.0);
  const ContrastiveScore s =
      contrastive_score(corpus, corpus.audio("a1"), general, target);
  const double err = std::abs(s.eta - (-0.2));
  const ContrastiveScore same =
      contrastive_score(corpus, corpus.audio("a1"), general, general);
  detail = "eta(10,8) = " + fmt("%.17g", s.eta) + ", |err| = " +
           fmt("%.3g", err) + ", eta(equal) = " + fmt("%.17g", same.eta);
  return err <= 1e-12 && same.eta == 0.0;
}

// ---------------------------------------------------------------------------
// Check 2: unigram hand value and count-ratio equivalence.

// Independent reference for the zero-discount estimator: recursive maximum
// likelihood over raw event counts with pure fallthrough on unseen contexts.
struct CountRef {
  int order;
  std::set<std::string> vocab;
  std::map<std::vector<std::string>, double> count;
  std::map<std::vector<std::string>, double> total;

  CountRef(const std::vector<std::vector<std::string>>& corpus, int order_in)
      : order(order_in) {
    for (const auto& utt : corpus)
      for (const auto& tok : utt) vocab.insert(tok);
    for (const auto& utt : corpus) {
      std::vector<std::string> stream(order - 1, kBos);
      for (const auto& tok : utt) stream.push_back(tok);
      stream.push_back(kEos);
      for (size_t i = order - 1; i < stream.size(); ++i) {
        for (int k = 1; k <= order; ++k) {
          const std::vector<std::string> gram(stream.begin() + i - (k - 1),
                                              stream.begin() + i + 1);
          count[gram] += 1.0;
          total[std::vector<std::string>(gram.begin(), gram.end() - 1)] += 1.0;
        }
      }
    }
  }

  std::string map_token(const std::string& tok) const {
    if (tok == kEos) return tok;
    return vocab.count(tok) ? tok : kUnk;
  }

  double p(std::vector<std::string> history, const std::string& event) const {
    if (history.size() > static_cast<size_t>(order - 1))
      history.erase(history.begin(),
                    history.end() - static_cast<size_t>(order - 1));
    for (auto& h : history)
      if (h != kBos) h = map_token(h);
    const std::string w = map_token(event);
    while (true) {
      auto t = total.find(history);
      if (t != total.end() && t->second > 0.0) {
        std::vector<std::string> gram = history;
        gram.push_back(w);
        auto c = count.find(gram);
        return (c == count.end() ? 0.0 : c->second) / t->second;
      }
      if (history.empty()) return 0.0;
      history.erase(history.begin());
    }
  }
};

bool c2_lm_oracle(std::string& detail) {
  LmOptions unigram;
  unigram.order = 1;
  unigram.discount = 0.0;
  const NGramModel hand = NGramModel::train({{"a", "a", "b"}}, unigram);
  const double ppl = utterance_ppl(hand, {"a", "a", "b"});
  const double want = 2.0 * std::sqrt(2.0);
  const double err = std::abs(ppl - want);
  if (err > 1e-9) {
    detail = "hand-corpus PPL = " + fmt("%.12f", ppl);
    return false;
  }

  const std::vector<std::vector<std::vector<std::string>>> corpora = {
      {{"a", "a", "b"}},
      {{"a", "b", "a", "b", "a"}, {"b", "b", "a"}},
      {{"x", "y", "z", "z", "y"}, {"z", "z", "z"}, {"y", "x"}},
      {{"a"}, {"b", "a", "a", "b", "c", "a", "b", "b", "c", "a"}}};

  size_t checked = 0;
  double worst = 0.0;
  for (const auto& corpus : corpora) {
    for (int order = 1; order <= 2; ++order) {
      LmOptions options;
      options.order = order;
      options.discount = 0.0;
      const NGramModel model = NGramModel::train(corpus, options);
      const CountRef ref(corpus, order);

      std::vector<std::string> probe(ref.vocab.begin(), ref.vocab.end());
      probe.push_back("zz");  // out of vocabulary
      std::vector<std::vector<std::string>> histories = {{}};
      for (const auto& h1 : probe) {
        histories.push_back({h1});
        for (const auto& h2 : probe) histories.push_back({h1, h2});
      }
      std::vector<std::string> events = model.predictable_vocab();
      events.push_back("zz");
      for (const auto& history : histories) {
        for (const auto& event : events) {
          const double got = model.prob(history, event);
          const double ref_p = ref.p(history, event);
          worst = std::max(worst, std::abs(got - ref_p));
          ++checked;
        }
      }
    }
  }
  detail = "hand-corpus PPL err " + fmt("%.2g", err) + "; " +
           std::to_string(checked) + " count-ratio probes, worst gap " +
           fmt("%.3g", worst);
  return worst <= 1e-12;
}

// ---------------------------------------------------------------------------
// Check 3: per-context normalization on a real-sized model.

bool c3_normalization(const Fixture& f, std::string& detail) {
  if (f.pool_tokens < 10000) {
    detail = "training corpus too small: " + std::to_string(f.pool_tokens) +
             " tokens";
    return false;
  }
  LmOptions options;
  options.order = 3;
  options.discount = 0.75;
  const NGramModel model =
      NGramModel::train(token_sequences(f.data.corpus), options);

  std::vector<std::string> pool = model.regular_vocab();
  pool.push_back(kBos);
  pool.push_back(kEos);
  pool.push_back("zz");  // unseen token backs off through the unknown symbol

  Rng rng(20240101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> history(rng.below(options.order), "");
    for (auto& h : history) h = pool[rng.below(pool.size())];
    double sum = 0.0;
    for (const auto& w : model.predictable_vocab()) sum += model.prob(history, w);
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  detail = "1000 contexts on " + std::to_string(f.pool_tokens) +
           " training tokens, worst |sum-1| = " + fmt("%.3g", worst);
  return worst <= 1e-6;
}

// ---------------------------------------------------------------------------
// Check 4: contrastive beats random on the default corpus.

bool c4_beats_random(const Fixture& f, std::string& detail) {
  const double recall = contrastive_recall(f, f.target_total_s);
  const double random_mean =
      random_recall_mean(f, f.target_total_s, 1, 1000);

  int middle_violations = 0;
  int chain_violations = 0;
  for (uint64_t i = 1; i <= 20; ++i) {
    Fixture g;
    g.spec = f.spec;
    g.spec.seed = f.spec.seed + i;
    g.data = generate_synthetic(g.spec);
    score_fixture(g);
    const double r_c = contrastive_recall(g, g.target_total_s);
    const double r_r = random_recall_mean(g, g.target_total_s, 100, 50);
    const SelectionResult cat = categorized_baseline(
        g.data.corpus.audios, g.target_label, g.target_total_s, 7);
    const double r_k = target_recall(cat, g.data.corpus, g.target_label);
    if (r_c < r_r) ++middle_violations;
    if (r_k < r_c || r_c < r_r) ++chain_violations;
  }

  detail = "recall " + fmt("%.4f", recall) + " at the target-domain budget; "
           "random mean " + fmt("%.4f", random_mean) + " over 1000 seeds; " +
           std::to_string(chain_violations) +
           " chain violation(s) over 20 corpus seeds";
  return recall >= 0.9 && std::abs(random_mean - 0.20) <= 0.03 &&
         middle_violations <= 1 && chain_violations <= 1;
}

// ---------------------------------------------------------------------------
// Check 5: contrastive stays above random across the budget sweep.

bool c5_budget_sweep(const Fixture& f, std::string& detail) {
  std::ostringstream os;
  bool ok = true;
  for (double share : {0.5, 0.6, 0.8, 1.0}) {
    const double budget = share * f.target_total_s;
    const double r_c = contrastive_recall(f, budget);
    const double r_r = random_recall_mean(f, budget, 1, 200);
    if (r_c < r_r) ok = false;
    os << fmt("%.0f", share * 100) << "%: " << fmt("%.3f", r_c) << " vs "
       << fmt("%.3f", r_r) << "  ";
  }
  detail = "contrastive vs random recall at " + os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// Check 6: eta ranks audios like the generator's likelihood ratio.

bool c6_rank_fidelity(const Fixture& f, std::string& detail) {
  const double rho = rank_correlation(f.scores, f.data.oracle);
  detail = "Spearman rho = " + fmt("%.4f", rho) + " over " +
           std::to_string(f.scores.size()) + " audios";
  return f.scores.size() == 200 && rho >= 0.8;
}

// ---------------------------------------------------------------------------
// Check 7: all three granularities run end to end and beat random.

struct RunOutcome {
  double contrastive = 0.0;
  double random_mean = 0.0;
  bool valid = false;
};

RunOutcome run_granularity(const fs::path& configs_dir, const fs::path& work,
                           const std::string& granularity, double budget_s) {
  PipelineConfig config;
  config.granularity = granularity;
  config.synthetic = configs_dir / "synthetic_default.json";
  config.out_dir = work / granularity;
  config.order = 2;
  config.discount = 0.75;
  config.lambda = 0.5;
  config.budget_s = budget_s;
  config.eval_seeds = 20;
  config.bpe_vocab = 300;
  config.k = 16;
  config.feature_dim = 8;
  config.feature_noise = 0.05;
  run_all(config);

  RunOutcome outcome;
  const EvalReport report = load_eval_report(config.out_dir / "eval.json");
  for (const auto& e : report.entries) {
    if (e.strategy == Strategy::contrastive) outcome.contrastive = e.target_recall;
    if (e.strategy == Strategy::random_order) outcome.random_mean = e.target_recall;
  }

  const Corpus pool = load_manifest(config.out_dir / "synth_pool.jsonl",
                                    Granularity::word());
  const auto rows = read_selection_tsv(config.out_dir / "selection.tsv");
  outcome.valid = !rows.empty();
  double cumulative = 0.0;
  for (const auto& row : rows) {
    if (!pool.has_audio(row.audio_id)) outcome.valid = false;
    cumulative += row.duration_s;
    if (std::abs(cumulative - row.cumulative_s) > 1e-2) outcome.valid = false;
  }
  if (cumulative > budget_s + 1e-6) outcome.valid = false;
  return outcome;
}

bool c7_granularity_parity(const Fixture& f, const fs::path& configs_dir,
                           const fs::path& work, std::string& detail) {
  std::ostringstream os;
  bool ok = true;
  for (const std::string granularity : {"kmeans_id", "phoneme", "word"}) {
    const RunOutcome o =
        run_granularity(configs_dir, work, granularity, f.target_total_s);
    if (!o.valid || o.contrastive <= o.random_mean) ok = false;
    os << granularity << ": " << (o.valid ? "valid" : "INVALID") << ", "
       << fmt("%.3f", o.contrastive) << " vs random " << fmt("%.3f", o.random_mean)
       << "  ";
  }
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// Check 8: byte-identical reruns.

bool c8_determinism(const Fixture& f, const fs::path& configs_dir,
                    const fs::path& work, std::string& detail) {
  PipelineConfig config;
  config.granularity = "phoneme";
  config.synthetic = configs_dir / "synthetic_default.json";
  config.order = 2;
  config.discount = 0.75;
  config.budget_s = f.target_total_s;
  config.eval_seeds = 20;

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  config.out_dir = work / "rerun_a";
  run_all(config);
  config.out_dir = work / "rerun_b";
  run_all(config);

  const bool selection_same = slurp(work / "rerun_a" / "selection.tsv") ==
                              slurp(work / "rerun_b" / "selection.tsv");
  const bool eval_same = slurp(work / "rerun_a" / "eval.json") ==
                         slurp(work / "rerun_b" / "eval.json");
  detail = std::string("selection.tsv ") +
           (selection_same ? "identical" : "DIFFERS") + ", eval.json " +
           (eval_same ? "identical" : "DIFFERS");
  return selection_same && eval_same;
}

// ---------------------------------------------------------------------------
// Check 9: k-means recovery and inertia monotonicity.

long long pair_count(long long n) { return n * (n - 1) / 2; }

double adjusted_rand_index(const std::vector<uint32_t>& a,
                           const std::vector<int>& b) {
  const uint32_t ka = *std::max_element(a.begin(), a.end()) + 1;
  const int kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<long long>> table(ka, std::vector<long long>(kb, 0));
  for (size_t i = 0; i < a.size(); ++i) ++table[a[i]][b[i]];
  long long index = 0, rows = 0, cols = 0;
  std::vector<long long> row_sum(ka, 0), col_sum(kb, 0);
  for (uint32_t i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) {
      index += pair_count(table[i][j]);
      row_sum[i] += table[i][j];
      col_sum[j] += table[i][j];
    }
  for (long long r : row_sum) rows += pair_count(r);
  for (long long c : col_sum) cols += pair_count(c);
  const double total = static_cast<double>(pair_count((long long)a.size()));
  const double expected = static_cast<double>(rows) * cols / total;
  const double max_index = (rows + cols) / 2.0;
  return (index - expected) / (max_index - expected);
}

bool monotone_trace(const std::vector<double>& trace) {
  for (size_t i = 0; i + 1 < trace.size(); ++i)
    if (trace[i + 1] > trace[i] * (1.0 + 1e-12) + 1e-9) return false;
  return true;
}

bool c9_kmeans(std::string& detail) {
  const float centers[3][2] = {{0.0f, 0.0f}, {10.0f, 10.0f}, {-10.0f, 10.0f}};
  std::mt19937 eng(4242);
  std::uniform_real_distribution<float> jitter(-0.5f, 0.5f);
  FeatureMatrix blobs;
  blobs.dim = 2;
  std::vector<int> truth;
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < 60; ++i) {
      blobs.values.push_back(centers[b][0] + jitter(eng));
      blobs.values.push_back(centers[b][1] + jitter(eng));
      truth.push_back(b);
      ++blobs.n_frames;
    }

  FitOptions options;
  options.k = 3;
  options.seed = 7;
  std::vector<double> trace;
  options.inertia_trace = &trace;
  const Codebook book = fit_codebook(blobs, options);
  const double ari = adjusted_rand_index(assign_ids(book, blobs), truth);
  bool monotone = monotone_trace(trace);

  // Harder fixture: uniform noise, k larger than any natural structure.
  std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
  FeatureMatrix noise;
  noise.n_frames = 500;
  noise.dim = 6;
  noise.values.resize(500 * 6);
  for (auto& v : noise.values) v = unit(eng);
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    FitOptions o2;
    o2.k = 16;
    o2.seed = seed;
    std::vector<double> t2;
    o2.inertia_trace = &t2;
    fit_codebook(noise, o2);
    if (!monotone_trace(t2)) monotone = false;
  }
  detail = "3-blob ARI = " + fmt("%.4f", ari) + ", inertia " +
           (monotone ? "non-increasing on all fixtures" : "INCREASED");
  return ari == 1.0 && monotone;
}

// ---------------------------------------------------------------------------
// Check 10: BPE round-trip and hand-counted first merge.

bool c10_bpe(std::string& detail) {
  const BpeModel low = train_bpe({"low", "lower", "lowest"}, 30);
  const bool first_merge_ok =
      !low.merges.empty() && low.merges[0] == std::make_pair(std::string("l"),
                                                             std::string("o"));

  std::mt19937 eng(99);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::vector<std::string> words;
  words.reserve(1000);
  for (int i = 0; i < 1000; ++i) {
    std::string w;
    const int n = len(eng);
    for (int j = 0; j < n; ++j) w.push_back(static_cast<char>(ch(eng)));
    words.push_back(std::move(w));
  }
  const BpeModel model = train_bpe(words, 400);
  size_t mismatches = 0;
  for (const auto& w : words)
    if (decode(model, encode(model, {w})) != std::vector<std::string>{w})
      ++mismatches;

  detail = "first merge " +
           (low.merges.empty()
                ? std::string("(none)")
                : "(" + low.merges[0].first + ", " + low.merges[0].second + ")") +
           "; " + std::to_string(mismatches) + "/1000 round-trip mismatches";
  return first_merge_ok && mismatches == 0;
}

struct WorkDir {
  fs::path path;
  WorkDir() {
    path = fs::temp_directory_path() /
           ("csel_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~WorkDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

int main(int argc, char** argv) {
  const fs::path configs_dir = argc > 1 ? fs::path(argv[1]) : fs::path("configs");
  WorkDir work;

  int failures = 0;
  int index = 0;
  auto run = [&](const char* name, auto&& criterion) {
    ++index;
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = criterion(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] %2d %s: %s (%.1fs)\n", ok ? "PASS" : "FAIL", index, name,
                detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!ok) ++failures;
  };

  std::optional<Fixture> fixture;
  try {
    fixture = build_fixture(configs_dir);
  } catch (const std::exception& e) {
    std::printf("[FAIL]  0 fixture: %s\n", e.what());
    return 1;
  }
  const Fixture& f = *fixture;

  run("eta exactness", [&](std::string& d) { return c1_eta_exactness(d); });
  run("LM hand values and count ratios",
      [&](std::string& d) { return c2_lm_oracle(d); });
  run("per-context normalization",
      [&](std::string& d) { return c3_normalization(f, d); });
  run("selection beats random",
      [&](std::string& d) { return c4_beats_random(f, d); });
  run("budget sweep dominance",
      [&](std::string& d) { return c5_budget_sweep(f, d); });
  run("rank fidelity against the oracle",
      [&](std::string& d) { return c6_rank_fidelity(f, d); });
  run("granularity parity",
      [&](std::string& d) { return c7_granularity_parity(f, configs_dir, work.path, d); });
  run("deterministic reruns",
      [&](std::string& d) { return c8_determinism(f, configs_dir, work.path, d); });
  run("k-means recovery", [&](std::string& d) { return c9_kmeans(d); });
  run("BPE round-trip", [&](std::string& d) { return c10_bpe(d); });

  std::printf("%d/%d criteria passed\n", index - failures, index);
  return failures == 0 ? 0 : 1;
}
