#include "csel/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "csel/bpe.hpp"
#include "csel/eval.hpp"
#include "csel/quantizer.hpp"
#include "csel/rng.hpp"
#include "csel/selector.hpp"
#include "csel/synthetic.hpp"
#include "json.hpp"

namespace csel {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

struct StageName {
  Stage stage;
  const char* name;
};

constexpr StageName kStageNames[] = {
    {Stage::synth, "synth"},       {Stage::quantize, "quantize"},
    {Stage::bpe_train, "bpe-train"}, {Stage::tokenize, "tokenize"},
    {Stage::lm_train, "lm-train"}, {Stage::lm_adapt, "lm-adapt"},
    {Stage::score, "score"},       {Stage::select, "select"},
    {Stage::eval, "eval"},
};

int to_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail("config: " + key + " expects an integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail("config: " + key + " expects a number, got '" + value + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail("config: " + key + " expects an unsigned integer, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail("config: " + key + " expects true or false, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// A stage input with the party responsible for producing it, so dependency
// errors can say what to run (or fix) first.
struct Artifact {
  fs::path path;
  std::string producer;  // stage name, or "config key '<key>'"
};

void require(const Artifact& artifact) {
  if (fs::exists(artifact.path)) return;
  if (artifact.producer.rfind("config", 0) == 0)
    fail("missing input '" + artifact.path.string() + "' (set by " +
         artifact.producer + "; check the path)");
  fail("missing input '" + artifact.path.string() + "' (produced by the " +
       artifact.producer + " stage; run it first)");
}

bool from_synth(const PipelineConfig& c) { return !c.synthetic.empty(); }

Artifact pool_source(const PipelineConfig& c) {
  if (from_synth(c)) return {c.out_dir / "synth_pool.jsonl", "synth"};
  return {c.manifest, "config key 'manifest'"};
}

Artifact domain_source(const PipelineConfig& c) {
  if (from_synth(c)) return {c.out_dir / "synth_domain.jsonl", "synth"};
  return {c.domain_manifest, "config key 'domain_manifest'"};
}

Artifact features_source(const PipelineConfig& c) {
  if (from_synth(c)) return {c.out_dir / "features", "synth"};
  return {c.features, "config key 'features'"};
}

Artifact domain_features_source(const PipelineConfig& c) {
  if (from_synth(c)) return {c.out_dir / "domain_features", "synth"};
  return {c.domain_features, "config key 'domain_features'"};
}

// Token manifests the LM stages consume. The phoneme path reads its source
// manifest directly; the others read the quantize/tokenize outputs.
Artifact pool_tokens(const PipelineConfig& c) {
  if (c.granularity == "phoneme") return pool_source(c);
  return {c.out_dir / "pool_tokens.jsonl",
          c.granularity == "word" ? "tokenize" : "quantize"};
}

Artifact domain_tokens(const PipelineConfig& c) {
  if (c.granularity == "phoneme") return domain_source(c);
  return {c.out_dir / "domain_tokens.jsonl",
          c.granularity == "word" ? "tokenize" : "quantize"};
}

LoadOptions source_load_options(const PipelineConfig& c) {
  LoadOptions options;
  options.min_tokens = c.min_tokens;
  return options;
}

// min_tokens filters raw source manifests only; re-filtering tokenized
// manifests would measure sub-word or frame counts instead.
Corpus load_pool_tokens(const PipelineConfig& c) {
  const Artifact artifact = pool_tokens(c);
  require(artifact);
  return load_manifest(artifact.path, c.lm_granularity(),
                       c.granularity == "phoneme" ? source_load_options(c)
                                                  : LoadOptions{});
}

Corpus load_domain_tokens(const PipelineConfig& c) {
  const Artifact artifact = domain_tokens(c);
  require(artifact);
  return load_manifest(artifact.path, c.lm_granularity(),
                       c.granularity == "phoneme" ? source_load_options(c)
                                                  : LoadOptions{});
}

FeatureMatrix read_utterance_features(const fs::path& dir,
                                      const std::string& utterance_id,
                                      const std::string& producer) {
  const Artifact artifact{dir / (utterance_id + ".feat"), producer};
  require(artifact);
  FeatureMatrix m = read_features(artifact.path);
  if (m.n_frames == 0)
    fail("features file '" + artifact.path.string() + "' has no frames");
  return m;
}

std::vector<fs::path> stage_synth(const PipelineConfig& c) {
  SyntheticSpec spec = load_synthetic_spec(c.synthetic);
  if (c.seed_overridden) spec.seed = c.seed;
  const SyntheticCorpus sc = generate_synthetic(spec);

  std::vector<fs::path> outputs;
  const fs::path pool_path = c.out_dir / "synth_pool.jsonl";
  const fs::path domain_path = c.out_dir / "synth_domain.jsonl";
  const fs::path oracle_path = c.out_dir / "oracle.json";
  write_manifest(sc.corpus, pool_path);
  write_manifest(sc.adaptation, domain_path);
  save_oracle(sc.oracle, oracle_path);
  outputs = {pool_path, domain_path, oracle_path};

  if (c.granularity == "kmeans_id") {
    const uint64_t feature_seed = salted_seed(spec.seed, "features");
    auto emit = [&](const Corpus& corpus, const fs::path& dir) {
      fs::create_directories(dir);
      for (const auto& utt : corpus.utterances) {
        FeatureSynthesisOptions options;
        options.dim = c.feature_dim;
        options.noise_sigma = c.feature_noise;
        options.seed = feature_seed;
        options.stream = utt.utterance_id;
        write_features(synthesize_features(utt.tokens, options),
                       dir / (utt.utterance_id + ".feat"));
      }
      outputs.push_back(dir);
    };
    emit(sc.corpus, c.out_dir / "features");
    emit(sc.adaptation, c.out_dir / "domain_features");
  }
  return outputs;
}

std::vector<fs::path> stage_quantize(const PipelineConfig& c) {
  const Artifact pool_art = pool_source(c);
  const Artifact domain_art = domain_source(c);
  require(pool_art);
  require(domain_art);
  Corpus pool =
      load_manifest(pool_art.path, Granularity::word(), source_load_options(c));
  Corpus domain = load_manifest(domain_art.path, Granularity::word(),
                                source_load_options(c));
  const Artifact feat_dir = features_source(c);
  const Artifact domain_feat_dir = domain_features_source(c);
  require(feat_dir);
  require(domain_feat_dir);

  // Fit on the pool's frames; utterance boundaries are kept for assignment.
  std::vector<FeatureMatrix> per_utterance;
  per_utterance.reserve(pool.utterances.size());
  FeatureMatrix all;
  for (const auto& utt : pool.utterances) {
    FeatureMatrix m = read_utterance_features(feat_dir.path, utt.utterance_id,
                                              feat_dir.producer);
    if (all.n_frames == 0) {
      all.dim = m.dim;
    } else if (m.dim != all.dim) {
      fail("features for utterance '" + utt.utterance_id + "' have dim " +
           std::to_string(m.dim) + ", expected " + std::to_string(all.dim));
    }
    all.n_frames += m.n_frames;
    all.values.insert(all.values.end(), m.values.begin(), m.values.end());
    per_utterance.push_back(std::move(m));
  }

  FitOptions fit;
  fit.k = static_cast<uint32_t>(c.k);
  fit.seed = salted_seed(c.seed, "quantize");
  fit.threads = c.threads;
  const Codebook codebook = fit_codebook(all, fit);
  const fs::path codebook_path = c.out_dir / "codebook.json";
  save_codebook(codebook, codebook_path);

  auto tokenize_with = [&](Corpus& corpus, const Artifact& dir,
                           std::vector<FeatureMatrix>* cached) {
    for (size_t i = 0; i < corpus.utterances.size(); ++i) {
      Utterance& utt = corpus.utterances[i];
      const FeatureMatrix m =
          cached ? std::move((*cached)[i])
                 : read_utterance_features(dir.path, utt.utterance_id,
                                           dir.producer);
      utt.tokens = assign(codebook, m, c.threads);
      if (c.collapse_runs) utt.tokens = collapse_runs(utt.tokens);
    }
    corpus.granularity = Granularity::kmeans_id(c.k);
  };
  tokenize_with(pool, feat_dir, &per_utterance);
  tokenize_with(domain, domain_feat_dir, nullptr);

  const fs::path pool_out = c.out_dir / "pool_tokens.jsonl";
  const fs::path domain_out = c.out_dir / "domain_tokens.jsonl";
  write_manifest(pool, pool_out);
  write_manifest(domain, domain_out);
  return {codebook_path, pool_out, domain_out};
}

std::vector<fs::path> stage_bpe_train(const PipelineConfig& c) {
  const Artifact pool_art = pool_source(c);
  require(pool_art);
  const Corpus pool =
      load_manifest(pool_art.path, Granularity::word(), source_load_options(c));
  std::vector<std::string> words;
  for (const auto& utt : pool.utterances)
    words.insert(words.end(), utt.tokens.begin(), utt.tokens.end());
  const BpeModel model = train_bpe(words, c.bpe_vocab);
  const fs::path model_path = c.out_dir / "bpe.model";
  save_bpe(model, model_path);
  return {model_path};
}

std::vector<fs::path> stage_tokenize(const PipelineConfig& c) {
  const Artifact model_art{c.out_dir / "bpe.model", "bpe-train"};
  require(model_art);
  const BpeModel model = load_bpe(model_art.path);

  auto apply = [&](const Artifact& source, const fs::path& out_path) {
    require(source);
    Corpus corpus = load_manifest(source.path, Granularity::word(),
                                  source_load_options(c));
    for (auto& utt : corpus.utterances) utt.tokens = encode(model, utt.tokens);
    corpus.granularity = Granularity::subword(c.bpe_vocab);
    write_manifest(corpus, out_path);
  };
  const fs::path pool_out = c.out_dir / "pool_tokens.jsonl";
  const fs::path domain_out = c.out_dir / "domain_tokens.jsonl";
  apply(pool_source(c), pool_out);
  apply(domain_source(c), domain_out);
  return {pool_out, domain_out};
}

std::vector<fs::path> stage_lm_train(const PipelineConfig& c) {
  const Corpus pool = load_pool_tokens(c);
  LmOptions options;
  options.order = c.order;
  options.discount = c.discount;
  const NGramModel general = NGramModel::train(token_sequences(pool), options);
  const fs::path arpa = c.out_dir / "lm_general.arpa";
  const fs::path sidecar = c.out_dir / "lm_general.json";
  general.save(arpa, sidecar);
  return {arpa, sidecar};
}

std::vector<fs::path> stage_lm_adapt(const PipelineConfig& c) {
  const Artifact arpa{c.out_dir / "lm_general.arpa", "lm-train"};
  const Artifact sidecar{c.out_dir / "lm_general.json", "lm-train"};
  require(arpa);
  require(sidecar);
  NGramModel general = NGramModel::load(arpa.path, sidecar.path);
  const Corpus domain = load_domain_tokens(c);
  const AdaptedModel adapted =
      adapt(std::move(general), token_sequences(domain), c.lambda);
  const fs::path domain_arpa = c.out_dir / "lm_domain.arpa";
  const fs::path adapted_sidecar = c.out_dir / "lm_adapted.json";
  save_adapted(adapted, arpa.path, domain_arpa, adapted_sidecar);
  return {domain_arpa, adapted_sidecar};
}

std::vector<fs::path> stage_score(const PipelineConfig& c) {
  const Artifact sidecar{c.out_dir / "lm_adapted.json", "lm-adapt"};
  require(sidecar);
  const AdaptedModel adapted = load_adapted(sidecar.path);
  const Corpus pool = load_pool_tokens(c);
  const std::vector<ContrastiveScore> scores = score_corpus(
      pool, adapted.general(), adapted, c.ppl_mode(), c.threads);
  const fs::path out_path = c.out_dir / "scores.tsv";
  write_scores_tsv(scores, pool.audios, out_path);
  return {out_path};
}

std::vector<fs::path> stage_select(const PipelineConfig& c) {
  const Artifact scores_art{c.out_dir / "scores.tsv", "score"};
  require(scores_art);
  const std::vector<ContrastiveScore> scores =
      read_scores_tsv(scores_art.path);
  const Corpus pool = load_pool_tokens(c);
  const SelectionResult result =
      select_budget(scores, pool.audios, c.budget_s);
  const fs::path out_path = c.out_dir / "selection.tsv";
  write_selection_tsv(result, out_path);
  return {out_path};
}

std::vector<fs::path> stage_eval(const PipelineConfig& c) {
  const Artifact scores_art{c.out_dir / "scores.tsv", "score"};
  require(scores_art);
  const std::vector<ContrastiveScore> scores =
      read_scores_tsv(scores_art.path);
  const Corpus pool = load_pool_tokens(c);

  OracleScores oracle;
  bool has_oracle = false;
  if (from_synth(c)) {
    const Artifact oracle_art{c.out_dir / "oracle.json", "synth"};
    require(oracle_art);
    oracle = load_oracle(oracle_art.path);
    has_oracle = true;
  }

  SweepOptions options;
  options.target_label = !c.target_label.empty()
                             ? c.target_label
                             : (has_oracle ? oracle.target_domain : "");
  if (options.target_label.empty())
    fail("eval: set config key 'target_label' (no synthetic oracle to "
         "default from)");
  options.budgets_s =
      c.eval_budgets_s.empty() ? std::vector<double>{c.budget_s}
                               : c.eval_budgets_s;
  const uint64_t base = salted_seed(c.seed, "eval");
  options.seeds.reserve(c.eval_seeds);
  for (int i = 0; i < c.eval_seeds; ++i)
    options.seeds.push_back(salted_seed(base, std::to_string(i)));
  options.categorized_fallback = c.categorized_fallback;

  const EvalReport report =
      budget_sweep(pool, scores, has_oracle ? &oracle : nullptr, options);
  const fs::path json_path = c.out_dir / "eval.json";
  const fs::path tsv_path = c.out_dir / "eval.tsv";
  write_eval_report(report, json_path);
  write_eval_tsv(report, tsv_path);
  return {json_path, tsv_path};
}

void log_stage(const PipelineConfig& c, const std::string& stage,
               const std::string& status, long long elapsed_ms,
               const std::vector<fs::path>& outputs,
               const std::string& message) {
  std::ofstream log(c.out_dir / "run_log.jsonl", std::ios::app);
  if (!log) return;  // logging must not mask the stage result
  nlohmann::ordered_json entry;
  entry["stage"] = stage;
  entry["status"] = status;
  entry["elapsed_ms"] = elapsed_ms;
  if (!outputs.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : outputs) arr.push_back(p.generic_string());
    entry["outputs"] = std::move(arr);
  }
  if (!message.empty()) entry["message"] = message;
  log << entry.dump() << "\n";
}

}  // namespace

const char* stage_name(Stage stage) {
  for (const auto& entry : kStageNames)
    if (entry.stage == stage) return entry.name;
  return "unknown";
}

std::optional<Stage> stage_from_name(const std::string& name) {
  for (const auto& entry : kStageNames)
    if (name == entry.name) return entry.stage;
  return std::nullopt;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "granularity") granularity = value;
  else if (key == "manifest") manifest = value;
  else if (key == "domain_manifest") domain_manifest = value;
  else if (key == "features") features = value;
  else if (key == "domain_features") domain_features = value;
  else if (key == "synthetic") synthetic = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "k") k = to_int(key, value);
  else if (key == "bpe_vocab") bpe_vocab = to_int(key, value);
  else if (key == "order") order = to_int(key, value);
  else if (key == "discount") discount = to_double(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "budget_s") budget_s = to_double(key, value);
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "min_tokens") min_tokens = to_u64(key, value);
  else if (key == "collapse_runs") collapse_runs = to_bool(key, value);
  else if (key == "audio_ppl") audio_ppl = value;
  else if (key == "eval_budgets") {
    eval_budgets_s.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
      eval_budgets_s.push_back(to_double(key, trim(item)));
  }
  else if (key == "eval_seeds") eval_seeds = to_int(key, value);
  else if (key == "categorized_fallback") categorized_fallback = to_bool(key, value);
  else if (key == "target_label") target_label = value;
  else if (key == "threads") threads = to_int(key, value);
  else if (key == "feature_dim") feature_dim = static_cast<uint32_t>(to_int(key, value));
  else if (key == "feature_noise") feature_noise = to_double(key, value);
  else fail("config: unknown key '" + key + "'");
}

void PipelineConfig::validate() const {
  if (granularity != "word" && granularity != "phoneme" &&
      granularity != "kmeans_id")
    fail("config: granularity must be word, phoneme, or kmeans_id (got '" +
         granularity + "')");
  if (out_dir.empty()) fail("config: out_dir is required");
  if (k < 2) fail("config: k must be >= 2");
  if (bpe_vocab < 1) fail("config: bpe_vocab must be >= 1");
  if (order < 1) fail("config: order must be >= 1");
  if (discount < 0.0 || discount >= 1.0)
    fail("config: discount must lie in [0, 1)");
  if (lambda < 0.0 || lambda > 1.0) fail("config: lambda must lie in [0, 1]");
  if (budget_s <= 0.0) fail("config: budget_s must be positive");
  if (audio_ppl != "mean" && audio_ppl != "token_weighted")
    fail("config: audio_ppl must be mean or token_weighted");
  for (size_t i = 0; i + 1 < eval_budgets_s.size(); ++i)
    if (eval_budgets_s[i] >= eval_budgets_s[i + 1])
      fail("config: eval_budgets must be strictly ascending");
  for (double b : eval_budgets_s)
    if (b <= 0.0) fail("config: eval_budgets must be positive");
  if (eval_seeds < 1) fail("config: eval_seeds must be >= 1");
  if (threads < 0) fail("config: threads must be >= 0");
  if (feature_dim < 1) fail("config: feature_dim must be >= 1");
  if (feature_noise < 0.0) fail("config: feature_noise must be >= 0");
  if (synthetic.empty()) {
    if (manifest.empty())
      fail("config: manifest is required without a synthetic spec");
    if (domain_manifest.empty())
      fail("config: domain_manifest is required without a synthetic spec");
    if (granularity == "kmeans_id" && features.empty())
      fail("config: features is required for kmeans_id without a synthetic "
           "spec");
    if (granularity == "kmeans_id" && domain_features.empty())
      fail("config: domain_features is required for kmeans_id without a "
           "synthetic spec");
  }
}

Granularity PipelineConfig::lm_granularity() const {
  if (granularity == "word") return Granularity::subword(bpe_vocab);
  if (granularity == "phoneme") return Granularity::phoneme();
  return Granularity::kmeans_id(k);
}

AudioPplMode PipelineConfig::ppl_mode() const {
  return audio_ppl == "token_weighted" ? AudioPplMode::token_weighted
                                       : AudioPplMode::mean_of_utterances;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config '" + path.string() + "'");
  PipelineConfig config;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      fail(path.string() + ":" + std::to_string(line_no) +
           ": expected key = value");
    config.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    fail("--override expects key=value, got '" + assignment + "'");
  config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<Stage> plan_stages(const PipelineConfig& config) {
  config.validate();
  std::vector<Stage> stages;
  if (from_synth(config)) stages.push_back(Stage::synth);
  if (config.granularity == "kmeans_id") {
    stages.push_back(Stage::quantize);
  } else if (config.granularity == "word") {
    stages.push_back(Stage::bpe_train);
    stages.push_back(Stage::tokenize);
  }
  stages.insert(stages.end(), {Stage::lm_train, Stage::lm_adapt, Stage::score,
                               Stage::select, Stage::eval});
  return stages;
}

StageIo stage_io(Stage stage, const PipelineConfig& c) {
  StageIo io;
  auto in = [&](const Artifact& a) { io.inputs.push_back(a.path); };
  auto out = [&](const fs::path& p) { io.outputs.push_back(p); };
  switch (stage) {
    case Stage::synth:
      in({c.synthetic, ""});
      out(c.out_dir / "synth_pool.jsonl");
      out(c.out_dir / "synth_domain.jsonl");
      out(c.out_dir / "oracle.json");
      if (c.granularity == "kmeans_id") {
        out(c.out_dir / "features");
        out(c.out_dir / "domain_features");
      }
      break;
    case Stage::quantize:
      in(pool_source(c));
      in(domain_source(c));
      in(features_source(c));
      in(domain_features_source(c));
      out(c.out_dir / "codebook.json");
      out(c.out_dir / "pool_tokens.jsonl");
      out(c.out_dir / "domain_tokens.jsonl");
      break;
    case Stage::bpe_train:
      in(pool_source(c));
      out(c.out_dir / "bpe.model");
      break;
    case Stage::tokenize:
      in({c.out_dir / "bpe.model", ""});
      in(pool_source(c));
      in(domain_source(c));
      out(c.out_dir / "pool_tokens.jsonl");
      out(c.out_dir / "domain_tokens.jsonl");
      break;
    case Stage::lm_train:
      in(pool_tokens(c));
      out(c.out_dir / "lm_general.arpa");
      out(c.out_dir / "lm_general.json");
      break;
    case Stage::lm_adapt:
      in({c.out_dir / "lm_general.arpa", ""});
      in({c.out_dir / "lm_general.json", ""});
      in(domain_tokens(c));
      out(c.out_dir / "lm_domain.arpa");
      out(c.out_dir / "lm_adapted.json");
      break;
    case Stage::score:
      in({c.out_dir / "lm_adapted.json", ""});
      in(pool_tokens(c));
      out(c.out_dir / "scores.tsv");
      break;
    case Stage::select:
      in({c.out_dir / "scores.tsv", ""});
      in(pool_tokens(c));
      out(c.out_dir / "selection.tsv");
      break;
    case Stage::eval:
      in({c.out_dir / "scores.tsv", ""});
      in(pool_tokens(c));
      if (from_synth(c)) in({c.out_dir / "oracle.json", ""});
      out(c.out_dir / "eval.json");
      out(c.out_dir / "eval.tsv");
      break;
  }
  return io;
}

std::vector<std::filesystem::path> run_stage(Stage stage,
                                             const PipelineConfig& config) {
  config.validate();
  if (stage == Stage::synth && !from_synth(config))
    fail("synth stage needs config key 'synthetic'");
  if (stage == Stage::quantize && config.granularity != "kmeans_id")
    fail("quantize stage applies to kmeans_id granularity only");
  if ((stage == Stage::bpe_train || stage == Stage::tokenize) &&
      config.granularity != "word")
    fail(std::string(stage_name(stage)) +
         " stage applies to word granularity only");

  fs::create_directories(config.out_dir);
  const auto start = std::chrono::steady_clock::now();
  std::vector<fs::path> outputs;
  try {
    switch (stage) {
      case Stage::synth: outputs = stage_synth(config); break;
      case Stage::quantize: outputs = stage_quantize(config); break;
      case Stage::bpe_train: outputs = stage_bpe_train(config); break;
      case Stage::tokenize: outputs = stage_tokenize(config); break;
      case Stage::lm_train: outputs = stage_lm_train(config); break;
      case Stage::lm_adapt: outputs = stage_lm_adapt(config); break;
      case Stage::score: outputs = stage_score(config); break;
      case Stage::select: outputs = stage_select(config); break;
      case Stage::eval: outputs = stage_eval(config); break;
    }
  } catch (const std::exception& e) {
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    log_stage(config, stage_name(stage), "error", elapsed, {}, e.what());
    throw;
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  log_stage(config, stage_name(stage), "ok", elapsed, outputs, "");
  for (const auto& p : outputs)
    std::cerr << "[" << stage_name(stage) << "] wrote " << p.generic_string()
              << "\n";
  return outputs;
}

void run_all(const PipelineConfig& config) {
  for (Stage stage : plan_stages(config)) run_stage(stage, config);
}

}  // namespace csel
