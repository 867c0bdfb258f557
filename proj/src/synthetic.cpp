#include "csel/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "csel/rng.hpp"
#include "json.hpp"

namespace csel {

namespace {

constexpr double kWeightTol = 1e-9;
// Floor applied to oracle source probabilities so disjoint alphabets stay
// finite in the log-likelihood ratio.
constexpr double kOracleEps = 1e-9;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::pair<int, int> parse_range(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    fail(what + " must be a [lo, hi] pair");
  return {j[0].get<int>(), j[1].get<int>()};
}

std::string pad_index(int value, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << value;
  return os.str();
}

double gaussian(Rng& rng) {
  double u1 = rng.unit();
  while (u1 <= 0.0) u1 = rng.unit();
  const double u2 = rng.unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Realized source for oracle evaluation: indexes one domain's alphabet.
struct SourceView {
  const DomainSpec* spec = nullptr;
  std::unordered_map<std::string, size_t> index;

  double prob(const std::string& prev, const std::string& tok) const {
    auto wt = index.find(tok);
    if (wt == index.end()) return 0.0;
    if (prev.empty()) {
      return spec->initial.empty() ? 1.0 / spec->alphabet.size()
                                   : spec->initial[wt->second];
    }
    auto ht = index.find(prev);
    if (ht == index.end()) return 0.0;
    return spec->transitions[ht->second][wt->second];
  }
};

std::vector<std::string> sample_utterance(const DomainSpec& d, int length,
                                          Rng& rng) {
  std::vector<std::string> tokens;
  tokens.reserve(length);
  size_t prev = 0;
  for (int t = 0; t < length; ++t) {
    size_t idx;
    if (t == 0) {
      idx = d.initial.empty() ? rng.below(d.alphabet.size())
                              : rng.weighted(d.initial);
    } else {
      idx = rng.weighted(d.transitions[prev]);
    }
    tokens.push_back(d.alphabet[idx]);
    prev = idx;
  }
  return tokens;
}

}  // namespace

const DomainSpec& SyntheticSpec::target() const {
  const std::string name = target_domain.empty() ? domains.front().name
                                                 : target_domain;
  for (const auto& d : domains)
    if (d.name == name) return d;
  fail("target_domain '" + name + "' is not a declared domain");
}

void SyntheticSpec::validate() const {
  if (domains.empty()) fail("synthetic spec has no domains");
  if (!(seconds_per_token > 0.0)) fail("seconds_per_token must be positive");

  std::unordered_map<std::string, int> names;
  for (const auto& d : domains) {
    if (d.name.empty()) fail("domain with empty name");
    if (++names[d.name] > 1) fail("duplicate domain name '" + d.name + "'");
    if (d.alphabet.empty()) fail("domain '" + d.name + "' has empty alphabet");
    std::unordered_map<std::string, int> seen;
    for (const auto& tok : d.alphabet) {
      if (tok.empty()) fail("domain '" + d.name + "' has an empty token");
      if (++seen[tok] > 1)
        fail("domain '" + d.name + "' repeats token '" + tok + "'");
    }
    const size_t n = d.alphabet.size();
    if (d.transitions.size() != n)
      fail("domain '" + d.name + "': transitions must have one row per token");
    for (size_t i = 0; i < n; ++i) {
      if (d.transitions[i].size() != n)
        fail("domain '" + d.name + "': transition row " + std::to_string(i) +
             " has wrong width");
      double sum = 0.0;
      for (double w : d.transitions[i]) {
        if (w < 0.0 || !std::isfinite(w))
          fail("domain '" + d.name + "': negative transition weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > kWeightTol)
        fail("domain '" + d.name + "': transition row " + std::to_string(i) +
             " sums to " + std::to_string(sum) + ", expected 1");
    }
    if (!d.initial.empty()) {
      if (d.initial.size() != n)
        fail("domain '" + d.name + "': initial weights have wrong size");
      double sum = 0.0;
      for (double w : d.initial) {
        if (w < 0.0 || !std::isfinite(w))
          fail("domain '" + d.name + "': negative initial weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > kWeightTol)
        fail("domain '" + d.name + "': initial weights sum to " +
             std::to_string(sum) + ", expected 1");
    }
    if (d.audio_count < 1)
      fail("domain '" + d.name + "': audio_count must be >= 1");
    auto check_range = [&](std::pair<int, int> r, const char* what) {
      if (r.first < 1 || r.second < r.first)
        fail("domain '" + d.name + "': invalid " + std::string(what) + " range");
    };
    check_range(d.utterances_per_audio, "utterances_per_audio");
    check_range(d.utterance_length, "utterance_length");
  }
  target();  // must resolve
  if (adaptation.utterance_count < 0)
    fail("adaptation.utterance_count must be >= 0");
  if (adaptation.utterance_count > 0 &&
      (adaptation.utterance_length.first < 1 ||
       adaptation.utterance_length.second < adaptation.utterance_length.first))
    fail("invalid adaptation.utterance_length range");
}

SyntheticSpec parse_synthetic_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(std::string("synthetic spec is not valid JSON: ") + e.what());
  }

  SyntheticSpec spec;
  spec.seed = j.value("seed", 0ull);
  spec.seconds_per_token = j.value("seconds_per_token", 0.5);
  spec.target_domain = j.value("target_domain", std::string());
  if (j.contains("adaptation")) {
    const auto& a = j["adaptation"];
    spec.adaptation.utterance_count = a.value("utterance_count", 0);
    if (a.contains("utterance_length"))
      spec.adaptation.utterance_length =
          parse_range(a["utterance_length"], "adaptation.utterance_length");
  }
  if (!j.contains("domains")) fail("synthetic spec is missing \"domains\"");
  for (const auto& dj : j["domains"]) {
    DomainSpec d;
    d.name = dj.value("name", std::string());
    d.alphabet = dj.value("alphabet", std::vector<std::string>{});
    if (dj.contains("transitions"))
      d.transitions = dj["transitions"].get<std::vector<std::vector<double>>>();
    if (dj.contains("initial"))
      d.initial = dj["initial"].get<std::vector<double>>();
    d.audio_count = dj.value("audio_count", 1);
    if (dj.contains("utterances_per_audio"))
      d.utterances_per_audio =
          parse_range(dj["utterances_per_audio"], "utterances_per_audio");
    if (dj.contains("utterance_length"))
      d.utterance_length = parse_range(dj["utterance_length"], "utterance_length");
    spec.domains.push_back(std::move(d));
  }
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open synthetic spec '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_synthetic_spec(buf.str());
}

void save_synthetic_spec(const SyntheticSpec& spec,
                         const std::filesystem::path& path) {
  nlohmann::json j;
  j["seed"] = spec.seed;
  j["seconds_per_token"] = spec.seconds_per_token;
  if (!spec.target_domain.empty()) j["target_domain"] = spec.target_domain;
  j["adaptation"] = {
      {"utterance_count", spec.adaptation.utterance_count},
      {"utterance_length", {spec.adaptation.utterance_length.first,
                            spec.adaptation.utterance_length.second}}};
  j["domains"] = nlohmann::json::array();
  for (const auto& d : spec.domains) {
    nlohmann::json dj;
    dj["name"] = d.name;
    dj["alphabet"] = d.alphabet;
    dj["transitions"] = d.transitions;
    if (!d.initial.empty()) dj["initial"] = d.initial;
    dj["audio_count"] = d.audio_count;
    dj["utterances_per_audio"] = {d.utterances_per_audio.first,
                                  d.utterances_per_audio.second};
    dj["utterance_length"] = {d.utterance_length.first,
                              d.utterance_length.second};
    j["domains"].push_back(std::move(dj));
  }
  std::ofstream out(path);
  if (!out) fail("cannot write synthetic spec '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

double OracleScores::at(const std::string& audio_id) const {
  auto it = by_audio.find(audio_id);
  if (it == by_audio.end()) fail("no oracle score for audio '" + audio_id + "'");
  return it->second;
}

void save_oracle(const OracleScores& oracle, const std::filesystem::path& path) {
  nlohmann::json j;
  j["target_domain"] = oracle.target_domain;
  nlohmann::json scores;  // nlohmann objects dump with sorted keys
  for (const auto& [id, score] : oracle.by_audio) scores[id] = score;
  j["scores"] = std::move(scores);
  std::ofstream out(path);
  if (!out) fail("cannot write oracle file '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

OracleScores load_oracle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open oracle file '" + path.string() + "'");
  nlohmann::json j;
  in >> j;
  OracleScores oracle;
  oracle.target_domain = j.value("target_domain", std::string());
  for (const auto& [id, score] : j.at("scores").items())
    oracle.by_audio[id] = score.get<double>();
  return oracle;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  SyntheticCorpus out;
  out.corpus.granularity = Granularity::word();
  out.adaptation.granularity = Granularity::word();

  std::unordered_map<std::string, std::string> labels;
  std::vector<size_t> domain_token_counts(spec.domains.size(), 0);
  std::unordered_map<std::string, size_t> audio_domain;  // audio_id -> domain idx

  for (size_t di = 0; di < spec.domains.size(); ++di) {
    const DomainSpec& d = spec.domains[di];
    for (int a = 1; a <= d.audio_count; ++a) {
      const std::string audio_id = d.name + "-a" + pad_index(a, 4);
      labels[audio_id] = d.name;
      audio_domain[audio_id] = di;
      const int n_utts = static_cast<int>(
          rng.range(d.utterances_per_audio.first, d.utterances_per_audio.second));
      for (int u = 1; u <= n_utts; ++u) {
        const int length = static_cast<int>(
            rng.range(d.utterance_length.first, d.utterance_length.second));
        Utterance utt;
        utt.utterance_id = audio_id + "-u" + pad_index(u, 3);
        utt.audio_id = audio_id;
        utt.tokens = sample_utterance(d, length, rng);
        utt.duration_s = length * spec.seconds_per_token;
        domain_token_counts[di] += utt.tokens.size();
        out.corpus.utterances.push_back(std::move(utt));
      }
    }
  }
  out.corpus.finalize(labels);

  const DomainSpec& target = spec.target();
  for (int u = 1; u <= spec.adaptation.utterance_count; ++u) {
    const int length =
        static_cast<int>(rng.range(spec.adaptation.utterance_length.first,
                                   spec.adaptation.utterance_length.second));
    Utterance utt;
    utt.audio_id = "adapt-a" + pad_index(u, 4);
    utt.utterance_id = utt.audio_id + "-u001";
    utt.tokens = sample_utterance(target, length, rng);
    utt.duration_s = length * spec.seconds_per_token;
    out.adaptation.utterances.push_back(std::move(utt));
  }
  out.adaptation.finalize();

  // Oracle: mean per-token ln(P_mixture / P_target) with realized-count
  // mixture weights; sources floored by kOracleEps over the global alphabet.
  std::vector<SourceView> views(spec.domains.size());
  std::unordered_map<std::string, int> global_alphabet;
  for (size_t di = 0; di < spec.domains.size(); ++di) {
    views[di].spec = &spec.domains[di];
    for (size_t i = 0; i < spec.domains[di].alphabet.size(); ++i) {
      views[di].index.emplace(spec.domains[di].alphabet[i], i);
      global_alphabet.emplace(spec.domains[di].alphabet[i], 0);
    }
  }
  const double vocab = static_cast<double>(global_alphabet.size());
  size_t total_tokens = 0;
  for (size_t c : domain_token_counts) total_tokens += c;
  std::vector<double> mixture_weight(spec.domains.size());
  for (size_t di = 0; di < spec.domains.size(); ++di)
    mixture_weight[di] =
        static_cast<double>(domain_token_counts[di]) / total_tokens;

  size_t target_idx = 0;
  for (size_t di = 0; di < spec.domains.size(); ++di)
    if (spec.domains[di].name == target.name) target_idx = di;

  auto floored = [&](double p) { return (1.0 - kOracleEps) * p + kOracleEps / vocab; };

  out.oracle.target_domain = target.name;
  for (const auto& audio : out.corpus.audios) {
    double llr_sum = 0.0;
    size_t n_tokens = 0;
    for (const Utterance* utt : out.corpus.utterances_of(audio)) {
      std::string prev;
      for (const auto& tok : utt->tokens) {
        double mix = 0.0;
        for (size_t di = 0; di < views.size(); ++di)
          mix += mixture_weight[di] * floored(views[di].prob(prev, tok));
        const double tgt = floored(views[target_idx].prob(prev, tok));
        llr_sum += std::log(mix) - std::log(tgt);
        prev = tok;
        ++n_tokens;
      }
    }
    out.oracle.by_audio[audio.audio_id] = llr_sum / static_cast<double>(n_tokens);
  }
  return out;
}

FeatureMatrix synthesize_features(const std::vector<std::string>& tokens,
                                  const FeatureSynthesisOptions& options) {
  if (options.dim == 0) fail("synthesize_features: dim must be positive");
  FeatureMatrix m;
  m.n_frames = static_cast<uint32_t>(tokens.size());
  m.dim = options.dim;
  m.values.reserve(tokens.size() * options.dim);

  std::unordered_map<std::string, std::vector<float>> centers;
  Rng noise(salted_seed(options.seed, "feature-noise:" + options.stream));
  for (const auto& tok : tokens) {
    auto it = centers.find(tok);
    if (it == centers.end()) {
      Rng center_rng(salted_seed(options.seed, "feature-center:" + tok));
      std::vector<double> g(options.dim);
      double norm = 0.0;
      for (auto& v : g) {
        v = gaussian(center_rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) norm = 1.0;
      std::vector<float> center(options.dim);
      for (uint32_t j = 0; j < options.dim; ++j)
        center[j] = static_cast<float>(g[j] / norm);
      it = centers.emplace(tok, std::move(center)).first;
    }
    for (uint32_t j = 0; j < options.dim; ++j)
      m.values.push_back(it->second[j] +
                         static_cast<float>(options.noise_sigma * gaussian(noise)));
  }
  m.validate();
  return m;
}

}  // namespace csel
