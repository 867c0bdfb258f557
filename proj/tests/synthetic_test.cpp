#include "csel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

using namespace csel;
using testutil::TempDir;

namespace {

DomainSpec single_token_domain(const std::string& name, const std::string& tok,
                               int audio_count, int length) {
  DomainSpec d;
  d.name = name;
  d.alphabet = {tok};
  d.transitions = {{1.0}};
  d.audio_count = audio_count;
  d.utterances_per_audio = {1, 1};
  d.utterance_length = {length, length};
  return d;
}

SyntheticSpec two_domain_spec() {
  SyntheticSpec spec;
  spec.seed = 11;
  spec.domains = {single_token_domain("tgt", "x", 1, 4),
                  single_token_domain("oth", "y", 1, 4)};
  spec.target_domain = "tgt";
  return spec;
}

std::string dump_corpus(const Corpus& corpus) {
  std::ostringstream os;
  for (const auto& u : corpus.utterances) {
    os << u.utterance_id << "|" << u.audio_id << "|" << u.duration_s << "|";
    for (const auto& t : u.tokens) os << t << " ";
    os << "\n";
  }
  return os.str();
}

}  // namespace

TEST_CASE("spec JSON parses with defaults and round-trips") {
  const std::string text = R"({
    "seed": 77,
    "target_domain": "news",
    "adaptation": {"utterance_count": 3, "utterance_length": [2, 5]},
    "domains": [
      {"name": "news", "alphabet": ["a", "b"],
       "transitions": [[0.9, 0.1], [0.4, 0.6]],
       "initial": [0.5, 0.5],
       "audio_count": 2, "utterances_per_audio": [1, 3],
       "utterance_length": [4, 9]},
      {"name": "calls", "alphabet": ["c"],
       "transitions": [[1.0]]}
    ]
  })";
  const SyntheticSpec spec = parse_synthetic_spec(text);
  CHECK(spec.seed == 77);
  CHECK(spec.seconds_per_token == 0.5);
  CHECK(spec.target().name == "news");
  CHECK(spec.domains.size() == 2);
  CHECK(spec.domains[0].audio_count == 2);
  CHECK(spec.domains[0].utterances_per_audio == std::pair<int, int>{1, 3});
  CHECK(spec.domains[1].audio_count == 1);
  CHECK(spec.domains[1].utterance_length == std::pair<int, int>{1, 1});
  CHECK(spec.adaptation.utterance_count == 3);

  TempDir dir;
  save_synthetic_spec(spec, dir / "spec.json");
  const SyntheticSpec again = load_synthetic_spec(dir / "spec.json");
  CHECK(again.seed == spec.seed);
  CHECK(again.target_domain == spec.target_domain);
  CHECK(again.domains.size() == 2);
  CHECK(again.domains[0].transitions == spec.domains[0].transitions);
  CHECK(again.domains[0].initial == spec.domains[0].initial);
  CHECK(again.adaptation.utterance_length == spec.adaptation.utterance_length);
}

TEST_CASE("spec validation rejects malformed sources") {
  CHECK_THROWS_WITH_AS(parse_synthetic_spec("{nope"),
                       doctest::Contains("not valid JSON"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_synthetic_spec(R"({"seed": 1})"),
                       doctest::Contains("missing \"domains\""),
                       std::runtime_error);

  SyntheticSpec spec = two_domain_spec();
  spec.domains[0].transitions = {{0.5}};
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("sums to"),
                       std::runtime_error);

  spec = two_domain_spec();
  spec.domains[0].transitions = {{0.5, 0.5}};
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("wrong width"),
                       std::runtime_error);

  spec = two_domain_spec();
  spec.domains[1].name = "tgt";
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("duplicate domain"),
                       std::runtime_error);

  spec = two_domain_spec();
  spec.target_domain = "ghost";
  CHECK_THROWS_WITH_AS(spec.validate(),
                       doctest::Contains("not a declared domain"),
                       std::runtime_error);

  spec = two_domain_spec();
  spec.domains[0].utterance_length = {5, 2};
  CHECK_THROWS_AS(spec.validate(), std::runtime_error);

  spec = two_domain_spec();
  spec.seconds_per_token = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::runtime_error);

  spec = two_domain_spec();
  spec.domains[0].initial = {1.0};
  CHECK_NOTHROW(spec.validate());
  spec.domains[0].initial = {0.9};
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("initial weights"),
                       std::runtime_error);
}

TEST_CASE("generation shapes ids, labels and durations") {
  SyntheticSpec spec = two_domain_spec();
  spec.domains[0].audio_count = 3;
  spec.domains[0].utterances_per_audio = {2, 2};
  spec.adaptation.utterance_count = 2;
  spec.adaptation.utterance_length = {3, 3};
  const SyntheticCorpus data = generate_synthetic(spec);

  CHECK(data.corpus.audios.size() == 4);
  CHECK(data.corpus.has_audio("tgt-a0001"));
  CHECK(data.corpus.has_audio("tgt-a0003"));
  CHECK(data.corpus.has_audio("oth-a0001"));
  CHECK(data.corpus.audio("tgt-a0002").domain_label == "tgt");
  CHECK(data.corpus.audio("oth-a0001").domain_label == "oth");
  CHECK(data.corpus.audio("tgt-a0001").utterance_ids ==
        std::vector<std::string>{"tgt-a0001-u001", "tgt-a0001-u002"});

  for (const auto& u : data.corpus.utterances) {
    CHECK(u.tokens.size() == 4);
    CHECK(u.duration_s == 4 * 0.5);
  }

  CHECK(data.adaptation.audios.size() == 2);
  CHECK(data.adaptation.has_audio("adapt-a0001"));
  CHECK(data.adaptation.utterances.size() == 2);
  CHECK(data.adaptation.utterances[0].utterance_id == "adapt-a0001-u001");
  CHECK(data.adaptation.utterances[0].tokens ==
        std::vector<std::string>(3, "x"));
  for (const auto& a : data.adaptation.audios) CHECK(!a.has_label());

  CHECK(data.oracle.target_domain == "tgt");
  CHECK(data.oracle.by_audio.size() == data.corpus.audios.size());
}

TEST_CASE("generation is a pure function of the spec") {
  SyntheticSpec spec = two_domain_spec();
  spec.domains[0].alphabet = {"a", "b", "c"};
  spec.domains[0].transitions = {{0.8, 0.1, 0.1}, {0.2, 0.7, 0.1}, {0.3, 0.3, 0.4}};
  spec.domains[0].audio_count = 5;
  spec.domains[0].utterance_length = {2, 9};
  spec.domains[0].utterances_per_audio = {1, 3};
  spec.adaptation.utterance_count = 4;
  const SyntheticCorpus a = generate_synthetic(spec);
  const SyntheticCorpus b = generate_synthetic(spec);
  CHECK(dump_corpus(a.corpus) == dump_corpus(b.corpus));
  CHECK(dump_corpus(a.adaptation) == dump_corpus(b.adaptation));
  CHECK(a.oracle.by_audio == b.oracle.by_audio);

  SyntheticSpec other = spec;
  other.seed = spec.seed + 1;
  CHECK(dump_corpus(generate_synthetic(other).corpus) != dump_corpus(a.corpus));
}

TEST_CASE("oracle matches the hand-computed likelihood ratio") {
  // Deterministic single-token domains: 4 target tokens and 4 other tokens,
  // so the realized mixture is an even split and every target token carries
  // ln(0.5 / ~1) while every other-domain token is heavily penalized.
  const SyntheticCorpus data = generate_synthetic(two_domain_spec());
  const double tgt_score = data.oracle.at("tgt-a0001");
  const double oth_score = data.oracle.at("oth-a0001");
  CHECK(tgt_score == doctest::Approx(std::log(0.5)).epsilon(1e-6));
  CHECK(oth_score > 0.0);
  CHECK(tgt_score < oth_score);
  CHECK_THROWS_WITH_AS(data.oracle.at("ghost"),
                       doctest::Contains("no oracle score"),
                       std::runtime_error);
}

TEST_CASE("oracle separates disjoint-alphabet domains") {
  SyntheticSpec spec;
  spec.seed = 5;
  DomainSpec tgt;
  tgt.name = "tgt";
  tgt.alphabet = {"a", "b"};
  tgt.transitions = {{0.7, 0.3}, {0.3, 0.7}};
  tgt.audio_count = 6;
  tgt.utterances_per_audio = {1, 2};
  tgt.utterance_length = {5, 12};
  DomainSpec oth = tgt;
  oth.name = "oth";
  oth.alphabet = {"p", "q"};
  spec.domains = {tgt, oth};
  spec.target_domain = "tgt";

  const SyntheticCorpus data = generate_synthetic(spec);
  double max_target = -1e300, min_other = 1e300;
  for (const auto& audio : data.corpus.audios) {
    const double s = data.oracle.at(audio.audio_id);
    if (audio.domain_label == "tgt")
      max_target = std::max(max_target, s);
    else
      min_other = std::min(min_other, s);
  }
  CHECK(max_target < min_other);
}

TEST_CASE("oracle files round-trip") {
  TempDir dir;
  OracleScores oracle;
  oracle.target_domain = "tgt";
  oracle.by_audio = {{"a1", -0.25}, {"a2", 1.5}};
  save_oracle(oracle, dir / "oracle.json");
  const OracleScores loaded = load_oracle(dir / "oracle.json");
  CHECK(loaded.target_domain == "tgt");
  CHECK(loaded.by_audio == oracle.by_audio);
  CHECK_THROWS_AS(load_oracle(dir / "absent.json"), std::runtime_error);
}

TEST_CASE("feature synthesis is stable per token and seed") {
  FeatureSynthesisOptions options;
  options.dim = 6;
  options.noise_sigma = 0.0;
  options.seed = 21;
  options.stream = "one";
  const FeatureMatrix a = synthesize_features({"t1", "t2", "t1"}, options);
  CHECK(a.n_frames == 3);
  CHECK(a.dim == 6);
  // Centers sit on the unit sphere.
  for (uint32_t r = 0; r < a.n_frames; ++r) {
    double norm = 0.0;
    for (uint32_t j = 0; j < a.dim; ++j) norm += double(a.row(r)[j]) * a.row(r)[j];
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-5));
  }
  // Without noise a token's frames coincide, even across streams.
  const std::vector<float> first(a.row(0), a.row(0) + a.dim);
  const std::vector<float> third(a.row(2), a.row(2) + a.dim);
  CHECK(first == third);
  options.stream = "two";
  const FeatureMatrix b = synthesize_features({"t1"}, options);
  CHECK(std::vector<float>(b.row(0), b.row(0) + b.dim) == first);

  options.seed = 22;
  const FeatureMatrix c = synthesize_features({"t1"}, options);
  CHECK(std::vector<float>(c.row(0), c.row(0) + c.dim) != first);
}

TEST_CASE("feature noise differs across streams but not reruns") {
  FeatureSynthesisOptions options;
  options.dim = 4;
  options.noise_sigma = 0.1;
  options.seed = 33;
  options.stream = "s1";
  const FeatureMatrix a = synthesize_features({"tok", "tok"}, options);
  const FeatureMatrix again = synthesize_features({"tok", "tok"}, options);
  CHECK(a.values == again.values);
  options.stream = "s2";
  const FeatureMatrix b = synthesize_features({"tok", "tok"}, options);
  CHECK(a.values != b.values);

  CHECK(synthesize_features({}, options).n_frames == 0);
  options.dim = 0;
  CHECK_THROWS_AS(synthesize_features({"tok"}, options), std::runtime_error);
}
