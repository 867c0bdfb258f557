#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace csel {

// Token alphabet a corpus is expressed in. One corpus has exactly one
// granularity; kmeans_id carries the cluster count, subword the target
// vocabulary size.
struct Granularity {
  enum class Kind { kmeans_id, phoneme, word, subword };

  Kind kind = Kind::word;
  int k = 500;
  int vocab_size = 5000;

  static Granularity kmeans_id(int k) { return {Kind::kmeans_id, k, 5000}; }
  static Granularity phoneme() { return {Kind::phoneme, 500, 5000}; }
  static Granularity word() { return {Kind::word, 500, 5000}; }
  static Granularity subword(int vocab_size) {
    return {Kind::subword, 500, vocab_size};
  }

  std::string name() const;
  bool operator==(const Granularity&) const = default;
};

// The unit of scoring: one token sequence with a duration.
struct Utterance {
  std::string utterance_id;
  std::string audio_id;
  std::vector<std::string> tokens;
  double duration_s = 0.0;
};

// The unit of selection: an ordered group of utterances. domain_label is
// evaluation-only metadata; nothing on the selection path may read it.
struct AudioDocument {
  std::string audio_id;
  std::vector<std::string> utterance_ids;
  double duration_s = 0.0;
  std::string domain_label;  // empty = absent

  bool has_label() const { return !domain_label.empty(); }
};

struct LoadOptions {
  // Drop utterances with fewer tokens at ingestion; 0 disables the filter.
  size_t min_tokens = 0;
};

struct Corpus {
  Granularity granularity;
  std::vector<Utterance> utterances;
  std::vector<AudioDocument> audios;

  const Utterance& utterance(const std::string& id) const;
  const AudioDocument& audio(const std::string& id) const;
  bool has_audio(const std::string& id) const;
  std::vector<const Utterance*> utterances_of(const AudioDocument& audio) const;
  double total_duration_s() const;

  // Groups utterances into audios (file order), rebuilds indexes, checks
  // invariants. Labels map audio_id -> domain_label for labeled corpora.
  void finalize(const std::unordered_map<std::string, std::string>& labels = {});

 private:
  std::unordered_map<std::string, size_t> utterance_index_;
  std::unordered_map<std::string, size_t> audio_index_;
};

// JSON-lines manifest, one utterance per line:
//   {"utterance_id": str, "audio_id": str, "duration_s": float,
//    "tokens": [str, ...]}
// Word granularity alternatively accepts "text" (whitespace-split); exactly
// one of tokens/text per line. Optional "domain_label" per line; members of
// one audio must agree on it.
Corpus load_manifest(const std::filesystem::path& path,
                     const Granularity& granularity,
                     const LoadOptions& options = {});

void write_manifest(const Corpus& corpus, const std::filesystem::path& path,
                    bool include_labels = true);

// Copy with every domain_label cleared (unsupervised-guarantee checks).
Corpus strip_labels(const Corpus& corpus);

// Token sequences of the whole corpus, one entry per utterance, in file order.
std::vector<std::vector<std::string>> token_sequences(const Corpus& corpus);

}  // namespace csel
