#include "csel/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace csel {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

[[noreturn]] void fail_line(const std::filesystem::path& path, size_t line,
                            const std::string& msg) {
  std::ostringstream os;
  os << path.string() << ":" << line << ": " << msg;
  fail(os.str());
}

bool parse_kmeans_token(const std::string& tok, long& out) {
  if (tok.empty()) return false;
  for (char c : tok)
    if (c < '0' || c > '9') return false;
  try {
    out = std::stol(tok);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

void check_tokens(const std::filesystem::path& path, size_t line,
                  const Granularity& g, const std::vector<std::string>& tokens,
                  const std::string& utterance_id) {
  if (tokens.empty())
    fail_line(path, line, "utterance '" + utterance_id + "' has no tokens");
  for (const auto& tok : tokens) {
    if (tok.empty())
      fail_line(path, line, "utterance '" + utterance_id + "' has an empty token");
    if (g.kind == Granularity::Kind::kmeans_id) {
      long id = 0;
      if (!parse_kmeans_token(tok, id) || id >= g.k)
        fail_line(path, line, "token '" + tok + "' is not a K-means id in [0, " +
                                  std::to_string(g.k) + ")");
    }
  }
}

}  // namespace

std::string Granularity::name() const {
  switch (kind) {
    case Kind::kmeans_id:
      return "kmeans_id";
    case Kind::phoneme:
      return "phoneme";
    case Kind::word:
      return "word";
    case Kind::subword:
      return "subword";
  }
  return "unknown";
}

const Utterance& Corpus::utterance(const std::string& id) const {
  auto it = utterance_index_.find(id);
  if (it == utterance_index_.end()) fail("unknown utterance_id '" + id + "'");
  return utterances[it->second];
}

const AudioDocument& Corpus::audio(const std::string& id) const {
  auto it = audio_index_.find(id);
  if (it == audio_index_.end()) fail("unknown audio_id '" + id + "'");
  return audios[it->second];
}

bool Corpus::has_audio(const std::string& id) const {
  return audio_index_.count(id) > 0;
}

std::vector<const Utterance*> Corpus::utterances_of(
    const AudioDocument& audio) const {
  std::vector<const Utterance*> out;
  out.reserve(audio.utterance_ids.size());
  for (const auto& id : audio.utterance_ids) out.push_back(&utterance(id));
  return out;
}

double Corpus::total_duration_s() const {
  double total = 0.0;
  for (const auto& a : audios) total += a.duration_s;
  return total;
}

void Corpus::finalize(const std::unordered_map<std::string, std::string>& labels) {
  utterance_index_.clear();
  audio_index_.clear();
  audios.clear();

  for (size_t i = 0; i < utterances.size(); ++i) {
    const Utterance& u = utterances[i];
    if (u.tokens.empty())
      fail("utterance '" + u.utterance_id + "' has no tokens");
    if (!(u.duration_s > 0.0))
      fail("utterance '" + u.utterance_id + "' has nonpositive duration");
    if (!utterance_index_.emplace(u.utterance_id, i).second)
      fail("duplicate utterance_id '" + u.utterance_id + "'");

    auto it = audio_index_.find(u.audio_id);
    if (it == audio_index_.end()) {
      audio_index_.emplace(u.audio_id, audios.size());
      AudioDocument doc;
      doc.audio_id = u.audio_id;
      audios.push_back(std::move(doc));
      it = audio_index_.find(u.audio_id);
    }
    AudioDocument& doc = audios[it->second];
    doc.utterance_ids.push_back(u.utterance_id);
    doc.duration_s += u.duration_s;
  }

  for (auto& doc : audios) {
    auto it = labels.find(doc.audio_id);
    if (it != labels.end()) doc.domain_label = it->second;
  }
}

Corpus load_manifest(const std::filesystem::path& path,
                     const Granularity& granularity,
                     const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) fail("cannot open manifest '" + path.string() + "'");

  Corpus corpus;
  corpus.granularity = granularity;
  std::unordered_map<std::string, std::string> labels;

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail_line(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) fail_line(path, line_no, "record is not a JSON object");

    Utterance u;
    try {
      u.utterance_id = rec.at("utterance_id").get<std::string>();
      u.audio_id = rec.at("audio_id").get<std::string>();
      u.duration_s = rec.at("duration_s").get<double>();
    } catch (const nlohmann::json::exception& e) {
      fail_line(path, line_no, std::string("bad record: ") + e.what());
    }
    if (u.utterance_id.empty()) fail_line(path, line_no, "empty utterance_id");
    if (u.audio_id.empty()) fail_line(path, line_no, "empty audio_id");
    if (!(u.duration_s > 0.0) || !std::isfinite(u.duration_s))
      fail_line(path, line_no,
                "utterance '" + u.utterance_id + "' has nonpositive duration");

    const bool has_tokens = rec.contains("tokens");
    const bool has_text = rec.contains("text");
    if (has_tokens == has_text)
      fail_line(path, line_no, "exactly one of \"tokens\"/\"text\" is required");
    if (has_text && granularity.kind != Granularity::Kind::word)
      fail_line(path, line_no,
                "\"text\" is only accepted at word granularity");

    if (has_tokens) {
      if (!rec["tokens"].is_array())
        fail_line(path, line_no, "\"tokens\" must be an array of strings");
      for (const auto& t : rec["tokens"]) {
        if (!t.is_string())
          fail_line(path, line_no, "\"tokens\" must be an array of strings");
        u.tokens.push_back(t.get<std::string>());
      }
    } else {
      std::istringstream words(rec["text"].get<std::string>());
      std::string w;
      while (words >> w) u.tokens.push_back(w);
    }
    check_tokens(path, line_no, granularity, u.tokens, u.utterance_id);

    if (rec.contains("domain_label")) {
      const std::string label = rec["domain_label"].get<std::string>();
      auto it = labels.find(u.audio_id);
      if (it != labels.end() && it->second != label)
        fail_line(path, line_no, "audio '" + u.audio_id +
                                     "' has conflicting domain labels");
      labels.emplace(u.audio_id, label);
    }

    if (options.min_tokens > 0 && u.tokens.size() < options.min_tokens) continue;
    corpus.utterances.push_back(std::move(u));
  }

  corpus.finalize(labels);
  return corpus;
}

void write_manifest(const Corpus& corpus, const std::filesystem::path& path,
                    bool include_labels) {
  std::ofstream out(path);
  if (!out) fail("cannot write manifest '" + path.string() + "'");
  for (const auto& u : corpus.utterances) {
    nlohmann::ordered_json rec;
    rec["utterance_id"] = u.utterance_id;
    rec["audio_id"] = u.audio_id;
    rec["duration_s"] = u.duration_s;
    rec["tokens"] = u.tokens;
    if (include_labels) {
      const AudioDocument& doc = corpus.audio(u.audio_id);
      if (doc.has_label()) rec["domain_label"] = doc.domain_label;
    }
    out << rec.dump() << "\n";
  }
  if (!out) fail("failed writing manifest '" + path.string() + "'");
}

Corpus strip_labels(const Corpus& corpus) {
  Corpus out;
  out.granularity = corpus.granularity;
  out.utterances = corpus.utterances;
  out.finalize();
  return out;
}

std::vector<std::vector<std::string>> token_sequences(const Corpus& corpus) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) out.push_back(u.tokens);
  return out;
}

}  // namespace csel
