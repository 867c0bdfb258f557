#include "csel/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace csel {

namespace {

constexpr int kBosId = 0;
constexpr int kEosId = 1;
constexpr int kUnkId = 2;
// ARPA sentinel for entries that exist only to carry a back-off weight (or
// for genuinely zero probabilities when d = 0).
constexpr double kLogZero = -99.0;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void append_id(std::string& key, int id) {
  const uint32_t v = static_cast<uint32_t>(id);
  key.push_back(static_cast<char>(v));
  key.push_back(static_cast<char>(v >> 8));
  key.push_back(static_cast<char>(v >> 16));
  key.push_back(static_cast<char>(v >> 24));
}

std::string pack(const int* ids, int length, int event = -1) {
  std::string key;
  key.reserve(4 * (length + (event >= 0 ? 1 : 0)));
  for (int i = 0; i < length; ++i) append_id(key, ids[i]);
  if (event >= 0) append_id(key, event);
  return key;
}

std::vector<int> unpack(const std::string& key) {
  std::vector<int> ids(key.size() / 4);
  for (size_t i = 0; i < ids.size(); ++i) {
    const auto b = [&](size_t j) {
      return static_cast<uint32_t>(static_cast<unsigned char>(key[4 * i + j]));
    };
    ids[i] = static_cast<int>(b(0) | b(1) << 8 | b(2) << 16 | b(3) << 24);
  }
  return ids;
}

void check_options(const LmOptions& options) {
  if (options.order < 1) fail("lm: order must be >= 1");
  if (options.discount < 0.0 || options.discount >= 1.0)
    fail("lm: discount must lie in [0, 1)");
  if (options.min_count < 1) fail("lm: min_count must be >= 1");
}

std::string format_log10(double linear) {
  if (linear <= 0.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", kLogZero);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", std::log10(linear));
  return buf;
}

}  // namespace

void NGramModel::set_vocabulary(const std::vector<std::string>& regulars) {
  vocab_ = {kBos, kEos, kUnk};
  for (const auto& tok : regulars) {
    if (tok == kBos || tok == kEos || tok == kUnk) continue;
    vocab_.push_back(tok);
  }
  ids_.clear();
  for (size_t i = 0; i < vocab_.size(); ++i) ids_[vocab_[i]] = static_cast<int>(i);
  predictable_.clear();
  predictable_.reserve(vocab_.size() - 1);
  for (size_t i = 1; i < vocab_.size(); ++i) predictable_.push_back(vocab_[i]);
}

std::vector<int> NGramModel::to_ids(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    auto it = ids_.find(tok);
    // The sentence-start symbol is never a scorable event; a literal
    // occurrence in data degrades to unknown like any other OOV token.
    ids.push_back(it == ids_.end() || it->second == kBosId ? kUnkId
                                                           : it->second);
  }
  return ids;
}

NGramModel NGramModel::train(const std::vector<std::vector<std::string>>& corpus,
                             const LmOptions& options) {
  check_options(options);
  std::unordered_map<std::string, size_t> freq;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) ++freq[tok];
  std::vector<std::string> regulars;
  for (const auto& [tok, count] : freq)
    if (count >= options.min_count) regulars.push_back(tok);
  std::sort(regulars.begin(), regulars.end());
  return train_with_vocab(corpus, options, regulars);
}

NGramModel NGramModel::train_with_vocab(
    const std::vector<std::vector<std::string>>& corpus,
    const LmOptions& options, const std::vector<std::string>& regular_vocab) {
  check_options(options);
  if (corpus.empty()) fail("lm: empty training corpus");

  NGramModel model;
  model.order_ = options.order;
  model.discount_ = options.discount;
  std::vector<std::string> regulars = regular_vocab;
  std::sort(regulars.begin(), regulars.end());
  regulars.erase(std::unique(regulars.begin(), regulars.end()), regulars.end());
  model.set_vocabulary(regulars);

  const int n = options.order;
  std::vector<std::unordered_map<std::string, long long>> counts(n);
  for (size_t s = 0; s < corpus.size(); ++s) {
    if (corpus[s].empty())
      fail("lm: empty sequence at index " + std::to_string(s));
    std::vector<int> events = model.to_ids(corpus[s]);
    events.push_back(kEosId);
    std::vector<int> history(n - 1, kBosId);
    for (int event : events) {
      for (int k = 1; k <= n; ++k) {
        const int ctx = k - 1;
        ++counts[ctx][pack(history.data() + (n - 1 - ctx), ctx, event)];
      }
      if (n > 1) {
        history.erase(history.begin());
        history.push_back(event);
      }
    }
  }

  // Per-context totals and distinct-follower counts, per order.
  std::vector<std::unordered_map<std::string, long long>> ctx_total(n);
  std::vector<std::unordered_map<std::string, long long>> ctx_distinct(n);
  for (int ctx = 0; ctx < n; ++ctx) {
    for (const auto& [key, count] : counts[ctx]) {
      const std::string context = key.substr(0, key.size() - 4);
      ctx_total[ctx][context] += count;
      ++ctx_distinct[ctx][context];
    }
  }

  const double d = options.discount;
  model.probs_.assign(n, {});
  model.bows_.assign(n, {});

  // Unigrams: interpolate with the uniform distribution over the predictable
  // vocabulary so every symbol keeps positive mass (for d > 0).
  const double total = static_cast<double>(ctx_total[0][std::string()]);
  const double distinct = static_cast<double>(ctx_distinct[0][std::string()]);
  const double vp = static_cast<double>(model.predictable_.size());
  const double uniform_mass = d * distinct / total;
  model.unseen_unigram_ = uniform_mass / vp;
  for (const auto& tok : model.predictable_) {
    const int id = model.ids_.at(tok);
    const std::string key = pack(&id, 0, id);
    const auto it = counts[0].find(key);
    const double c = it == counts[0].end() ? 0.0 : static_cast<double>(it->second);
    model.probs_[0][key] = std::max(c - d, 0.0) / total + uniform_mass / vp;
  }

  for (int ctx = 1; ctx < n; ++ctx) {
    for (const auto& [context, c_total] : ctx_total[ctx]) {
      const double bow =
          d * static_cast<double>(ctx_distinct[ctx][context]) /
          static_cast<double>(c_total);
      model.bows_[ctx][context] = bow;
    }
    for (const auto& [key, count] : counts[ctx]) {
      const std::string context = key.substr(0, key.size() - 4);
      const std::vector<int> ids = unpack(key);
      const double c_total =
          static_cast<double>(ctx_total[ctx].at(context));
      const double lower =
          model.prob_ids(ids.data() + 1, ctx - 1, ids.back());
      model.probs_[ctx][key] =
          std::max(static_cast<double>(count) - d, 0.0) / c_total +
          model.bows_[ctx][context] * lower;
    }
  }
  return model;
}

double NGramModel::prob_ids(const int* history, int length, int event) const {
  if (length > order_ - 1) {
    history += length - (order_ - 1);
    length = order_ - 1;
  }
  double bow_product = 1.0;
  for (int ctx = length; ctx >= 1; --ctx) {
    const int* h = history + length - ctx;
    auto it = probs_[ctx].find(pack(h, ctx, event));
    if (it != probs_[ctx].end()) return bow_product * it->second;
    auto bt = bows_[ctx].find(pack(h, ctx));
    if (bt != bows_[ctx].end()) bow_product *= bt->second;
  }
  auto it = probs_[0].find(pack(history, 0, event));
  return bow_product *
         (it != probs_[0].end() ? it->second : unseen_unigram_);
}

double NGramModel::prob(const std::vector<std::string>& history,
                        const std::string& token) const {
  if (order_ == 0) fail("lm: model is untrained");
  std::vector<int> h = to_ids(history);
  // History tokens keep their literal identity where possible; a literal
  // sentence-start in the history is legitimate context.
  for (size_t i = 0; i < history.size(); ++i)
    if (history[i] == kBos) h[i] = kBosId;
  const auto it = ids_.find(token);
  const int event = it == ids_.end() || it->second == kBosId ? kUnkId
                                                             : it->second;
  return prob_ids(h.data(), static_cast<int>(h.size()), event);
}

std::vector<double> NGramModel::event_probs(
    const std::vector<std::string>& tokens) const {
  if (order_ == 0) fail("lm: model is untrained");
  std::vector<int> events = to_ids(tokens);
  events.push_back(kEosId);
  std::vector<int> history(order_ - 1, kBosId);
  std::vector<double> out;
  out.reserve(events.size());
  for (int event : events) {
    out.push_back(
        prob_ids(history.data(), static_cast<int>(history.size()), event));
    if (order_ > 1) {
      history.erase(history.begin());
      history.push_back(event);
    }
  }
  return out;
}

const std::vector<std::string>& NGramModel::predictable_vocab() const {
  return predictable_;
}

std::vector<std::string> NGramModel::regular_vocab() const {
  std::vector<std::string> out;
  out.reserve(vocab_.size() > 3 ? vocab_.size() - 3 : 0);
  for (size_t i = 3; i < vocab_.size(); ++i) out.push_back(vocab_[i]);
  return out;
}

void NGramModel::save_arpa(const std::filesystem::path& arpa_path) const {
  if (order_ == 0) fail("lm: cannot save an untrained model");
  // Section L holds every stored (L)-gram plus every length-L context that
  // carries a back-off weight; context-only entries get the -99 sentinel.
  struct Entry {
    bool has_prob = false;
    double prob = 0.0;
    bool has_bow = false;
    double bow = 0.0;
  };
  std::vector<std::map<std::vector<std::string>, Entry>> sections(order_ + 1);
  auto names = [&](const std::string& key) {
    std::vector<std::string> out;
    for (int id : unpack(key)) out.push_back(vocab_[id]);
    return out;
  };
  for (int ctx = 0; ctx < order_; ++ctx) {
    for (const auto& [key, p] : probs_[ctx]) {
      Entry& e = sections[ctx + 1][names(key)];
      e.has_prob = true;
      e.prob = p;
    }
    if (ctx >= 1) {
      for (const auto& [key, bow] : bows_[ctx]) {
        Entry& e = sections[ctx][names(key)];
        e.has_bow = true;
        e.bow = bow;
      }
    }
  }
  // The sentence-start symbol appears as a context, never as an event; give
  // it the conventional unigram stub when it is not a context either.
  if (order_ == 1) sections[1][{kBos}];

  std::ofstream out(arpa_path);
  if (!out) fail("cannot write ARPA file '" + arpa_path.string() + "'");
  out << "\\data\\\n";
  for (int len = 1; len <= order_; ++len)
    out << "ngram " << len << "=" << sections[len].size() << "\n";
  for (int len = 1; len <= order_; ++len) {
    out << "\n\\" << len << "-grams:\n";
    for (const auto& [tokens, entry] : sections[len]) {
      out << (entry.has_prob ? format_log10(entry.prob)
                             : format_log10(0.0));
      for (const auto& tok : tokens) {
        if (tok.find_first_of(" \t\n") != std::string::npos)
          fail("lm: token '" + tok + "' contains whitespace, cannot serialize");
        out << (&tok == &tokens.front() ? "\t" : " ") << tok;
      }
      if (entry.has_bow) out << "\t" << format_log10(entry.bow);
      out << "\n";
    }
  }
  out << "\n\\end\\\n";
  if (!out) fail("short write to ARPA file '" + arpa_path.string() + "'");
}

void NGramModel::save(const std::filesystem::path& arpa_path,
                      const std::filesystem::path& sidecar_path) const {
  save_arpa(arpa_path);
  nlohmann::json side;
  side["order"] = order_;
  side["discount"] = discount_;
  side["bos"] = kBos;
  side["eos"] = kEos;
  side["unk"] = kUnk;
  std::ofstream sout(sidecar_path);
  if (!sout) fail("cannot write sidecar '" + sidecar_path.string() + "'");
  sout << side.dump(2) << "\n";
}

NGramModel NGramModel::load(const std::filesystem::path& arpa_path,
                            const std::filesystem::path& sidecar_path) {
  nlohmann::json side;
  {
    std::ifstream in(sidecar_path);
    if (!in) fail("cannot open sidecar '" + sidecar_path.string() + "'");
    try {
      in >> side;
    } catch (const nlohmann::json::parse_error& e) {
      fail(sidecar_path.string() + ": invalid sidecar JSON: " + e.what());
    }
  }
  const std::string bos = side.value("bos", std::string(kBos));
  const std::string eos = side.value("eos", std::string(kEos));
  const std::string unk = side.value("unk", std::string(kUnk));

  std::ifstream in(arpa_path);
  if (!in) fail("cannot open ARPA file '" + arpa_path.string() + "'");
  const std::string where = arpa_path.string();
  std::string line;
  while (std::getline(in, line) && line != "\\data\\") {
  }
  if (line != "\\data\\") fail(where + ": missing \\data\\ header");

  std::vector<size_t> declared;  // declared[L-1] = ngram L count
  while (std::getline(in, line)) {
    if (line.empty()) break;
    std::istringstream ls(line);
    std::string word;
    int len = 0;
    char eq = 0;
    size_t count = 0;
    ls >> word;
    if (word != "ngram") fail(where + ": bad \\data\\ line '" + line + "'");
    ls >> len >> eq >> count;
    if (!ls || eq != '=' || len < 1)
      fail(where + ": bad \\data\\ line '" + line + "'");
    declared.resize(std::max<size_t>(declared.size(), len));
    declared[len - 1] = count;
  }
  if (declared.empty()) fail(where + ": no ngram counts declared");
  const int order = static_cast<int>(declared.size());

  NGramModel model;
  model.order_ = order;
  model.discount_ = side.value("discount", 0.0);

  struct RawEntry {
    std::vector<std::string> tokens;
    double log_prob = 0.0;
    bool has_bow = false;
    double log_bow = 0.0;
  };
  std::vector<std::vector<RawEntry>> sections(order);
  std::set<std::string> regulars;
  int current = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "\\end\\") break;
    if (line.size() > 2 && line[0] == '\\' && line.back() == ':') {
      current = std::atoi(line.c_str() + 1);
      if (current < 1 || current > order)
        fail(where + ": unexpected section '" + line + "'");
      continue;
    }
    if (current == 0) fail(where + ": n-gram line before any section");
    std::istringstream ls(line);
    RawEntry entry;
    if (!(ls >> entry.log_prob))
      fail(where + ": bad n-gram line '" + line + "'");
    entry.tokens.resize(current);
    for (auto& tok : entry.tokens)
      if (!(ls >> tok)) fail(where + ": short n-gram line '" + line + "'");
    if (ls >> entry.log_bow) entry.has_bow = true;
    for (const auto& tok : entry.tokens)
      if (tok != bos && tok != eos && tok != unk) regulars.insert(tok);
    sections[current - 1].push_back(std::move(entry));
  }
  for (int len = 1; len <= order; ++len)
    if (sections[len - 1].size() != declared[len - 1])
      fail(where + ": section " + std::to_string(len) + " has " +
           std::to_string(sections[len - 1].size()) + " entries, header says " +
           std::to_string(declared[len - 1]));

  model.set_vocabulary({regulars.begin(), regulars.end()});
  model.probs_.assign(order, {});
  model.bows_.assign(order, {});
  auto id_of = [&](const std::string& tok) {
    if (tok == bos) return kBosId;
    if (tok == eos) return kEosId;
    if (tok == unk) return kUnkId;
    return model.ids_.at(tok);
  };
  for (int len = 1; len <= order; ++len) {
    for (const auto& entry : sections[len - 1]) {
      std::vector<int> ids;
      ids.reserve(len);
      for (const auto& tok : entry.tokens) ids.push_back(id_of(tok));
      const std::string key = pack(ids.data(), len);
      const bool stub = entry.log_prob <= kLogZero + 1e-9;
      if (!stub || len == 1) {
        // Unigram stubs stay stored as zero so lookups see the full vocab.
        if (ids.back() != kBosId)
          model.probs_[len - 1][key] =
              stub ? 0.0 : std::pow(10.0, entry.log_prob);
      }
      if (entry.has_bow && len < order)
        model.bows_[len][key] =
            entry.log_bow <= kLogZero + 1e-9 ? 0.0
                                             : std::pow(10.0, entry.log_bow);
    }
  }
  return model;
}

AdaptedModel::AdaptedModel(NGramModel general, NGramModel domain, double lambda)
    : general_(std::move(general)), domain_(std::move(domain)), lambda_(lambda) {
  if (lambda_ < 0.0 || lambda_ > 1.0) fail("adapt: lambda must lie in [0, 1]");
  if (general_.order() != domain_.order())
    fail("adapt: general and domain models have different orders");
  if (general_.predictable_vocab() != domain_.predictable_vocab())
    fail("adapt: general and domain models have different vocabularies");
}

double AdaptedModel::prob(const std::vector<std::string>& history,
                          const std::string& token) const {
  return lambda_ * domain_.prob(history, token) +
         (1.0 - lambda_) * general_.prob(history, token);
}

std::vector<double> AdaptedModel::event_probs(
    const std::vector<std::string>& tokens) const {
  std::vector<double> g = general_.event_probs(tokens);
  const std::vector<double> d = domain_.event_probs(tokens);
  for (size_t i = 0; i < g.size(); ++i)
    g[i] = lambda_ * d[i] + (1.0 - lambda_) * g[i];
  return g;
}

const std::vector<std::string>& AdaptedModel::predictable_vocab() const {
  return general_.predictable_vocab();
}

AdaptedModel adapt(NGramModel general,
                   const std::vector<std::vector<std::string>>& domain_corpus,
                   double lambda) {
  if (domain_corpus.empty()) fail("adapt: empty domain corpus");
  LmOptions options;
  options.order = general.order();
  options.discount = general.discount();
  NGramModel domain =
      NGramModel::train_with_vocab(domain_corpus, options,
                                   general.regular_vocab());
  return AdaptedModel(std::move(general), std::move(domain), lambda);
}

void save_adapted(const AdaptedModel& model,
                  const std::filesystem::path& general_arpa,
                  const std::filesystem::path& domain_arpa,
                  const std::filesystem::path& sidecar_path) {
  model.general().save_arpa(general_arpa);
  model.domain().save_arpa(domain_arpa);
  nlohmann::json side;
  side["lambda"] = model.lambda();
  side["general"] = general_arpa.filename().string();
  side["domain"] = domain_arpa.filename().string();
  side["order"] = model.general().order();
  side["discount"] = model.general().discount();
  side["bos"] = kBos;
  side["eos"] = kEos;
  side["unk"] = kUnk;
  std::ofstream sout(sidecar_path);
  if (!sout) fail("cannot write sidecar '" + sidecar_path.string() + "'");
  sout << side.dump(2) << "\n";
}

AdaptedModel load_adapted(const std::filesystem::path& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) fail("cannot open sidecar '" + sidecar_path.string() + "'");
  nlohmann::json side;
  try {
    in >> side;
  } catch (const nlohmann::json::parse_error& e) {
    fail(sidecar_path.string() + ": invalid sidecar JSON: " + e.what());
  }
  const auto dir = sidecar_path.parent_path();
  NGramModel general =
      NGramModel::load(dir / side.at("general").get<std::string>(),
                       sidecar_path);
  NGramModel domain =
      NGramModel::load(dir / side.at("domain").get<std::string>(),
                       sidecar_path);
  return AdaptedModel(std::move(general), std::move(domain),
                      side.at("lambda").get<double>());
}

double utterance_ppl(const LanguageModel& model,
                     const std::vector<std::string>& tokens) {
  if (tokens.empty()) fail("utterance_ppl: empty token sequence");
  const std::vector<double> probs = model.event_probs(tokens);
  double log_sum = 0.0;
  for (double p : probs) log_sum += std::log(p);
  return std::exp(-log_sum / static_cast<double>(probs.size()));
}

double audio_ppl(const LanguageModel& model,
                 const std::vector<const Utterance*>& utterances,
                 AudioPplMode mode) {
  if (utterances.empty()) fail("audio_ppl: audio has no utterances");
  double weighted_sum = 0.0;
  double weight_total = 0.0;
  for (const Utterance* utt : utterances) {
    const double weight =
        mode == AudioPplMode::token_weighted
            ? static_cast<double>(utt->tokens.size() + 1)
            : 1.0;
    weighted_sum += weight * utterance_ppl(model, utt->tokens);
    weight_total += weight;
  }
  return weighted_sum / weight_total;
}

}  // namespace csel
