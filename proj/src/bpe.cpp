#include "csel/bpe.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace csel {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

size_t code_point_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;  // invalid lead byte, pass through alone
}

void apply_merges(const BpeModel& model, std::vector<std::string>& symbols) {
  for (const auto& [left, right] : model.merges) {
    for (size_t i = 0; i + 1 < symbols.size();) {
      if (symbols[i] == left && symbols[i + 1] == right) {
        symbols[i] = left + right;
        symbols.erase(symbols.begin() + i + 1);
      } else {
        ++i;
      }
    }
  }
}

}  // namespace

std::string normalize_word(const std::string& word) {
  std::string out = word;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> split_symbols(const std::string& word) {
  std::vector<std::string> symbols;
  for (size_t i = 0; i < word.size();) {
    const size_t len =
        std::min(code_point_length(static_cast<unsigned char>(word[i])),
                 word.size() - i);
    symbols.push_back(word.substr(i, len));
    i += len;
  }
  if (symbols.empty()) symbols.emplace_back();
  symbols.back() += kEndOfWord;
  return symbols;
}

BpeModel train_bpe(const std::vector<std::string>& words, int target_vocab) {
  if (words.empty()) fail("train_bpe: empty corpus");
  if (target_vocab < 1) fail("train_bpe: target_vocab must be positive");

  // Distinct words with counts; merging operates on these, not the raw stream.
  std::unordered_map<std::string, long long> word_counts;
  for (const auto& w : words) ++word_counts[normalize_word(w)];
  std::vector<std::pair<std::vector<std::string>, long long>> table;
  table.reserve(word_counts.size());
  std::set<std::string> alphabet;
  for (const auto& [word, count] : word_counts) {
    auto symbols = split_symbols(word);
    for (const auto& s : symbols) alphabet.insert(s);
    table.emplace_back(std::move(symbols), count);
  }

  BpeModel model;
  model.target_vocab = target_vocab;
  model.base_alphabet.assign(alphabet.begin(), alphabet.end());
  if (static_cast<size_t>(target_vocab) < model.base_alphabet.size())
    fail("train_bpe: target_vocab " + std::to_string(target_vocab) +
         " is below the base alphabet size " +
         std::to_string(model.base_alphabet.size()));

  size_t vocab = model.base_alphabet.size();
  while (vocab < static_cast<size_t>(target_vocab)) {
    std::map<std::pair<std::string, std::string>, long long> pairs;
    for (const auto& [symbols, count] : table)
      for (size_t i = 0; i + 1 < symbols.size(); ++i)
        pairs[{symbols[i], symbols[i + 1]}] += count;

    std::pair<std::string, std::string> best;
    long long best_count = 0;
    for (const auto& [pair, count] : pairs) {
      if (count > best_count) {  // map order makes first max the smallest pair
        best = pair;
        best_count = count;
      }
    }
    if (best_count < 2) break;

    model.merges.push_back(best);
    ++vocab;
    const std::string merged = best.first + best.second;
    for (auto& [symbols, count] : table) {
      for (size_t i = 0; i + 1 < symbols.size();) {
        if (symbols[i] == best.first && symbols[i + 1] == best.second) {
          symbols[i] = merged;
          symbols.erase(symbols.begin() + i + 1);
        } else {
          ++i;
        }
      }
    }
  }
  return model;
}

std::vector<std::string> encode_word(const BpeModel& model,
                                     const std::string& word) {
  std::vector<std::string> symbols = split_symbols(normalize_word(word));
  apply_merges(model, symbols);
  return symbols;
}

std::vector<std::string> encode(const BpeModel& model,
                                const std::vector<std::string>& words) {
  std::unordered_map<std::string, std::vector<std::string>> cache;
  std::vector<std::string> out;
  for (const auto& word : words) {
    auto it = cache.find(word);
    if (it == cache.end())
      it = cache.emplace(word, encode_word(model, word)).first;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

std::vector<std::string> decode(const BpeModel&,
                                const std::vector<std::string>& tokens) {
  const std::string marker = kEndOfWord;
  std::vector<std::string> words;
  std::string current;
  for (const auto& tok : tokens) {
    if (tok.size() >= marker.size() &&
        tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0) {
      current += tok.substr(0, tok.size() - marker.size());
      words.push_back(std::move(current));
      current.clear();
    } else {
      current += tok;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));  // best effort
  return words;
}

void save_bpe(const BpeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write BPE model '" + path.string() + "'");
  out << "bpe " << model.target_vocab << "\n";
  for (const auto& [left, right] : model.merges) {
    if (left.find(' ') != std::string::npos ||
        right.find(' ') != std::string::npos)
      fail("BPE merge symbols may not contain spaces");
    out << left << " " << right << "\n";
  }
  if (!out) fail("short write to BPE model '" + path.string() + "'");
}

BpeModel load_bpe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open BPE model '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(path.string() + ": empty BPE model file");
  std::istringstream header(line);
  std::string magic;
  BpeModel model;
  if (!(header >> magic >> model.target_vocab) || magic != "bpe")
    fail(path.string() + ": bad BPE header, expected 'bpe <target_vocab>'");

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 >= line.size())
      fail(path.string() + ":" + std::to_string(line_no) +
           ": merge line is not 'left right'");
    model.merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return model;
}

}  // namespace csel
