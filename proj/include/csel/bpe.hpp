#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace csel {

// End-of-word marker, fused onto the final symbol of each word ("low" splits
// into l, o, w</w>). Keeps decode an exact inverse: a token carrying the
// marker closes the current word.
inline constexpr const char* kEndOfWord = "</w>";

struct BpeModel {
  int target_vocab = 5000;
  std::vector<std::string> base_alphabet;  // marker-fused symbols included
  std::vector<std::pair<std::string, std::string>> merges;  // learned order
};

// ASCII lowercase; everything else passes through untouched.
std::string normalize_word(const std::string& word);

// UTF-8 code point split with the end-of-word marker fused to the last symbol.
std::vector<std::string> split_symbols(const std::string& word);

// Greedy most-frequent-pair training. Stops when |base_alphabet| + |merges|
// reaches target_vocab or no pair occurs at least twice; frequency ties go to
// the lexicographically smallest pair.
BpeModel train_bpe(const std::vector<std::string>& words,
                   int target_vocab = 5000);

std::vector<std::string> encode_word(const BpeModel& model,
                                     const std::string& word);
std::vector<std::string> encode(const BpeModel& model,
                                const std::vector<std::string>& words);
std::vector<std::string> decode(const BpeModel& model,
                                const std::vector<std::string>& tokens);

// Text model file: line 1 `bpe <target_vocab>`, then one `left right` merge
// per line in learned order.
void save_bpe(const BpeModel& model, const std::filesystem::path& path);
BpeModel load_bpe(const std::filesystem::path& path);

}  // namespace csel
