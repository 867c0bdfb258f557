#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "csel/corpus.hpp"

namespace csel {

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";

// Scoring interface shared by the general, domain, and adapted models.
// Histories run oldest to newest; implementations truncate or pad as needed.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  // P(token | history). Tokens outside the vocabulary (and literal special
  // names) score as the unknown symbol.
  virtual double prob(const std::vector<std::string>& history,
                      const std::string& token) const = 0;

  // Linear probability of each scored event: every token, then sentence-end.
  // Result size is tokens.size() + 1.
  virtual std::vector<double> event_probs(
      const std::vector<std::string>& tokens) const = 0;

  // Every symbol the model can predict: regular tokens, unknown, sentence-end.
  virtual const std::vector<std::string>& predictable_vocab() const = 0;
};

struct LmOptions {
  int order = 4;
  double discount = 0.75;  // absolute discount, 0 gives plain MLE
  size_t min_count = 1;    // rarer tokens fold into the unknown symbol
};

// Back-off n-gram model with interpolated absolute discounting:
//   P(w|h) = max(c(h,w)-d, 0)/c(h) + bow(h)*P(w|h'), bow(h) = d*N1+(h)/c(h)
// where h' drops the oldest history token and the unigram level interpolates
// with a uniform distribution over the predictable vocabulary. Stored
// probabilities are the fully interpolated values, so lookups follow plain
// ARPA back-off semantics and d = 0 reproduces exact count ratios.
class NGramModel : public LanguageModel {
 public:
  NGramModel() = default;

  static NGramModel train(const std::vector<std::vector<std::string>>& corpus,
                          const LmOptions& options = {});
  // Same estimator with the regular vocabulary fixed up front (tokens outside
  // it fold into the unknown symbol); used to train the domain model on the
  // general model's vocabulary.
  static NGramModel train_with_vocab(
      const std::vector<std::vector<std::string>>& corpus,
      const LmOptions& options, const std::vector<std::string>& regular_vocab);

  double prob(const std::vector<std::string>& history,
              const std::string& token) const override;
  std::vector<double> event_probs(
      const std::vector<std::string>& tokens) const override;
  const std::vector<std::string>& predictable_vocab() const override;

  int order() const { return order_; }
  double discount() const { return discount_; }
  // Regular tokens only, sorted; feed to train_with_vocab for a shared space.
  std::vector<std::string> regular_vocab() const;

  // ARPA text format plus a JSON sidecar naming the specials.
  void save_arpa(const std::filesystem::path& arpa_path) const;
  void save(const std::filesystem::path& arpa_path,
            const std::filesystem::path& sidecar_path) const;
  static NGramModel load(const std::filesystem::path& arpa_path,
                         const std::filesystem::path& sidecar_path);

 private:
  std::vector<int> to_ids(const std::vector<std::string>& tokens) const;
  double prob_ids(const int* history, int length, int event) const;
  void set_vocabulary(const std::vector<std::string>& regulars);

  int order_ = 0;
  double discount_ = 0.0;
  std::vector<std::string> vocab_;  // [0]=<s>, [1]=</s>, [2]=<unk>, regulars
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> predictable_;
  // probs_[L]: (L+1)-gram -> interpolated P; bows_[L]: length-L context -> bow.
  std::vector<std::unordered_map<std::string, double>> probs_;
  std::vector<std::unordered_map<std::string, double>> bows_;
  double unseen_unigram_ = 0.0;
};

// P2(w|h) = lambda*P_domain(w|h) + (1-lambda)*P_general(w|h). Both models
// share one vocabulary, so P2 normalizes whenever its parts do.
class AdaptedModel : public LanguageModel {
 public:
  AdaptedModel(NGramModel general, NGramModel domain, double lambda);

  double prob(const std::vector<std::string>& history,
              const std::string& token) const override;
  std::vector<double> event_probs(
      const std::vector<std::string>& tokens) const override;
  const std::vector<std::string>& predictable_vocab() const override;

  double lambda() const { return lambda_; }
  const NGramModel& general() const { return general_; }
  const NGramModel& domain() const { return domain_; }

 private:
  NGramModel general_;
  NGramModel domain_;
  double lambda_ = 0.5;
};

// Trains the domain model on the general model's vocabulary and options.
AdaptedModel adapt(NGramModel general,
                   const std::vector<std::vector<std::string>>& domain_corpus,
                   double lambda = 0.5);

// Persistence for the adapted pair: two ARPA files plus one sidecar holding
// lambda, the specials, and the (relative) ARPA paths.
void save_adapted(const AdaptedModel& model,
                  const std::filesystem::path& general_arpa,
                  const std::filesystem::path& domain_arpa,
                  const std::filesystem::path& sidecar_path);
AdaptedModel load_adapted(const std::filesystem::path& sidecar_path);

// exp(-(1/T) * sum ln P(event)) over the tokens plus sentence-end.
double utterance_ppl(const LanguageModel& model,
                     const std::vector<std::string>& tokens);

enum class AudioPplMode {
  mean_of_utterances,  // arithmetic mean of utterance PPLs
  token_weighted,      // mean weighted by scored-event counts
};

double audio_ppl(const LanguageModel& model,
                 const std::vector<const Utterance*>& utterances,
                 AudioPplMode mode = AudioPplMode::mean_of_utterances);

}  // namespace csel
