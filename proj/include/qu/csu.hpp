#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qu/common.hpp"
#include "qu/corpus.hpp"
#include "qu/ner.hpp"

namespace qu {

struct UntrainedModel : Error {
  UntrainedModel() : Error("question classifier is untrained") {}
};
struct NoKeywordsExtractable : Error {
  NoKeywordsExtractable() : Error("rewrite produced no keywords") {}
};
struct EmptyQuerySet : Error {
  EmptyQuerySet() : Error("no queries to aggregate") {}
};

// Four-way question intent. A product search is triggered only for P.
enum class QuestionIntent : int { P = 0, H = 1, G = 2, S = 3 };
std::string_view question_intent_code(QuestionIntent q);
QuestionIntent question_intent_from_code(std::string_view code);

struct CsuOutput {
  QuestionIntent intent = QuestionIntent::P;
  bool context_switch = false;
  std::optional<std::vector<std::string>> keywords;  // present iff intent == P
};

CsuOutput make_csu_output(QuestionIntent intent, bool context_switch,
                          std::vector<std::string> keywords_if_product);

// Linear 4-class softmax classifier over hashed unigrams + bigrams.
class QuestionClassifier {
 public:
  QuestionClassifier() = default;
  explicit QuestionClassifier(int feature_dim);

  bool trained() const { return trained_; }
  QuestionIntent classify(const std::string& utterance) const;
  std::vector<double> class_scores(const std::string& utterance) const;

  std::string to_json() const;
  static QuestionClassifier from_json(const std::string& blob);

  struct TrainConfig {
    double learning_rate = 0.5;
    int epochs = 60;
    double l2 = 1e-5;
    int feature_dim = 1 << 12;
  };
  struct Example {
    std::string utterance;
    QuestionIntent intent;
  };
  static QuestionClassifier train(const std::vector<Example>& examples, const TrainConfig& hyper,
                                  std::vector<double>* loss_curve = nullptr);

 private:
  std::vector<int> featurize(const std::string& utterance) const;

  int feature_dim_ = 0;
  std::vector<double> weights_;  // [feature_dim x 4]
  std::vector<double> bias_;
  bool trained_ = false;
};

// True when the utterance shares too little content with the previous turn.
// First turn of a session is always a switch.
bool detect_context_switch(const std::vector<std::string>& history, const std::string& utterance,
                           double theta = 0.2);

// Extractive question-to-keywords rewrite over NER spans plus content tokens.
// Anaphoric turns (no product type or title of their own) inherit the missing
// entity spans from the previous turn's parse (one turn back).
std::vector<std::string> rewrite_q2k(const std::string& utterance, const ParsedQuery& parsed,
                                     const std::optional<ParsedQuery>& previous_parse);

// Share (percent of k) of irrelevant products among the top k.
double irr_at_k(const std::vector<Esci>& ranked_esci, int k = 16);

// Percent of queries returning fewer than k results.
double srr(const std::vector<int>& result_counts, int k = 16);

}  // namespace qu
