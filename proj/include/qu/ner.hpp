#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qu/common.hpp"
#include "qu/corpus.hpp"
#include "qu/retriever.hpp"

namespace qu {

// BIO tagging over the four entity types; index 0 is O.
class LabelSchema {
 public:
  LabelSchema();

  int num_labels() const { return static_cast<int>(names_.size()); }
  const std::string& name(int label) const { return names_[static_cast<size_t>(label)]; }
  int outside() const { return 0; }
  int begin_label(EntityType t) const { return 1 + 2 * static_cast<int>(t); }
  int inside_label(EntityType t) const { return 2 + 2 * static_cast<int>(t); }
  bool is_begin(int label) const { return label > 0 && label % 2 == 1; }
  bool is_inside(int label) const { return label > 0 && label % 2 == 0; }
  EntityType entity_of(int label) const;

 private:
  std::vector<std::string> names_;
};

// Per-token, per-entity-type retrieval evidence: token lies inside a probe
// window whose best gazetteer hit of that type scored >= tau.
struct RetrievalEvidence {
  std::vector<std::array<bool, kNumEntityTypes>> per_token;
};

struct NerFeatureConfig {
  int feature_dim = 1 << 13;
  double evidence_tau = 0.6;
  int max_probe_window = 4;
  int retrieve_k = 5;
  bool use_retrieval = true;
};

RetrievalEvidence compute_evidence(const std::vector<std::string>& tokens, const LshIndex& index,
                                   const NerFeatureConfig& cfg);

struct FeatureSequence {
  int dim = 0;
  std::vector<std::vector<int>> token_features;  // sorted unique ids per token

  int length() const { return static_cast<int>(token_features.size()); }
};

FeatureSequence featurize_tokens(const std::vector<std::string>& tokens,
                                 const RetrievalEvidence& evidence, const NerFeatureConfig& cfg);

struct CrfModel {
  LabelSchema schema;
  int feature_dim = 0;
  std::vector<double> unary;       // [feature_dim x num_labels], row-major by feature
  std::vector<double> transition;  // [num_labels x num_labels]

  double unary_weight(int feature, int label) const {
    return unary[static_cast<size_t>(feature) * static_cast<size_t>(schema.num_labels()) +
                 static_cast<size_t>(label)];
  }
  double trans_weight(int from, int to) const {
    return transition[static_cast<size_t>(from) * static_cast<size_t>(schema.num_labels()) +
                      static_cast<size_t>(to)];
  }
};

CrfModel make_crf_model(int feature_dim);

// Unary potentials for a sequence: [position x label].
std::vector<double> unary_scores(const CrfModel& model, const FeatureSequence& feats);

double log_partition(const CrfModel& model, const FeatureSequence& feats);

std::vector<int> viterbi_decode(const CrfModel& model, const FeatureSequence& feats);

struct CrfGradient {
  double loss = 0.0;
  std::vector<double> unary;       // same layout as model
  std::vector<double> transition;
};

CrfGradient nll_gradient(const CrfModel& model, const FeatureSequence& feats,
                         const std::vector<int>& gold);

// Posterior marginals per position (forward-backward); rows sum to 1.
std::vector<double> marginals(const CrfModel& model, const FeatureSequence& feats);

struct CrfExample {
  FeatureSequence features;
  std::vector<int> gold;
};

struct CrfTrainConfig {
  double learning_rate = 0.5;
  int epochs = 30;
  double l2 = 1e-4;
  uint64_t seed = 0;
};

// Full-batch gradient descent with backtracking; the regularized objective is
// non-increasing across epochs.
CrfModel train_crf(const std::vector<CrfExample>& examples, int feature_dim,
                   const CrfTrainConfig& hyper, std::vector<double>* loss_curve = nullptr);

struct ParsedQuery {
  Query query;
  std::vector<std::string> tokens;
  std::vector<EntitySpan> spans;
  // first span per entity type
  std::array<std::optional<std::string>, kNumEntityTypes> attributes;

  const std::optional<std::string>& attribute(EntityType t) const {
    return attributes[static_cast<size_t>(t)];
  }
};

// Spans from a BIO sequence; stray I-X is promoted to B-X.
std::vector<EntitySpan> spans_from_labels(const std::vector<std::string>& tokens,
                                          const std::vector<int>& labels,
                                          const LabelSchema& schema);

ParsedQuery parse_query(const Query& query, const LshIndex& index, const CrfModel& model,
                        const NerFeatureConfig& cfg);

// Tokens + gold BIO labels for an annotated query.
std::vector<int> gold_labels_for(const Query& query, const LabelSchema& schema);

// Exact-span F1 between gold and predicted span lists.
double span_f1(const std::vector<std::vector<EntitySpan>>& gold,
               const std::vector<std::vector<EntitySpan>>& predicted);

// Model (de)serialization, versioned JSON blob.
std::string crf_to_json(const CrfModel& model);
CrfModel crf_from_json(const std::string& blob);

}  // namespace qu
