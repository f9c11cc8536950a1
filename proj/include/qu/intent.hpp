#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qu/common.hpp"
#include "qu/corpus.hpp"

namespace qu {

struct UnknownMarketplace : Error {
  explicit UnknownMarketplace(const std::string& m) : Error("unknown marketplace: " + m) {}
};
struct IndexOutsideMask : Error {
  explicit IndexOutsideMask(int idx)
      : Error("label index " + std::to_string(idx) + " outside marketplace mask") {}
};

using LabelMask = std::vector<bool>;  // over the global label list

// Concatenation of per-marketplace label spaces; each marketplace masks its
// own contiguous slice.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(const std::map<std::string, std::vector<std::string>>& per_marketplace);

  int num_global() const { return static_cast<int>(global_.size()); }
  const std::vector<std::string>& global_labels() const { return global_; }
  const std::vector<std::string>& marketplaces() const { return marketplaces_; }

  LabelMask mask_for_marketplace(const std::string& marketplace) const;
  // Global index of `label` within a marketplace's slice.
  int global_index(const std::string& marketplace, const std::string& label) const;

 private:
  std::vector<std::string> marketplaces_;
  std::vector<std::string> global_;
  std::map<std::string, std::pair<int, int>> slices_;  // marketplace -> [begin, end)
};

struct SparseLabels {
  // (global label index, target in (0,1]) for nonzero labels only
  std::vector<std::pair<int, double>> nonzero;
};

constexpr double kProbEpsilon = 1e-7;

// Nonzero-labels-only evaluation of the dense multi-label BCE sum.
double semi_sparse_bce(const std::vector<double>& probs, const SparseLabels& sparse,
                       const LabelMask& mask);

// Gradient w.r.t. logits for sigmoid-parameterized probs; zero outside mask.
std::vector<double> semi_sparse_bce_grad(const std::vector<double>& probs,
                                         const SparseLabels& sparse, const LabelMask& mask);

struct IntentExample {
  std::string text;
  std::string marketplace;
  SparseLabels labels;
};

struct IntentTrainConfig {
  double learning_rate = 0.5;
  int epochs = 40;
  double l2 = 1e-5;
  int feature_dim = 1 << 12;  // hashed tokens; marketplace one-hot appended
  uint64_t seed = 0;
};

class IntentModel {
 public:
  IntentModel() = default;
  IntentModel(LabelSpace space, int feature_dim);

  const LabelSpace& space() const { return space_; }
  int feature_dim() const { return feature_dim_; }
  bool trained() const { return trained_; }

  std::vector<int> featurize(const std::string& text, const std::string& marketplace) const;
  std::vector<double> logits(const std::vector<int>& features) const;
  std::vector<double> probabilities(const std::string& text, const std::string& marketplace) const;

  struct Scored {
    int global_index;
    std::string label;
    double score;
  };
  // In-mask labels with score >= threshold, descending.
  std::vector<Scored> predict(const std::string& text, const std::string& marketplace,
                              double threshold) const;

  std::string to_json() const;
  static IntentModel from_json(const std::string& blob);

  friend IntentModel train_intent(const std::vector<IntentExample>& examples,
                                  const LabelSpace& space, const IntentTrainConfig& hyper,
                                  std::vector<double>* loss_curve);

 private:
  LabelSpace space_;
  int feature_dim_ = 0;
  int total_dim_ = 0;  // feature_dim_ + one-hot marketplace block
  std::vector<double> weights_;  // [total_dim x num_global]
  std::vector<double> bias_;
  bool trained_ = false;
};

IntentModel train_intent(const std::vector<IntentExample>& examples, const LabelSpace& space,
                         const IntentTrainConfig& hyper,
                         std::vector<double>* loss_curve = nullptr);

// Maximum recall over score thresholds whose precision >= target; 0 if none.
double recall_at_precision(const std::vector<double>& scores, const std::vector<bool>& gold,
                           double target_precision);

}  // namespace qu
