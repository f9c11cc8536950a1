#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qu/common.hpp"
#include "qu/corpus.hpp"
#include "qu/dynweights.hpp"
#include "qu/features.hpp"
#include "qu/taxonomy.hpp"

namespace qu {

struct NoCandidates : Error {
  NoCandidates() : Error("no candidates to rank") {}
};
struct NoComparablePairs : Error {
  NoComparablePairs() : Error("no discordant gain pairs in group") {}
};
struct ZeroIdealGain : Error {
  ZeroIdealGain() : Error("ideal gain is zero; query excluded from aggregation") {}
};
struct EmptyDataset : Error {
  EmptyDataset() : Error("empty dataset") {}
};

// Gain constants, centralized.
constexpr double kClickGainBlend = 0.2;       // purchase gain = purchases + 0.2 * clicks
inline double esci_gain(Esci e) {
  switch (e) {
    case Esci::Exact: return 1.0;
    case Esci::Substitute: return 0.5;
    case Esci::Complement: return 0.25;
    case Esci::Irrelevant: return 0.0;
  }
  throw Error("bad esci");
}

struct Candidate {
  std::string product_id;
  std::array<double, kQuFeatureDim> features{};
  std::array<double, kNumTasks> gains{};
  Esci esci = Esci::Irrelevant;
};

// Task gains from judgment + product data. `brand_match` is the query/product
// brand-match bit; an engaged product is one with at least one click.
std::array<double, kNumTasks> task_gains(const JudgedPair& judgment, double price,
                                         bool brand_match);

struct QueryGroup {
  std::string query_id;
  std::vector<Candidate> candidates;
  std::vector<SegmentId> segments;  // sorted, unique
};

// Shared-bottom multi-task model: standardized input -> tanh hidden layer ->
// one linear head per task.
struct RankModel {
  int input_dim = kQuFeatureDim;
  int hidden = 16;
  std::vector<double> w1;  // [input_dim x hidden]
  std::vector<double> b1;  // [hidden]
  std::array<std::vector<double>, kNumTasks> w2;  // [hidden] per task
  std::array<double, kNumTasks> b2{};
  std::vector<double> feature_mean;  // input standardization
  std::vector<double> feature_scale;

  std::string to_json() const;
  static RankModel from_json(const std::string& blob);
};

RankModel make_rank_model(int input_dim, int hidden, uint64_t seed);

// Fit standardization constants from training groups.
void fit_standardization(RankModel& model, const std::vector<QueryGroup>& groups);

double score(const RankModel& model, TaskId task, const std::array<double, kQuFeatureDim>& x);

struct RankedList {
  std::string query_id;
  std::vector<std::pair<std::string, double>> items;  // (product id, score), descending
  int k = 16;
};

// Purchase-head ranking, ties broken by product id ascending.
RankedList rank_topk(const RankModel& model, const QueryGroup& group, int k = 16);

struct RankGradient {
  double loss = 0.0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::array<std::vector<double>, kNumTasks> w2;
  std::array<double, kNumTasks> b2{};
};

// Mean pairwise logistic loss over discordant-gain pairs for one task.
double task_loss(const RankModel& model, TaskId task, const QueryGroup& group);
// Loss plus gradients; accumulates into `grad` scaled by `weight`.
double task_loss_grad(const RankModel& model, TaskId task, const QueryGroup& group,
                      double weight, RankGradient& grad);

struct TrainStepResult {
  std::array<double, kNumTasks> task_losses{};  // weighted batch losses
  std::array<int, kNumTasks> groups_used{};
};

// One full gradient-descent step over the batch; group weights are the mean
// WeightTable entry across the group's segments.
TrainStepResult train_step(RankModel& model, const std::vector<QueryGroup>& batch,
                           const WeightTable& weights, double learning_rate);

double ndcg_at_k(const std::vector<double>& ranked_gains, const std::vector<double>& ideal_gains,
                 int k = 16);

struct MetricsReport {
  std::array<double, kNumTasks> ndcg{};       // NDCG@k of the purchase-head ranking, per task gain
  std::array<int, kNumTasks> ndcg_queries{};  // queries with positive ideal gain
  double irr = 0.0;
  std::array<double, kNumTasks> mean_task_loss{};
  std::array<int, kNumTasks> loss_queries{};
  int queries = 0;
  int k = 16;

  std::string to_json() const;
};

using ScoreFn = std::function<double(const QueryGroup&, const Candidate&)>;
// Returns nullopt for groups with no comparable pairs.
using GroupLossFn = std::function<std::optional<double>(TaskId, const QueryGroup&)>;

MetricsReport evaluate(const RankModel& model, const std::vector<QueryGroup>& groups, int k = 16);
// Same aggregation with an injected scorer (oracle tests, ablations).
MetricsReport evaluate_with(const ScoreFn& scorer, const GroupLossFn& loss_fn,
                            const std::vector<QueryGroup>& groups, int k);

// Mean per-(task, segment) and pooled support losses at a checkpoint.
LossSnapshot compute_support_losses(const RankModel& model,
                                    const std::vector<QueryGroup>& support);

}  // namespace qu
