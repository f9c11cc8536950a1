#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qu/corpus.hpp"
#include "qu/csu.hpp"
#include "qu/dynweights.hpp"
#include "qu/features.hpp"
#include "qu/intent.hpp"
#include "qu/ner.hpp"
#include "qu/ranker.hpp"
#include "qu/retriever.hpp"
#include "qu/segments.hpp"

namespace qu {

struct TrainingDiverged : Error {
  TrainingDiverged() : Error("training diverged: non-finite loss") {}
};

struct PipelineConfig {
  NerFeatureConfig ner_features;
  CrfTrainConfig ner_train;
  LshParams lsh;

  IntentTrainConfig intent_train;
  QuestionClassifier::TrainConfig csu_train;
  double context_switch_theta = 0.2;

  int hidden = 16;
  double rank_learning_rate = 0.05;
  int rank_steps = 400;
  int batch_size = 8;
  uint64_t rank_seed = 7;
  bool use_qu_features = true;

  double support_fraction = 0.25;
  uint64_t split_seed = 13;

  bool dynamic_scheduler = false;
  SchedulerConfig scheduler;  // used when dynamic_scheduler
  std::array<double, kNumTasks> static_task_weights{1.0, 1.0, 1.0, 1.0};

  int eval_k = 16;
};

// Gazetteer surfaces as indexable knowledge entries.
std::vector<KnowledgeEntry> knowledge_entries(const Gazetteer& gazetteer);

// NER training examples from annotated queries.
std::vector<CrfExample> make_ner_examples(const std::vector<Query>& queries,
                                          const LshIndex& index, const NerFeatureConfig& cfg);

// Session turns as annotated pseudo-queries, so the tagger also sees
// conversational scaffolding (labeled O) during training.
std::vector<Query> annotated_turns(const std::vector<Session>& sessions);

CrfModel train_ner(const std::vector<Query>& queries, const LshIndex& index,
                   const NerFeatureConfig& feature_cfg, const CrfTrainConfig& train_cfg);

std::vector<ParsedQuery> parse_all(const std::vector<Query>& queries, const LshIndex& index,
                                   const CrfModel& model, const NerFeatureConfig& cfg);

// Label space observed in the data, one slice per marketplace.
LabelSpace label_space_from(const std::vector<Query>& queries);

std::vector<IntentExample> make_intent_examples(const std::vector<Query>& queries,
                                                const LabelSpace& space);

std::vector<QuestionClassifier::Example> make_question_examples(
    const std::vector<Session>& sessions);

std::map<std::string, QueryStats> compute_query_stats(const std::vector<Query>& queries,
                                                      const std::vector<JudgedPair>& judgments);

std::map<std::string, double> compute_product_click_rates(
    const std::vector<Query>& queries, const std::vector<Product>& products,
    const std::vector<JudgedPair>& judgments);

// Per-query ranking groups with features, gains and (optionally) segments.
// Queries without judgments are dropped.
std::vector<QueryGroup> build_groups(const Dataset& dataset,
                                     const std::vector<ParsedQuery>& parses,
                                     bool use_qu_features,
                                     const std::optional<SegmenterConfig>& segmenter);

// Segmenter inputs (frequency, mean judged price, pt-match ratio) per query id.
struct SegmenterInputs {
  std::vector<double> frequencies;
  std::vector<double> prices;
  std::vector<double> pt_ratios;
};
SegmenterInputs segmenter_inputs(const Dataset& dataset, const std::vector<ParsedQuery>& parses,
                                 const std::vector<std::string>& query_ids);

struct RankTrainingRun {
  RankModel model;
  WeightTable weights;
  std::string weight_log_csv;
  int scheduler_updates = 0;
};

RankTrainingRun train_ranker(const std::vector<QueryGroup>& train_groups,
                             const std::vector<QueryGroup>& support_groups,
                             const PipelineConfig& cfg);

struct TrainedPipeline {
  std::optional<LshIndex> index;
  CrfModel ner;
  IntentModel intent;
  QuestionClassifier question_classifier;
  SegmenterConfig segmenter;
  RankTrainingRun ranking;
  MetricsReport metrics;           // over all judged queries
  std::vector<QueryGroup> groups;  // evaluation groups (all queries)
};

TrainedPipeline run_training(const Dataset& dataset, const PipelineConfig& cfg);

// One CSU signal row per session turn.
struct CsuSignalRow {
  std::string session_id;
  int turn = 0;
  bool is_question = false;
  std::string utterance;
  CsuOutput output;
};

std::vector<CsuSignalRow> csu_signals(const std::vector<Session>& sessions,
                                      const QuestionClassifier& classifier,
                                      const LshIndex& index, const CrfModel& ner,
                                      const NerFeatureConfig& ner_cfg, double theta);

std::string csu_signals_jsonl(const std::vector<CsuSignalRow>& rows);

}  // namespace qu
