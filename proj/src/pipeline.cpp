#include "qu/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace qu {

using nlohmann::json;

std::vector<KnowledgeEntry> knowledge_entries(const Gazetteer& gazetteer) {
  std::vector<KnowledgeEntry> entries;
  int next_id = 0;
  for (const auto& [type, surfaces] : gazetteer) {
    for (const auto& s : surfaces) {
      entries.push_back({next_id++, s, type});
    }
  }
  return entries;
}

std::vector<CrfExample> make_ner_examples(const std::vector<Query>& queries,
                                          const LshIndex& index, const NerFeatureConfig& cfg) {
  LabelSchema schema;
  std::vector<CrfExample> examples;
  examples.reserve(queries.size());
  for (const auto& q : queries) {
    std::vector<std::string> tokens = tokenize(q.text);
    if (tokens.empty()) continue;
    RetrievalEvidence ev;
    if (cfg.use_retrieval) ev = compute_evidence(tokens, index, cfg);
    CrfExample ex;
    ex.features = featurize_tokens(tokens, ev, cfg);
    ex.gold = gold_labels_for(q, schema);
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<Query> annotated_turns(const std::vector<Session>& sessions) {
  std::vector<Query> out;
  for (const auto& s : sessions) {
    for (size_t ti = 0; ti < s.turns.size(); ++ti) {
      const SessionTurn& turn = s.turns[ti];
      Query q;
      q.id = s.id + "#" + std::to_string(ti);
      q.text = fold_text(turn.utterance);
      q.marketplace = "US";
      q.frequency = 1;
      q.gold_spans = turn.gold_spans;
      if (!q.text.empty()) out.push_back(std::move(q));
    }
  }
  return out;
}

CrfModel train_ner(const std::vector<Query>& queries, const LshIndex& index,
                   const NerFeatureConfig& feature_cfg, const CrfTrainConfig& train_cfg) {
  auto examples = make_ner_examples(queries, index, feature_cfg);
  return train_crf(examples, feature_cfg.feature_dim, train_cfg);
}

std::vector<ParsedQuery> parse_all(const std::vector<Query>& queries, const LshIndex& index,
                                   const CrfModel& model, const NerFeatureConfig& cfg) {
  std::vector<ParsedQuery> parses;
  parses.reserve(queries.size());
  for (const auto& q : queries) parses.push_back(parse_query(q, index, model, cfg));
  return parses;
}

LabelSpace label_space_from(const std::vector<Query>& queries) {
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& q : queries) {
    for (const auto& l : q.intent_labels) seen[q.marketplace].insert(l);
  }
  std::map<std::string, std::vector<std::string>> per_marketplace;
  for (const auto& [m, labels] : seen) {
    per_marketplace[m] = std::vector<std::string>(labels.begin(), labels.end());
  }
  return LabelSpace(per_marketplace);
}

std::vector<IntentExample> make_intent_examples(const std::vector<Query>& queries,
                                                const LabelSpace& space) {
  std::vector<IntentExample> out;
  for (const auto& q : queries) {
    if (q.intent_labels.empty()) continue;
    IntentExample ex;
    ex.text = q.text;
    ex.marketplace = q.marketplace;
    for (const auto& l : q.intent_labels) {
      ex.labels.nonzero.emplace_back(space.global_index(q.marketplace, l), 1.0);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<QuestionClassifier::Example> make_question_examples(
    const std::vector<Session>& sessions) {
  std::vector<QuestionClassifier::Example> out;
  for (const auto& s : sessions) {
    for (const auto& t : s.turns) {
      if (t.kind == TurnKind::Question && t.intent) {
        out.push_back({t.utterance, question_intent_from_code(*t.intent)});
      }
    }
  }
  return out;
}

std::map<std::string, QueryStats> compute_query_stats(const std::vector<Query>& queries,
                                                      const std::vector<JudgedPair>& judgments) {
  std::map<std::string, std::pair<int64_t, int64_t>> engagement;  // clicks, purchases
  for (const auto& j : judgments) {
    auto& e = engagement[j.query_id];
    e.first += j.clicks;
    e.second += j.purchases;
  }
  std::map<std::string, QueryStats> out;
  for (const auto& q : queries) {
    QueryStats stats;
    stats.frequency = q.frequency;
    auto it = engagement.find(q.id);
    if (it != engagement.end()) {
      double exposure = static_cast<double>(std::max<int64_t>(q.frequency, 1));
      stats.click_rate = std::min(1.0, static_cast<double>(it->second.first) / exposure);
      stats.purchase_rate =
          std::min(stats.click_rate, static_cast<double>(it->second.second) / exposure);
    }
    out[q.id] = stats;
  }
  return out;
}

std::map<std::string, double> compute_product_click_rates(
    const std::vector<Query>& queries, const std::vector<Product>& products,
    const std::vector<JudgedPair>& judgments) {
  std::map<std::string, int64_t> freq_by_query;
  for (const auto& q : queries) freq_by_query[q.id] = std::min<int64_t>(q.frequency, 300);
  std::map<std::string, std::pair<int64_t, int64_t>> tally;  // clicks, exposure
  for (const auto& j : judgments) {
    auto& t = tally[j.product_id];
    t.first += j.clicks;
    auto it = freq_by_query.find(j.query_id);
    t.second += it != freq_by_query.end() ? std::max<int64_t>(it->second, 1) : 1;
  }
  std::map<std::string, double> out;
  for (const auto& p : products) {
    auto it = tally.find(p.id);
    out[p.id] = it != tally.end() && it->second.second > 0
                    ? static_cast<double>(it->second.first) /
                          static_cast<double>(it->second.second)
                    : 0.0;
  }
  return out;
}

SegmenterInputs segmenter_inputs(const Dataset& dataset, const std::vector<ParsedQuery>& parses,
                                 const std::vector<std::string>& query_ids) {
  std::map<std::string, const ParsedQuery*> parse_by_id;
  for (const auto& p : parses) parse_by_id[p.query.id] = &p;
  std::map<std::string, const Product*> product_by_id;
  for (const auto& p : dataset.products) product_by_id[p.id] = &p;
  std::map<std::string, std::vector<const JudgedPair*>> judgments_by_query;
  for (const auto& j : dataset.judgments) judgments_by_query[j.query_id].push_back(&j);

  SegmenterInputs out;
  for (const auto& qid : query_ids) {
    auto pit = parse_by_id.find(qid);
    auto jit = judgments_by_query.find(qid);
    if (pit == parse_by_id.end() || jit == judgments_by_query.end() || jit->second.empty())
      continue;
    const ParsedQuery& parse = *pit->second;
    double price_sum = 0.0;
    int pt_matches = 0;
    int count = 0;
    for (const JudgedPair* j : jit->second) {
      auto prit = product_by_id.find(j->product_id);
      if (prit == product_by_id.end()) continue;
      price_sum += prit->second->price;
      auto m = match_attributes(parse, *prit->second);
      if (m[2].match) ++pt_matches;
      ++count;
    }
    if (count == 0) continue;
    out.frequencies.push_back(static_cast<double>(parse.query.frequency));
    out.prices.push_back(price_sum / count);
    out.pt_ratios.push_back(static_cast<double>(pt_matches) / count);
  }
  return out;
}

std::vector<QueryGroup> build_groups(const Dataset& dataset,
                                     const std::vector<ParsedQuery>& parses,
                                     bool use_qu_features,
                                     const std::optional<SegmenterConfig>& segmenter) {
  std::map<std::string, const ParsedQuery*> parse_by_id;
  for (const auto& p : parses) parse_by_id[p.query.id] = &p;
  std::map<std::string, const Product*> product_by_id;
  for (const auto& p : dataset.products) product_by_id[p.id] = &p;
  std::map<std::string, std::vector<const JudgedPair*>> judgments_by_query;
  for (const auto& j : dataset.judgments) judgments_by_query[j.query_id].push_back(&j);

  auto stats = compute_query_stats(dataset.queries, dataset.judgments);
  auto product_rates = compute_product_click_rates(dataset.queries, dataset.products,
                                                   dataset.judgments);

  std::vector<QueryGroup> groups;
  for (const auto& q : dataset.queries) {
    auto jit = judgments_by_query.find(q.id);
    auto pit = parse_by_id.find(q.id);
    if (jit == judgments_by_query.end() || pit == parse_by_id.end()) continue;
    const ParsedQuery& parse = *pit->second;
    const QueryStats& qstats = stats.at(q.id);

    QueryGroup group;
    group.query_id = q.id;
    std::vector<TopProduct> top;
    double price_sum = 0.0;
    for (const JudgedPair* j : jit->second) {
      auto prit = product_by_id.find(j->product_id);
      if (prit == product_by_id.end()) continue;
      const Product& product = *prit->second;
      QuFeatureVector fv =
          build_feature_vector(parse, product, qstats, product_rates.at(product.id));
      Candidate cand;
      cand.product_id = product.id;
      cand.features = fv.to_array();
      if (!use_qu_features) cand.features = drop_qu_features(cand.features);
      bool brand_match = fv.brand.match;
      cand.gains = task_gains(*j, product.price, brand_match);
      cand.esci = j->esci;
      group.candidates.push_back(std::move(cand));
      top.push_back({&product, j->clicks > 0});
      price_sum += product.price;
    }
    if (group.candidates.empty()) continue;
    if (segmenter) {
      group.segments = assign_segments(parse, qstats, top,
                                       price_sum / static_cast<double>(top.size()), *segmenter);
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

RankTrainingRun train_ranker(const std::vector<QueryGroup>& train_groups,
                             const std::vector<QueryGroup>& support_groups,
                             const PipelineConfig& cfg) {
  if (train_groups.empty()) throw EmptyDataset();

  RankTrainingRun run;
  run.model = make_rank_model(kQuFeatureDim, cfg.hidden, cfg.rank_seed);
  fit_standardization(run.model, train_groups);

  for (TaskId t : all_tasks()) {
    double w = cfg.static_task_weights[static_cast<size_t>(t)];
    if (w != 1.0) {
      for (SegmentId s : all_segments()) {
        if (!is_na_cell(t, s)) run.weights.set(t, s, w);
      }
    }
  }

  SchedulerConfig sched_cfg = cfg.dynamic_scheduler ? cfg.scheduler : SchedulerConfig{0.0, 1, true};
  Scheduler scheduler(sched_cfg);

  const int n = static_cast<int>(train_groups.size());
  int cursor = 0;
  for (int step = 1; step <= cfg.rank_steps; ++step) {
    std::vector<QueryGroup> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(train_groups[static_cast<size_t>(cursor)]);
      cursor = (cursor + 1) % n;
    }
    TrainStepResult result = train_step(run.model, batch, run.weights, cfg.rank_learning_rate);
    for (double loss : result.task_losses) {
      if (!std::isfinite(loss)) throw TrainingDiverged();
    }
    if (scheduler.enabled() && !support_groups.empty()) {
      bool updated = scheduler.tick(
          step, [&]() { return compute_support_losses(run.model, support_groups); },
          run.weights);
      if (updated) ++run.scheduler_updates;
    }
  }
  run.weight_log_csv = scheduler.log_csv();
  return run;
}

TrainedPipeline run_training(const Dataset& dataset, const PipelineConfig& cfg) {
  TrainedPipeline out;
  out.index.emplace(knowledge_entries(dataset.gazetteer), cfg.lsh);

  std::vector<Query> ner_corpus = dataset.queries;
  for (auto& q : annotated_turns(dataset.sessions)) ner_corpus.push_back(std::move(q));
  out.ner = train_ner(ner_corpus, *out.index, cfg.ner_features, cfg.ner_train);
  std::vector<ParsedQuery> parses =
      parse_all(dataset.queries, *out.index, out.ner, cfg.ner_features);

  LabelSpace space = label_space_from(dataset.queries);
  out.intent = train_intent(make_intent_examples(dataset.queries, space), space,
                            cfg.intent_train);

  auto question_examples = make_question_examples(dataset.sessions);
  if (!question_examples.empty()) {
    out.question_classifier = QuestionClassifier::train(question_examples, cfg.csu_train);
  }

  SplitResult split = split_support(dataset.queries, cfg.support_fraction, cfg.split_seed);
  std::vector<std::string> train_ids;
  for (const auto& q : split.train) train_ids.push_back(q.id);
  SegmenterInputs inputs = segmenter_inputs(dataset, parses, train_ids);
  out.segmenter = fit_segmenter(inputs.frequencies, inputs.prices, inputs.pt_ratios);

  std::vector<QueryGroup> all_groups =
      build_groups(dataset, parses, cfg.use_qu_features, out.segmenter);
  std::set<std::string> support_ids;
  for (const auto& q : split.support) support_ids.insert(q.id);
  std::vector<QueryGroup> train_groups, support_groups;
  for (const auto& g : all_groups) {
    if (support_ids.count(g.query_id)) {
      support_groups.push_back(g);
    } else {
      train_groups.push_back(g);
    }
  }

  out.ranking = train_ranker(train_groups, support_groups, cfg);
  out.groups = std::move(all_groups);
  out.metrics = evaluate(out.ranking.model, out.groups, cfg.eval_k);
  return out;
}

std::vector<CsuSignalRow> csu_signals(const std::vector<Session>& sessions,
                                      const QuestionClassifier& classifier,
                                      const LshIndex& index, const CrfModel& ner,
                                      const NerFeatureConfig& ner_cfg, double theta) {
  std::vector<CsuSignalRow> rows;
  for (const auto& session : sessions) {
    std::vector<std::string> history;
    std::optional<ParsedQuery> previous_parse;
    for (size_t ti = 0; ti < session.turns.size(); ++ti) {
      const SessionTurn& turn = session.turns[ti];
      CsuSignalRow row;
      row.session_id = session.id;
      row.turn = static_cast<int>(ti);
      row.is_question = turn.kind == TurnKind::Question;
      row.utterance = turn.utterance;

      QuestionIntent intent = turn.kind == TurnKind::Keyword
                                  ? QuestionIntent::P
                                  : classifier.classify(turn.utterance);
      bool context_switch = detect_context_switch(history, turn.utterance, theta);

      Query pseudo;
      pseudo.id = session.id + "#" + std::to_string(ti);
      pseudo.text = fold_text(turn.utterance);
      ParsedQuery parsed = parse_query(pseudo, index, ner, ner_cfg);

      if (intent == QuestionIntent::P) {
        std::vector<std::string> keywords;
        try {
          keywords = rewrite_q2k(turn.utterance, parsed, previous_parse);
        } catch (const NoKeywordsExtractable&) {
          keywords = {};
        }
        row.output = make_csu_output(intent, context_switch, std::move(keywords));
        previous_parse = parsed;
      } else {
        row.output = make_csu_output(intent, context_switch, {});
      }
      history.push_back(turn.utterance);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string csu_signals_jsonl(const std::vector<CsuSignalRow>& rows) {
  std::string out;
  for (const auto& row : rows) {
    json j{{"context_switch", row.output.context_switch},
           {"intent", std::string(question_intent_code(row.output.intent))},
           {"session_id", row.session_id},
           {"turn", row.turn},
           {"utterance", row.utterance}};
    if (row.output.keywords) j["keywords"] = *row.output.keywords;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace qu
