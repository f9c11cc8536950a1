#include "qu/ranker.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "qu/csu.hpp"

namespace qu {

using nlohmann::json;

std::array<double, kNumTasks> task_gains(const JudgedPair& judgment, double price,
                                         bool brand_match) {
  std::array<double, kNumTasks> gains{};
  gains[static_cast<size_t>(TaskId::Purchase)] =
      static_cast<double>(judgment.purchases) + kClickGainBlend * static_cast<double>(judgment.clicks);
  gains[static_cast<size_t>(TaskId::Revenue)] =
      static_cast<double>(judgment.purchases) * price;
  gains[static_cast<size_t>(TaskId::Relevance)] = esci_gain(judgment.esci);
  gains[static_cast<size_t>(TaskId::Brand)] =
      (judgment.clicks > 0 && brand_match) ? 1.0 : 0.0;
  return gains;
}

RankModel make_rank_model(int input_dim, int hidden, uint64_t seed) {
  RankModel m;
  m.input_dim = input_dim;
  m.hidden = hidden;
  Rng rng(seed);
  m.w1.resize(static_cast<size_t>(input_dim) * static_cast<size_t>(hidden));
  for (double& w : m.w1) w = rng.uniform(-0.1, 0.1);
  m.b1.assign(static_cast<size_t>(hidden), 0.0);
  for (auto& head : m.w2) {
    head.resize(static_cast<size_t>(hidden));
    for (double& w : head) w = rng.uniform(-0.1, 0.1);
  }
  m.b2.fill(0.0);
  m.feature_mean.assign(static_cast<size_t>(input_dim), 0.0);
  m.feature_scale.assign(static_cast<size_t>(input_dim), 1.0);
  return m;
}

void fit_standardization(RankModel& model, const std::vector<QueryGroup>& groups) {
  const int d = model.input_dim;
  std::vector<double> sum(static_cast<size_t>(d), 0.0);
  std::vector<double> sum_sq(static_cast<size_t>(d), 0.0);
  int64_t n = 0;
  for (const auto& g : groups) {
    for (const auto& c : g.candidates) {
      for (int i = 0; i < d; ++i) {
        sum[static_cast<size_t>(i)] += c.features[static_cast<size_t>(i)];
        sum_sq[static_cast<size_t>(i)] +=
            c.features[static_cast<size_t>(i)] * c.features[static_cast<size_t>(i)];
      }
      ++n;
    }
  }
  if (n == 0) throw EmptyDataset();
  for (int i = 0; i < d; ++i) {
    double mean = sum[static_cast<size_t>(i)] / static_cast<double>(n);
    double var = sum_sq[static_cast<size_t>(i)] / static_cast<double>(n) - mean * mean;
    model.feature_mean[static_cast<size_t>(i)] = mean;
    model.feature_scale[static_cast<size_t>(i)] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
}

namespace {

void hidden_activations(const RankModel& model, const std::array<double, kQuFeatureDim>& x,
                        std::vector<double>& h) {
  const int d = model.input_dim;
  const int hid = model.hidden;
  h.assign(static_cast<size_t>(hid), 0.0);
  for (int j = 0; j < hid; ++j) h[static_cast<size_t>(j)] = model.b1[static_cast<size_t>(j)];
  for (int i = 0; i < d; ++i) {
    double xs = (x[static_cast<size_t>(i)] - model.feature_mean[static_cast<size_t>(i)]) /
                model.feature_scale[static_cast<size_t>(i)];
    if (xs == 0.0) continue;
    const double* row = model.w1.data() + static_cast<size_t>(i) * static_cast<size_t>(hid);
    for (int j = 0; j < hid; ++j) h[static_cast<size_t>(j)] += xs * row[j];
  }
  for (double& v : h) v = std::tanh(v);
}

double head_score(const RankModel& model, TaskId task, const std::vector<double>& h) {
  const auto& w2 = model.w2[static_cast<size_t>(task)];
  double s = model.b2[static_cast<size_t>(task)];
  for (size_t j = 0; j < w2.size(); ++j) s += w2[j] * h[j];
  return s;
}

double softplus(double z) {
  if (z > 35.0) return z;
  if (z < -35.0) return 0.0;
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double score(const RankModel& model, TaskId task, const std::array<double, kQuFeatureDim>& x) {
  if (model.input_dim != kQuFeatureDim) throw DimensionMismatch("rank model input dim");
  std::vector<double> h;
  hidden_activations(model, x, h);
  return head_score(model, task, h);
}

RankedList rank_topk(const RankModel& model, const QueryGroup& group, int k) {
  if (group.candidates.empty()) throw NoCandidates();
  RankedList out;
  out.query_id = group.query_id;
  out.k = k;
  out.items.reserve(group.candidates.size());
  for (const auto& c : group.candidates) {
    out.items.emplace_back(c.product_id, score(model, TaskId::Purchase, c.features));
  }
  std::sort(out.items.begin(), out.items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(out.items.size()) > k) out.items.resize(static_cast<size_t>(k));
  return out;
}

namespace {

// Pairwise logistic loss over discordant pairs; fills per-candidate dL/ds.
// Returns nullopt when no pair is comparable.
std::optional<double> pairwise_loss(const std::vector<double>& scores,
                                    const std::vector<double>& gains,
                                    std::vector<double>* dscore) {
  const int n = static_cast<int>(scores.size());
  int pairs = 0;
  double loss = 0.0;
  if (dscore) dscore->assign(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!(gains[static_cast<size_t>(i)] > gains[static_cast<size_t>(j)])) continue;
      ++pairs;
      double margin = scores[static_cast<size_t>(i)] - scores[static_cast<size_t>(j)];
      loss += softplus(-margin);
      if (dscore) {
        double g = -sigmoid(-margin);
        (*dscore)[static_cast<size_t>(i)] += g;
        (*dscore)[static_cast<size_t>(j)] -= g;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  double inv = 1.0 / static_cast<double>(pairs);
  if (dscore) {
    for (double& v : *dscore) v *= inv;
  }
  return loss * inv;
}

}  // namespace

double task_loss(const RankModel& model, TaskId task, const QueryGroup& group) {
  if (group.candidates.empty()) throw NoCandidates();
  std::vector<double> scores, gains;
  scores.reserve(group.candidates.size());
  gains.reserve(group.candidates.size());
  for (const auto& c : group.candidates) {
    scores.push_back(score(model, task, c.features));
    gains.push_back(c.gains[static_cast<size_t>(task)]);
  }
  auto loss = pairwise_loss(scores, gains, nullptr);
  if (!loss) throw NoComparablePairs();
  return *loss;
}

double task_loss_grad(const RankModel& model, TaskId task, const QueryGroup& group,
                      double weight, RankGradient& grad) {
  if (group.candidates.empty()) throw NoCandidates();
  const int n = static_cast<int>(group.candidates.size());
  const int hid = model.hidden;
  const int d = model.input_dim;

  std::vector<std::vector<double>> hs(static_cast<size_t>(n));
  std::vector<double> scores(static_cast<size_t>(n));
  std::vector<double> gains(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    hidden_activations(model, group.candidates[static_cast<size_t>(i)].features,
                       hs[static_cast<size_t>(i)]);
    scores[static_cast<size_t>(i)] = head_score(model, task, hs[static_cast<size_t>(i)]);
    gains[static_cast<size_t>(i)] =
        group.candidates[static_cast<size_t>(i)].gains[static_cast<size_t>(task)];
  }
  std::vector<double> dscore;
  auto loss = pairwise_loss(scores, gains, &dscore);
  if (!loss) throw NoComparablePairs();
  if (weight == 0.0) return 0.0;

  auto& gw2 = grad.w2[static_cast<size_t>(task)];
  const auto& w2 = model.w2[static_cast<size_t>(task)];
  for (int i = 0; i < n; ++i) {
    double g = weight * dscore[static_cast<size_t>(i)];
    if (g == 0.0) continue;
    const auto& h = hs[static_cast<size_t>(i)];
    for (int j = 0; j < hid; ++j) gw2[static_cast<size_t>(j)] += g * h[static_cast<size_t>(j)];
    grad.b2[static_cast<size_t>(task)] += g;
    const auto& x = group.candidates[static_cast<size_t>(i)].features;
    for (int j = 0; j < hid; ++j) {
      double dpre = g * w2[static_cast<size_t>(j)] *
                    (1.0 - h[static_cast<size_t>(j)] * h[static_cast<size_t>(j)]);
      if (dpre == 0.0) continue;
      grad.b1[static_cast<size_t>(j)] += dpre;
      for (int f = 0; f < d; ++f) {
        double xs = (x[static_cast<size_t>(f)] - model.feature_mean[static_cast<size_t>(f)]) /
                    model.feature_scale[static_cast<size_t>(f)];
        grad.w1[static_cast<size_t>(f) * static_cast<size_t>(hid) + static_cast<size_t>(j)] +=
            dpre * xs;
      }
    }
  }
  return weight * *loss;
}

TrainStepResult train_step(RankModel& model, const std::vector<QueryGroup>& batch,
                           const WeightTable& weights, double learning_rate) {
  if (batch.empty()) throw EmptyDataset();
  RankGradient grad;
  grad.w1.assign(model.w1.size(), 0.0);
  grad.b1.assign(model.b1.size(), 0.0);
  for (auto& head : grad.w2) head.assign(static_cast<size_t>(model.hidden), 0.0);
  grad.b2.fill(0.0);

  TrainStepResult result;
  for (TaskId task : all_tasks()) {
    for (const auto& group : batch) {
      double w = weights.effective(task, group.segments);
      try {
        double loss = task_loss_grad(model, task, group, w, grad);
        result.task_losses[static_cast<size_t>(task)] += loss;
        result.groups_used[static_cast<size_t>(task)] += 1;
      } catch (const NoComparablePairs&) {
        // skip group for this task
      }
    }
  }

  for (size_t i = 0; i < model.w1.size(); ++i) model.w1[i] -= learning_rate * grad.w1[i];
  for (size_t i = 0; i < model.b1.size(); ++i) model.b1[i] -= learning_rate * grad.b1[i];
  for (TaskId t : all_tasks()) {
    auto& head = model.w2[static_cast<size_t>(t)];
    const auto& ghead = grad.w2[static_cast<size_t>(t)];
    for (size_t j = 0; j < head.size(); ++j) head[j] -= learning_rate * ghead[j];
    model.b2[static_cast<size_t>(t)] -= learning_rate * grad.b2[static_cast<size_t>(t)];
  }
  return result;
}

double ndcg_at_k(const std::vector<double>& ranked_gains, const std::vector<double>& ideal_gains,
                 int k) {
  if (k < 1) throw Error("ndcg_at_k: k must be >= 1");
  if (!std::is_sorted(ideal_gains.begin(), ideal_gains.end(), std::greater<double>()))
    throw Error("ndcg_at_k: ideal gains must be sorted descending");
  auto dcg = [&](const std::vector<double>& gains) {
    double s = 0.0;
    int top = std::min<int>(k, static_cast<int>(gains.size()));
    for (int i = 0; i < top; ++i) {
      s += gains[static_cast<size_t>(i)] / std::log2(static_cast<double>(i) + 2.0);
    }
    return s;
  };
  double idcg = dcg(ideal_gains);
  if (idcg == 0.0) throw ZeroIdealGain();
  return dcg(ranked_gains) / idcg;
}

MetricsReport evaluate_with(const ScoreFn& scorer, const GroupLossFn& loss_fn,
                            const std::vector<QueryGroup>& groups, int k) {
  if (groups.empty()) throw EmptyDataset();
  MetricsReport report;
  report.k = k;
  report.queries = static_cast<int>(groups.size());
  double irr_sum = 0.0;
  for (const auto& group : groups) {
    // purchase-head ranking drives every reported metric
    std::vector<size_t> order(group.candidates.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> s(group.candidates.size());
    for (size_t i = 0; i < s.size(); ++i) s[i] = scorer(group, group.candidates[i]);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (s[a] != s[b]) return s[a] > s[b];
      return group.candidates[a].product_id < group.candidates[b].product_id;
    });

    std::vector<Esci> ranked_esci;
    ranked_esci.reserve(order.size());
    for (size_t idx : order) ranked_esci.push_back(group.candidates[idx].esci);
    irr_sum += irr_at_k(ranked_esci, k);

    for (TaskId task : all_tasks()) {
      size_t ti = static_cast<size_t>(task);
      std::vector<double> ranked, ideal;
      ranked.reserve(order.size());
      for (size_t idx : order) ranked.push_back(group.candidates[idx].gains[ti]);
      ideal = ranked;
      std::sort(ideal.begin(), ideal.end(), std::greater<double>());
      try {
        report.ndcg[ti] += ndcg_at_k(ranked, ideal, k);
        report.ndcg_queries[ti] += 1;
      } catch (const ZeroIdealGain&) {
        // excluded from aggregation
      }
      if (loss_fn) {
        auto loss = loss_fn(task, group);
        if (loss) {
          report.mean_task_loss[ti] += *loss;
          report.loss_queries[ti] += 1;
        }
      }
    }
  }
  report.irr = irr_sum / static_cast<double>(groups.size());
  for (TaskId task : all_tasks()) {
    size_t ti = static_cast<size_t>(task);
    if (report.ndcg_queries[ti] > 0) report.ndcg[ti] /= report.ndcg_queries[ti];
    if (report.loss_queries[ti] > 0) report.mean_task_loss[ti] /= report.loss_queries[ti];
  }
  return report;
}

MetricsReport evaluate(const RankModel& model, const std::vector<QueryGroup>& groups, int k) {
  ScoreFn scorer = [&model](const QueryGroup&, const Candidate& c) {
    return score(model, TaskId::Purchase, c.features);
  };
  GroupLossFn loss_fn = [&model](TaskId task, const QueryGroup& group) -> std::optional<double> {
    try {
      return task_loss(model, task, group);
    } catch (const NoComparablePairs&) {
      return std::nullopt;
    }
  };
  return evaluate_with(scorer, loss_fn, groups, k);
}

LossSnapshot compute_support_losses(const RankModel& model,
                                    const std::vector<QueryGroup>& support) {
  if (support.empty()) throw EmptyDataset();
  LossSnapshot snap;
  std::array<std::array<double, kNumSegments>, kNumTasks> seg_sum{};
  std::array<double, kNumTasks> pooled_sum{};
  for (const auto& group : support) {
    for (TaskId task : all_tasks()) {
      size_t ti = static_cast<size_t>(task);
      double loss;
      try {
        loss = task_loss(model, task, group);
      } catch (const NoComparablePairs&) {
        continue;
      }
      pooled_sum[ti] += loss;
      snap.pooled_count[ti] += 1;
      for (SegmentId s : group.segments) {
        seg_sum[ti][static_cast<size_t>(s)] += loss;
        snap.seg_count[ti][static_cast<size_t>(s)] += 1;
      }
    }
  }
  for (TaskId task : all_tasks()) {
    size_t ti = static_cast<size_t>(task);
    snap.pooled[ti] = snap.pooled_count[ti] > 0
                          ? pooled_sum[ti] / static_cast<double>(snap.pooled_count[ti])
                          : 0.0;
    for (int s = 0; s < kNumSegments; ++s) {
      if (snap.seg_count[ti][static_cast<size_t>(s)] > 0) {
        snap.seg_loss[ti][static_cast<size_t>(s)] =
            seg_sum[ti][static_cast<size_t>(s)] /
            static_cast<double>(snap.seg_count[ti][static_cast<size_t>(s)]);
      }
    }
  }
  return snap;
}

std::string MetricsReport::to_json() const {
  json ndcg_obj = json::object();
  json ndcg_q = json::object();
  json loss_obj = json::object();
  for (TaskId t : all_tasks()) {
    size_t ti = static_cast<size_t>(t);
    std::string name(task_name(t));
    ndcg_obj[name] = ndcg[ti];
    ndcg_q[name] = ndcg_queries[ti];
    loss_obj[name] = mean_task_loss[ti];
  }
  json j{{"irr", irr},         {"k", k},
         {"ndcg", ndcg_obj},   {"ndcg_queries", ndcg_q},
         {"queries", queries}, {"task_loss", loss_obj}};
  return j.dump(2) + "\n";
}

std::string RankModel::to_json() const {
  json heads = json::array();
  for (const auto& head : w2) heads.push_back(head);
  json j{{"format", "qu.ranker"},
         {"version", 1},
         {"input_dim", input_dim},
         {"hidden", hidden},
         {"w1", w1},
         {"b1", b1},
         {"w2", heads},
         {"b2", b2},
         {"feature_mean", feature_mean},
         {"feature_scale", feature_scale}};
  return j.dump();
}

RankModel RankModel::from_json(const std::string& blob) {
  json j = json::parse(blob);
  if (j.at("format").get<std::string>() != "qu.ranker" || j.at("version").get<int>() != 1)
    throw Error("unsupported ranker blob");
  RankModel m;
  m.input_dim = j.at("input_dim").get<int>();
  m.hidden = j.at("hidden").get<int>();
  m.w1 = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  auto heads = j.at("w2");
  if (heads.size() != static_cast<size_t>(kNumTasks)) throw DimensionMismatch("ranker heads");
  for (size_t t = 0; t < static_cast<size_t>(kNumTasks); ++t)
    m.w2[t] = heads[t].get<std::vector<double>>();
  auto b2 = j.at("b2").get<std::vector<double>>();
  if (b2.size() != static_cast<size_t>(kNumTasks)) throw DimensionMismatch("ranker head biases");
  std::copy(b2.begin(), b2.end(), m.b2.begin());
  m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
  return m;
}

}  // namespace qu
