#include "qu/ner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace qu {

using nlohmann::json;

namespace {

constexpr uint64_t kFeatureSeed = 0x4e45524641545552ULL;

double log_sum_exp(const double* vals, int n) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, vals[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(vals[i] - m);
  return m + std::log(s);
}

}  // namespace

LabelSchema::LabelSchema() {
  names_.push_back("O");
  for (int t = 0; t < kNumEntityTypes; ++t) {
    std::string suffix(entity_type_name(static_cast<EntityType>(t)));
    names_.push_back("B-" + suffix);
    names_.push_back("I-" + suffix);
  }
}

EntityType LabelSchema::entity_of(int label) const {
  if (label <= 0 || label >= num_labels()) throw Error("entity_of: O or out-of-range label");
  return static_cast<EntityType>((label - 1) / 2);
}

RetrievalEvidence compute_evidence(const std::vector<std::string>& tokens, const LshIndex& index,
                                   const NerFeatureConfig& cfg) {
  RetrievalEvidence ev;
  ev.per_token.assign(tokens.size(), {});
  const int n = static_cast<int>(tokens.size());
  auto probe_window = [&](int start, int end) {
    std::string probe = join_tokens(
        std::span<const std::string>(tokens.data() + start, static_cast<size_t>(end - start)));
    auto hits = index.retrieve(probe, cfg.retrieve_k);
    std::array<double, kNumEntityTypes> best{};
    for (const auto& h : hits) {
      auto& slot = best[static_cast<size_t>(h.entry.entity_type)];
      slot = std::max(slot, h.score);
    }
    for (int t = 0; t < kNumEntityTypes; ++t) {
      if (best[static_cast<size_t>(t)] >= cfg.evidence_tau) {
        for (int i = start; i < end; ++i) {
          ev.per_token[static_cast<size_t>(i)][static_cast<size_t>(t)] = true;
        }
      }
    }
  };
  for (int len = 1; len <= std::min(cfg.max_probe_window, n); ++len) {
    for (int start = 0; start + len <= n; ++start) probe_window(start, start + len);
  }
  if (n > cfg.max_probe_window) probe_window(0, n);
  return ev;
}

FeatureSequence featurize_tokens(const std::vector<std::string>& tokens,
                                 const RetrievalEvidence& evidence,
                                 const NerFeatureConfig& cfg) {
  if (tokens.empty()) throw Error("featurize_tokens: no tokens");
  if (!evidence.per_token.empty() && evidence.per_token.size() != tokens.size())
    throw DimensionMismatch("evidence length vs tokens");

  FeatureSequence seq;
  seq.dim = cfg.feature_dim;
  seq.token_features.resize(tokens.size());
  const int n = static_cast<int>(tokens.size());
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> feats;
    const std::string& tok = tokens[static_cast<size_t>(i)];
    feats.push_back("w=" + tok);
    for (int k = 1; k <= 3; ++k) {
      if (static_cast<int>(tok.size()) > k) {
        feats.push_back("p" + std::to_string(k) + "=" + tok.substr(0, static_cast<size_t>(k)));
        feats.push_back("s" + std::to_string(k) + "=" +
                        tok.substr(tok.size() - static_cast<size_t>(k)));
      }
    }
    if (!tok.empty() && std::all_of(tok.begin(), tok.end(),
                                    [](unsigned char c) { return c >= '0' && c <= '9'; })) {
      feats.push_back("isdigit");
    }
    if (i == 0) feats.push_back("first");
    if (i == n - 1) feats.push_back("last");
    feats.push_back("prev=" + (i > 0 ? tokens[static_cast<size_t>(i - 1)] : std::string("^")));
    feats.push_back("next=" + (i < n - 1 ? tokens[static_cast<size_t>(i + 1)] : std::string("$")));
    if (cfg.use_retrieval && !evidence.per_token.empty()) {
      for (int t = 0; t < kNumEntityTypes; ++t) {
        if (evidence.per_token[static_cast<size_t>(i)][static_cast<size_t>(t)]) {
          feats.push_back("gaz=" + std::string(entity_type_name(static_cast<EntityType>(t))));
        }
      }
    }
    auto& ids = seq.token_features[static_cast<size_t>(i)];
    ids.reserve(feats.size());
    for (const auto& f : feats) {
      ids.push_back(static_cast<int>(hash64(f, kFeatureSeed) %
                                     static_cast<uint64_t>(cfg.feature_dim)));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return seq;
}

CrfModel make_crf_model(int feature_dim) {
  CrfModel m;
  m.feature_dim = feature_dim;
  const int L = m.schema.num_labels();
  m.unary.assign(static_cast<size_t>(feature_dim) * static_cast<size_t>(L), 0.0);
  m.transition.assign(static_cast<size_t>(L) * static_cast<size_t>(L), 0.0);
  return m;
}

std::vector<double> unary_scores(const CrfModel& model, const FeatureSequence& feats) {
  if (feats.dim != model.feature_dim) throw DimensionMismatch("feature dim vs model");
  const int L = model.schema.num_labels();
  const int n = feats.length();
  std::vector<double> scores(static_cast<size_t>(n) * static_cast<size_t>(L), 0.0);
  for (int t = 0; t < n; ++t) {
    double* row = scores.data() + static_cast<size_t>(t) * static_cast<size_t>(L);
    for (int f : feats.token_features[static_cast<size_t>(t)]) {
      const double* w = model.unary.data() + static_cast<size_t>(f) * static_cast<size_t>(L);
      for (int y = 0; y < L; ++y) row[y] += w[y];
    }
  }
  return scores;
}

namespace {

// Forward pass in log space; returns alphas [n x L] and logZ.
double forward_alphas(const CrfModel& model, const std::vector<double>& unary, int n,
                      std::vector<double>& alpha) {
  const int L = model.schema.num_labels();
  alpha.assign(static_cast<size_t>(n) * static_cast<size_t>(L), 0.0);
  for (int y = 0; y < L; ++y) alpha[static_cast<size_t>(y)] = unary[static_cast<size_t>(y)];
  std::vector<double> tmp(static_cast<size_t>(L));
  for (int t = 1; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      for (int yp = 0; yp < L; ++yp) {
        tmp[static_cast<size_t>(yp)] =
            alpha[static_cast<size_t>(t - 1) * static_cast<size_t>(L) + static_cast<size_t>(yp)] +
            model.trans_weight(yp, y);
      }
      alpha[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y)] =
          unary[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y)] +
          log_sum_exp(tmp.data(), L);
    }
  }
  return log_sum_exp(alpha.data() + static_cast<size_t>(n - 1) * static_cast<size_t>(L), L);
}

void backward_betas(const CrfModel& model, const std::vector<double>& unary, int n,
                    std::vector<double>& beta) {
  const int L = model.schema.num_labels();
  beta.assign(static_cast<size_t>(n) * static_cast<size_t>(L), 0.0);
  std::vector<double> tmp(static_cast<size_t>(L));
  for (int t = n - 2; t >= 0; --t) {
    for (int yp = 0; yp < L; ++yp) {
      for (int y = 0; y < L; ++y) {
        tmp[static_cast<size_t>(y)] =
            model.trans_weight(yp, y) +
            unary[static_cast<size_t>(t + 1) * static_cast<size_t>(L) + static_cast<size_t>(y)] +
            beta[static_cast<size_t>(t + 1) * static_cast<size_t>(L) + static_cast<size_t>(y)];
      }
      beta[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(yp)] =
          log_sum_exp(tmp.data(), L);
    }
  }
}

}  // namespace

double log_partition(const CrfModel& model, const FeatureSequence& feats) {
  std::vector<double> unary = unary_scores(model, feats);
  std::vector<double> alpha;
  return forward_alphas(model, unary, feats.length(), alpha);
}

std::vector<int> viterbi_decode(const CrfModel& model, const FeatureSequence& feats) {
  const std::vector<double> unary = unary_scores(model, feats);
  const int L = model.schema.num_labels();
  const int n = feats.length();
  std::vector<double> best(static_cast<size_t>(n) * static_cast<size_t>(L));
  std::vector<int> back(static_cast<size_t>(n) * static_cast<size_t>(L), 0);
  for (int y = 0; y < L; ++y) best[static_cast<size_t>(y)] = unary[static_cast<size_t>(y)];
  for (int t = 1; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      double best_score = -std::numeric_limits<double>::infinity();
      int best_prev = 0;
      // strictly-greater keeps the lowest label index on ties
      for (int yp = 0; yp < L; ++yp) {
        double s = best[static_cast<size_t>(t - 1) * static_cast<size_t>(L) +
                        static_cast<size_t>(yp)] +
                   model.trans_weight(yp, y);
        if (s > best_score) {
          best_score = s;
          best_prev = yp;
        }
      }
      best[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y)] =
          best_score +
          unary[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y)];
      back[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y)] = best_prev;
    }
  }
  int last = 0;
  double last_score = -std::numeric_limits<double>::infinity();
  for (int y = 0; y < L; ++y) {
    double s = best[static_cast<size_t>(n - 1) * static_cast<size_t>(L) + static_cast<size_t>(y)];
    if (s > last_score) {
      last_score = s;
      last = y;
    }
  }
  std::vector<int> labels(static_cast<size_t>(n));
  labels[static_cast<size_t>(n - 1)] = last;
  for (int t = n - 1; t > 0; --t) {
    last = back[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(last)];
    labels[static_cast<size_t>(t - 1)] = last;
  }
  return labels;
}

std::vector<double> marginals(const CrfModel& model, const FeatureSequence& feats) {
  const std::vector<double> unary = unary_scores(model, feats);
  const int L = model.schema.num_labels();
  const int n = feats.length();
  std::vector<double> alpha, beta;
  double log_z = forward_alphas(model, unary, n, alpha);
  backward_betas(model, unary, n, beta);
  std::vector<double> mu(static_cast<size_t>(n) * static_cast<size_t>(L));
  for (int t = 0; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      size_t idx = static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y);
      mu[idx] = std::exp(alpha[idx] + beta[idx] - log_z);
    }
  }
  return mu;
}

CrfGradient nll_gradient(const CrfModel& model, const FeatureSequence& feats,
                         const std::vector<int>& gold) {
  const int n = feats.length();
  if (static_cast<int>(gold.size()) != n) throw DimensionMismatch("gold length vs sequence");
  const int L = model.schema.num_labels();
  for (int y : gold) {
    if (y < 0 || y >= L) throw DimensionMismatch("gold label out of range");
  }
  const std::vector<double> unary = unary_scores(model, feats);
  std::vector<double> alpha, beta;
  double log_z = forward_alphas(model, unary, n, alpha);
  backward_betas(model, unary, n, beta);

  CrfGradient grad;
  grad.unary.assign(model.unary.size(), 0.0);
  grad.transition.assign(model.transition.size(), 0.0);

  double gold_score = 0.0;
  for (int t = 0; t < n; ++t) {
    gold_score +=
        unary[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(gold[static_cast<size_t>(t)])];
    if (t > 0) gold_score += model.trans_weight(gold[static_cast<size_t>(t - 1)], gold[static_cast<size_t>(t)]);
  }
  grad.loss = log_z - gold_score;

  // unary expectations minus gold counts
  for (int t = 0; t < n; ++t) {
    for (int y = 0; y < L; ++y) {
      size_t idx = static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y);
      double diff = std::exp(alpha[idx] + beta[idx] - log_z) -
                    (gold[static_cast<size_t>(t)] == y ? 1.0 : 0.0);
      if (diff == 0.0) continue;
      for (int f : feats.token_features[static_cast<size_t>(t)]) {
        grad.unary[static_cast<size_t>(f) * static_cast<size_t>(L) + static_cast<size_t>(y)] +=
            diff;
      }
    }
  }
  // pairwise expectations minus gold transitions
  for (int t = 1; t < n; ++t) {
    for (int yp = 0; yp < L; ++yp) {
      for (int y = 0; y < L; ++y) {
        double lp = alpha[static_cast<size_t>(t - 1) * static_cast<size_t>(L) +
                          static_cast<size_t>(yp)] +
                    model.trans_weight(yp, y) +
                    unary[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y)] +
                    beta[static_cast<size_t>(t) * static_cast<size_t>(L) + static_cast<size_t>(y)] -
                    log_z;
        double diff = std::exp(lp) - (gold[static_cast<size_t>(t - 1)] == yp &&
                                              gold[static_cast<size_t>(t)] == y
                                          ? 1.0
                                          : 0.0);
        grad.transition[static_cast<size_t>(yp) * static_cast<size_t>(L) +
                        static_cast<size_t>(y)] += diff;
      }
    }
  }
  return grad;
}

namespace {

double regularized_total_loss(const CrfModel& model, const std::vector<CrfExample>& examples,
                              double l2) {
  double total = 0.0;
  for (const auto& ex : examples) {
    const std::vector<double> unary = unary_scores(model, ex.features);
    std::vector<double> alpha;
    double log_z = forward_alphas(model, unary, ex.features.length(), alpha);
    const int L = model.schema.num_labels();
    double gold_score = 0.0;
    for (int t = 0; t < ex.features.length(); ++t) {
      gold_score += unary[static_cast<size_t>(t) * static_cast<size_t>(L) +
                          static_cast<size_t>(ex.gold[static_cast<size_t>(t)])];
      if (t > 0)
        gold_score +=
            model.trans_weight(ex.gold[static_cast<size_t>(t - 1)], ex.gold[static_cast<size_t>(t)]);
    }
    total += log_z - gold_score;
  }
  double sq = 0.0;
  for (double w : model.unary) sq += w * w;
  for (double w : model.transition) sq += w * w;
  return total + 0.5 * l2 * sq;
}

}  // namespace

CrfModel train_crf(const std::vector<CrfExample>& examples, int feature_dim,
                   const CrfTrainConfig& hyper, std::vector<double>* loss_curve) {
  if (examples.empty()) throw EmptyTrainingSet();
  for (const auto& ex : examples) {
    if (ex.features.dim != feature_dim) throw DimensionMismatch("example dim vs feature_dim");
    if (ex.gold.size() != ex.features.token_features.size())
      throw DimensionMismatch("gold length vs features");
  }

  CrfModel model = make_crf_model(feature_dim);
  double step = hyper.learning_rate;
  double current = regularized_total_loss(model, examples, hyper.l2);
  if (loss_curve) loss_curve->push_back(current);

  std::vector<double> grad_u(model.unary.size());
  std::vector<double> grad_t(model.transition.size());
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::fill(grad_u.begin(), grad_u.end(), 0.0);
    std::fill(grad_t.begin(), grad_t.end(), 0.0);
    for (const auto& ex : examples) {
      CrfGradient g = nll_gradient(model, ex.features, ex.gold);
      for (size_t i = 0; i < grad_u.size(); ++i) grad_u[i] += g.unary[i];
      for (size_t i = 0; i < grad_t.size(); ++i) grad_t[i] += g.transition[i];
    }
    for (size_t i = 0; i < grad_u.size(); ++i) grad_u[i] += hyper.l2 * model.unary[i];
    for (size_t i = 0; i < grad_t.size(); ++i) grad_t[i] += hyper.l2 * model.transition[i];

    CrfModel trial = model;
    double trial_loss = 0.0;
    double local = step;
    for (int halving = 0; halving < 40; ++halving) {
      trial = model;
      for (size_t i = 0; i < trial.unary.size(); ++i) trial.unary[i] -= local * grad_u[i];
      for (size_t i = 0; i < trial.transition.size(); ++i)
        trial.transition[i] -= local * grad_t[i];
      trial_loss = regularized_total_loss(trial, examples, hyper.l2);
      if (trial_loss <= current) break;
      local *= 0.5;
    }
    if (trial_loss <= current) {
      model = std::move(trial);
      current = trial_loss;
      step = local * 1.25;
    }
    if (loss_curve) loss_curve->push_back(current);
  }
  return model;
}

std::vector<EntitySpan> spans_from_labels(const std::vector<std::string>& tokens,
                                          const std::vector<int>& labels,
                                          const LabelSchema& schema) {
  if (tokens.size() != labels.size()) throw DimensionMismatch("labels vs tokens");
  std::vector<EntitySpan> spans;
  const int n = static_cast<int>(tokens.size());
  int i = 0;
  while (i < n) {
    int label = labels[static_cast<size_t>(i)];
    if (label == schema.outside()) {
      ++i;
      continue;
    }
    // stray I-X starts a new span (promoted to B-X)
    EntityType type = schema.entity_of(label);
    int start = i;
    ++i;
    while (i < n && labels[static_cast<size_t>(i)] == schema.inside_label(type)) ++i;
    EntitySpan span;
    span.start = start;
    span.end = i;
    span.type = type;
    span.surface = join_tokens(
        std::span<const std::string>(tokens.data() + start, static_cast<size_t>(i - start)));
    spans.push_back(std::move(span));
  }
  return spans;
}

ParsedQuery parse_query(const Query& query, const LshIndex& index, const CrfModel& model,
                        const NerFeatureConfig& cfg) {
  ParsedQuery out;
  out.query = query;
  out.tokens = tokenize(query.text);
  if (out.tokens.empty()) return out;
  RetrievalEvidence ev;
  if (cfg.use_retrieval) ev = compute_evidence(out.tokens, index, cfg);
  FeatureSequence feats = featurize_tokens(out.tokens, ev, cfg);
  std::vector<int> labels = viterbi_decode(model, feats);
  out.spans = spans_from_labels(out.tokens, labels, model.schema);
  for (const auto& span : out.spans) {
    auto& slot = out.attributes[static_cast<size_t>(span.type)];
    if (!slot) slot = span.surface;
  }
  return out;
}

std::vector<int> gold_labels_for(const Query& query, const LabelSchema& schema) {
  std::vector<std::string> tokens = tokenize(query.text);
  std::vector<int> labels(tokens.size(), schema.outside());
  for (const auto& span : query.gold_spans) {
    if (span.start < 0 || span.end > static_cast<int>(tokens.size()) || span.start >= span.end)
      throw Error("gold span out of bounds for query " + query.id);
    labels[static_cast<size_t>(span.start)] = schema.begin_label(span.type);
    for (int i = span.start + 1; i < span.end; ++i) {
      labels[static_cast<size_t>(i)] = schema.inside_label(span.type);
    }
  }
  return labels;
}

double span_f1(const std::vector<std::vector<EntitySpan>>& gold,
               const std::vector<std::vector<EntitySpan>>& predicted) {
  if (gold.size() != predicted.size()) throw DimensionMismatch("gold vs predicted span lists");
  int64_t tp = 0, n_gold = 0, n_pred = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    n_gold += static_cast<int64_t>(gold[i].size());
    n_pred += static_cast<int64_t>(predicted[i].size());
    for (const auto& p : predicted[i]) {
      for (const auto& g : gold[i]) {
        if (p.start == g.start && p.end == g.end && p.type == g.type) {
          ++tp;
          break;
        }
      }
    }
  }
  if (n_gold == 0 || n_pred == 0) return 0.0;
  double precision = static_cast<double>(tp) / static_cast<double>(n_pred);
  double recall = static_cast<double>(tp) / static_cast<double>(n_gold);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::string crf_to_json(const CrfModel& model) {
  json j{{"format", "qu.crf"},
         {"version", 1},
         {"feature_dim", model.feature_dim},
         {"num_labels", model.schema.num_labels()},
         {"unary", model.unary},
         {"transition", model.transition}};
  return j.dump();
}

CrfModel crf_from_json(const std::string& blob) {
  json j = json::parse(blob);
  if (j.at("format").get<std::string>() != "qu.crf" || j.at("version").get<int>() != 1)
    throw Error("unsupported crf blob");
  CrfModel m = make_crf_model(j.at("feature_dim").get<int>());
  if (j.at("num_labels").get<int>() != m.schema.num_labels())
    throw DimensionMismatch("label schema in blob");
  m.unary = j.at("unary").get<std::vector<double>>();
  m.transition = j.at("transition").get<std::vector<double>>();
  if (m.unary.size() != static_cast<size_t>(m.feature_dim) *
                            static_cast<size_t>(m.schema.num_labels()))
    throw DimensionMismatch("unary weights size");
  return m;
}

}  // namespace qu
