#include "qu/csu.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace qu {

using nlohmann::json;

std::string_view question_intent_code(QuestionIntent q) {
  switch (q) {
    case QuestionIntent::P: return "P";
    case QuestionIntent::H: return "H";
    case QuestionIntent::G: return "G";
    case QuestionIntent::S: return "S";
  }
  throw Error("bad question intent");
}

QuestionIntent question_intent_from_code(std::string_view code) {
  if (code == "P") return QuestionIntent::P;
  if (code == "H") return QuestionIntent::H;
  if (code == "G") return QuestionIntent::G;
  if (code == "S") return QuestionIntent::S;
  throw Error("unknown question intent code: " + std::string(code));
}

CsuOutput make_csu_output(QuestionIntent intent, bool context_switch,
                          std::vector<std::string> keywords_if_product) {
  CsuOutput out;
  out.intent = intent;
  out.context_switch = context_switch;
  if (intent == QuestionIntent::P) {
    out.keywords = std::move(keywords_if_product);
  }
  return out;
}

namespace {

constexpr uint64_t kCsuFeatureSeed = 0x435355464541ULL;
constexpr int kNumIntents = 4;

}  // namespace

QuestionClassifier::QuestionClassifier(int feature_dim) : feature_dim_(feature_dim) {
  weights_.assign(static_cast<size_t>(feature_dim_) * kNumIntents, 0.0);
  bias_.assign(kNumIntents, 0.0);
}

std::vector<int> QuestionClassifier::featurize(const std::string& utterance) const {
  std::vector<std::string> tokens = tokenize(utterance);
  std::vector<int> ids;
  for (size_t i = 0; i < tokens.size(); ++i) {
    ids.push_back(static_cast<int>(hash64("w=" + tokens[i], kCsuFeatureSeed) %
                                   static_cast<uint64_t>(feature_dim_)));
    if (i + 1 < tokens.size()) {
      ids.push_back(static_cast<int>(hash64("b=" + tokens[i] + "_" + tokens[i + 1],
                                            kCsuFeatureSeed) %
                                     static_cast<uint64_t>(feature_dim_)));
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<double> QuestionClassifier::class_scores(const std::string& utterance) const {
  if (!trained_) throw UntrainedModel();
  std::vector<double> z(bias_);
  for (int f : featurize(utterance)) {
    const double* row = weights_.data() + static_cast<size_t>(f) * kNumIntents;
    for (int c = 0; c < kNumIntents; ++c) z[static_cast<size_t>(c)] += row[c];
  }
  return z;
}

QuestionIntent QuestionClassifier::classify(const std::string& utterance) const {
  std::vector<double> z = class_scores(utterance);
  int best = 0;
  for (int c = 1; c < kNumIntents; ++c) {
    if (z[static_cast<size_t>(c)] > z[static_cast<size_t>(best)]) best = c;
  }
  return static_cast<QuestionIntent>(best);
}

QuestionClassifier QuestionClassifier::train(const std::vector<Example>& examples,
                                             const TrainConfig& hyper,
                                             std::vector<double>* loss_curve) {
  if (examples.empty()) throw EmptyTrainingSet();
  QuestionClassifier model(hyper.feature_dim);

  std::vector<std::vector<int>> feats;
  feats.reserve(examples.size());
  for (const auto& ex : examples) feats.push_back(model.featurize(ex.utterance));

  auto softmax = [](std::vector<double>& z) {
    double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double& v : z) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : z) v /= s;
  };

  auto total_loss = [&](const std::vector<double>& weights, const std::vector<double>& bias) {
    double loss = 0.0;
    for (size_t i = 0; i < examples.size(); ++i) {
      std::vector<double> z(bias);
      for (int f : feats[i]) {
        const double* row = weights.data() + static_cast<size_t>(f) * kNumIntents;
        for (int c = 0; c < kNumIntents; ++c) z[static_cast<size_t>(c)] += row[c];
      }
      softmax(z);
      double p = z[static_cast<size_t>(static_cast<int>(examples[i].intent))];
      loss += -std::log(std::max(p, 1e-300));
    }
    double sq = 0.0;
    for (double w : weights) sq += w * w;
    return loss + 0.5 * hyper.l2 * sq;
  };

  double current = total_loss(model.weights_, model.bias_);
  if (loss_curve) loss_curve->push_back(current);
  double step = hyper.learning_rate;
  std::vector<double> grad_w(model.weights_.size());
  std::vector<double> grad_b(model.bias_.size());

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (size_t i = 0; i < examples.size(); ++i) {
      std::vector<double> z(model.bias_);
      for (int f : feats[i]) {
        const double* row = model.weights_.data() + static_cast<size_t>(f) * kNumIntents;
        for (int c = 0; c < kNumIntents; ++c) z[static_cast<size_t>(c)] += row[c];
      }
      softmax(z);
      z[static_cast<size_t>(static_cast<int>(examples[i].intent))] -= 1.0;
      for (int f : feats[i]) {
        double* row = grad_w.data() + static_cast<size_t>(f) * kNumIntents;
        for (int c = 0; c < kNumIntents; ++c) row[c] += z[static_cast<size_t>(c)];
      }
      for (int c = 0; c < kNumIntents; ++c) grad_b[static_cast<size_t>(c)] += z[static_cast<size_t>(c)];
    }
    for (size_t i = 0; i < grad_w.size(); ++i) grad_w[i] += hyper.l2 * model.weights_[i];

    double local = step;
    std::vector<double> w_trial, b_trial;
    double trial_loss = 0.0;
    for (int halving = 0; halving < 40; ++halving) {
      w_trial = model.weights_;
      b_trial = model.bias_;
      for (size_t i = 0; i < w_trial.size(); ++i) w_trial[i] -= local * grad_w[i];
      for (size_t i = 0; i < b_trial.size(); ++i) b_trial[i] -= local * grad_b[i];
      trial_loss = total_loss(w_trial, b_trial);
      if (trial_loss <= current) break;
      local *= 0.5;
    }
    if (trial_loss <= current) {
      model.weights_ = std::move(w_trial);
      model.bias_ = std::move(b_trial);
      current = trial_loss;
      step = local * 1.25;
    }
    if (loss_curve) loss_curve->push_back(current);
  }
  model.trained_ = true;
  return model;
}

std::string QuestionClassifier::to_json() const {
  json j{{"format", "qu.csu"}, {"version", 1}, {"feature_dim", feature_dim_},
         {"weights", weights_}, {"bias", bias_}, {"trained", trained_}};
  return j.dump();
}

QuestionClassifier QuestionClassifier::from_json(const std::string& blob) {
  json j = json::parse(blob);
  if (j.at("format").get<std::string>() != "qu.csu" || j.at("version").get<int>() != 1)
    throw Error("unsupported csu blob");
  QuestionClassifier model(j.at("feature_dim").get<int>());
  model.weights_ = j.at("weights").get<std::vector<double>>();
  model.bias_ = j.at("bias").get<std::vector<double>>();
  model.trained_ = j.at("trained").get<bool>();
  return model;
}

bool detect_context_switch(const std::vector<std::string>& history, const std::string& utterance,
                           double theta) {
  if (history.empty()) return true;
  std::vector<std::string> prev = content_tokens(tokenize(history.back()));
  std::vector<std::string> cur = content_tokens(tokenize(utterance));
  return token_jaccard(prev, cur) < theta;
}

std::vector<std::string> rewrite_q2k(const std::string& utterance, const ParsedQuery& parsed,
                                     const std::optional<ParsedQuery>& previous_parse) {
  std::vector<std::string> tokens = tokenize(utterance);

  std::array<bool, kNumEntityTypes> current_types{};
  for (const auto& span : parsed.spans) {
    current_types[static_cast<size_t>(span.type)] = true;
  }

  std::vector<std::string> keywords;
  auto push_unique = [&](const std::string& t) {
    if (std::find(keywords.begin(), keywords.end(), t) == keywords.end()) keywords.push_back(t);
  };

  // Anaphoric turns lack a product anchor of their own; only then inherit the
  // previous turn's spans for the missing entity types.
  bool anaphoric = !current_types[static_cast<size_t>(EntityType::ProductType)] &&
                   !current_types[static_cast<size_t>(EntityType::Title)];
  if (previous_parse && anaphoric) {
    for (const auto& span : previous_parse->spans) {
      if (current_types[static_cast<size_t>(span.type)]) continue;
      for (const auto& t : tokenize(span.surface)) push_unique(t);
    }
  }
  // then the current turn's content tokens in order; spans are made of
  // content words, so stopwords never leak through a mis-tagged span
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!is_stopword(tokens[i])) push_unique(tokens[i]);
  }

  if (keywords.empty()) throw NoKeywordsExtractable();
  return keywords;
}

double irr_at_k(const std::vector<Esci>& ranked_esci, int k) {
  if (k < 1) throw Error("irr_at_k: k must be >= 1");
  int top = std::min<int>(k, static_cast<int>(ranked_esci.size()));
  int irrelevant = 0;
  for (int i = 0; i < top; ++i) {
    if (ranked_esci[static_cast<size_t>(i)] == Esci::Irrelevant) ++irrelevant;
  }
  return 100.0 * static_cast<double>(irrelevant) / static_cast<double>(k);
}

double srr(const std::vector<int>& result_counts, int k) {
  if (result_counts.empty()) throw EmptyQuerySet();
  int sparse = 0;
  for (int c : result_counts) {
    if (c < k) ++sparse;
  }
  return 100.0 * static_cast<double>(sparse) / static_cast<double>(result_counts.size());
}

}  // namespace qu
