#include "qu/intent.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace qu {

using nlohmann::json;

namespace {

constexpr uint64_t kIntentFeatureSeed = 0x494e54454e54ULL;

double clamp_prob(double p) {
  return std::min(1.0 - kProbEpsilon, std::max(kProbEpsilon, p));
}

// single-label binary cross-entropy
double bce(double y, double p) { return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)); }

double sigmoid(double z) {
  if (z >= 0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

LabelSpace::LabelSpace(const std::map<std::string, std::vector<std::string>>& per_marketplace) {
  for (const auto& [marketplace, labels] : per_marketplace) {
    if (labels.empty()) throw Error("marketplace " + marketplace + " has no labels");
    int begin = static_cast<int>(global_.size());
    for (const auto& l : labels) global_.push_back(marketplace + "/" + l);
    marketplaces_.push_back(marketplace);
    slices_[marketplace] = {begin, static_cast<int>(global_.size())};
  }
}

LabelMask LabelSpace::mask_for_marketplace(const std::string& marketplace) const {
  auto it = slices_.find(marketplace);
  if (it == slices_.end()) throw UnknownMarketplace(marketplace);
  LabelMask mask(global_.size(), false);
  for (int i = it->second.first; i < it->second.second; ++i) mask[static_cast<size_t>(i)] = true;
  return mask;
}

int LabelSpace::global_index(const std::string& marketplace, const std::string& label) const {
  auto it = slices_.find(marketplace);
  if (it == slices_.end()) throw UnknownMarketplace(marketplace);
  for (int i = it->second.first; i < it->second.second; ++i) {
    if (global_[static_cast<size_t>(i)] == marketplace + "/" + label) return i;
  }
  throw Error("label " + label + " not in marketplace " + marketplace);
}

double semi_sparse_bce(const std::vector<double>& probs, const SparseLabels& sparse,
                       const LabelMask& mask) {
  if (probs.size() != mask.size()) throw Error("semi_sparse_bce: probs vs mask size mismatch");
  double loss = 0.0;
  for (size_t t = 0; t < probs.size(); ++t) {
    if (!mask[t]) continue;
    loss += bce(0.0, clamp_prob(probs[t]));
  }
  for (const auto& [idx, y] : sparse.nonzero) {
    if (idx < 0 || idx >= static_cast<int>(probs.size()) || !mask[static_cast<size_t>(idx)])
      throw IndexOutsideMask(idx);
    double p = clamp_prob(probs[static_cast<size_t>(idx)]);
    loss += bce(y, p) - bce(0.0, p);
  }
  return loss;
}

std::vector<double> semi_sparse_bce_grad(const std::vector<double>& probs,
                                         const SparseLabels& sparse, const LabelMask& mask) {
  std::vector<double> grad(probs.size(), 0.0);
  for (size_t t = 0; t < probs.size(); ++t) {
    if (!mask[t]) continue;
    grad[t] = clamp_prob(probs[t]);  // d(bce)/d(logit) = p - y with y = 0
  }
  for (const auto& [idx, y] : sparse.nonzero) {
    if (idx < 0 || idx >= static_cast<int>(probs.size()) || !mask[static_cast<size_t>(idx)])
      throw IndexOutsideMask(idx);
    grad[static_cast<size_t>(idx)] -= y;
  }
  return grad;
}

IntentModel::IntentModel(LabelSpace space, int feature_dim)
    : space_(std::move(space)), feature_dim_(feature_dim) {
  total_dim_ = feature_dim_ + static_cast<int>(space_.marketplaces().size());
  weights_.assign(static_cast<size_t>(total_dim_) * static_cast<size_t>(space_.num_global()), 0.0);
  bias_.assign(static_cast<size_t>(space_.num_global()), 0.0);
}

std::vector<int> IntentModel::featurize(const std::string& text,
                                        const std::string& marketplace) const {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) {
    ids.push_back(static_cast<int>(hash64("w=" + tok, kIntentFeatureSeed) %
                                   static_cast<uint64_t>(feature_dim_)));
  }
  const auto& markets = space_.marketplaces();
  auto it = std::find(markets.begin(), markets.end(), marketplace);
  if (it == markets.end()) throw UnknownMarketplace(marketplace);
  ids.push_back(feature_dim_ + static_cast<int>(it - markets.begin()));
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<double> IntentModel::logits(const std::vector<int>& features) const {
  const int num_labels = space_.num_global();
  std::vector<double> out(bias_);
  for (int f : features) {
    const double* row =
        weights_.data() + static_cast<size_t>(f) * static_cast<size_t>(num_labels);
    for (int l = 0; l < num_labels; ++l) out[static_cast<size_t>(l)] += row[l];
  }
  return out;
}

std::vector<double> IntentModel::probabilities(const std::string& text,
                                               const std::string& marketplace) const {
  std::vector<double> z = logits(featurize(text, marketplace));
  for (double& v : z) v = sigmoid(v);
  return z;
}

std::vector<IntentModel::Scored> IntentModel::predict(const std::string& text,
                                                      const std::string& marketplace,
                                                      double threshold) const {
  LabelMask mask = space_.mask_for_marketplace(marketplace);
  std::vector<double> probs = probabilities(text, marketplace);
  std::vector<Scored> out;
  for (int i = 0; i < space_.num_global(); ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    double p = probs[static_cast<size_t>(i)];
    if (p >= threshold) {
      out.push_back({i, space_.global_labels()[static_cast<size_t>(i)], p});
    }
  }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.global_index < b.global_index;
  });
  return out;
}

IntentModel train_intent(const std::vector<IntentExample>& examples, const LabelSpace& space,
                         const IntentTrainConfig& hyper, std::vector<double>* loss_curve) {
  if (examples.empty()) throw EmptyTrainingSet();

  IntentModel model(space, hyper.feature_dim);
  const int num_labels = space.num_global();

  struct Prepared {
    std::vector<int> features;
    LabelMask mask;
    const SparseLabels* labels;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(examples.size());
  for (const auto& ex : examples) {
    prepared.push_back(
        {model.featurize(ex.text, ex.marketplace), space.mask_for_marketplace(ex.marketplace),
         &ex.labels});
  }

  auto total_loss = [&](const std::vector<double>& weights, const std::vector<double>& bias) {
    double loss = 0.0;
    for (const auto& p : prepared) {
      std::vector<double> z(bias);
      for (int f : p.features) {
        const double* row =
            weights.data() + static_cast<size_t>(f) * static_cast<size_t>(num_labels);
        for (int l = 0; l < num_labels; ++l) z[static_cast<size_t>(l)] += row[l];
      }
      for (double& v : z) v = sigmoid(v);
      loss += semi_sparse_bce(z, *p.labels, p.mask);
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
    for (const auto& p : prepared) {
      std::vector<double> z = model.logits(p.features);
      for (double& v : z) v = sigmoid(v);
      std::vector<double> g = semi_sparse_bce_grad(z, *p.labels, p.mask);
      for (int f : p.features) {
        double* row = grad_w.data() + static_cast<size_t>(f) * static_cast<size_t>(num_labels);
        for (int l = 0; l < num_labels; ++l) row[l] += g[static_cast<size_t>(l)];
      }
      for (int l = 0; l < num_labels; ++l) grad_b[static_cast<size_t>(l)] += g[static_cast<size_t>(l)];
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

double recall_at_precision(const std::vector<double>& scores, const std::vector<bool>& gold,
                           double target_precision) {
  if (scores.size() != gold.size()) throw Error("recall_at_precision: size mismatch");
  if (!(target_precision > 0.0 && target_precision <= 1.0))
    throw Error("target precision must lie in (0,1]");
  int64_t positives = 0;
  for (bool g : gold) positives += g ? 1 : 0;
  if (positives == 0) return 0.0;

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double best_recall = 0.0;
  int64_t tp = 0;
  int64_t taken = 0;
  size_t i = 0;
  while (i < order.size()) {
    // include the whole tie group: thresholds sit between distinct scores
    double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      tp += gold[order[i]] ? 1 : 0;
      ++taken;
      ++i;
    }
    double precision = static_cast<double>(tp) / static_cast<double>(taken);
    if (precision >= target_precision) {
      best_recall = std::max(best_recall, static_cast<double>(tp) / static_cast<double>(positives));
    }
  }
  return best_recall;
}

std::string IntentModel::to_json() const {
  json markets = json::object();
  // reconstruct per-marketplace label lists from the global names
  for (const auto& m : space_.marketplaces()) {
    json labels = json::array();
    for (const auto& g : space_.global_labels()) {
      if (g.rfind(m + "/", 0) == 0) labels.push_back(g.substr(m.size() + 1));
    }
    markets[m] = labels;
  }
  json j{{"format", "qu.intent"}, {"version", 1},      {"feature_dim", feature_dim_},
         {"label_space", markets}, {"weights", weights_}, {"bias", bias_},
         {"trained", trained_}};
  return j.dump();
}

IntentModel IntentModel::from_json(const std::string& blob) {
  json j = json::parse(blob);
  if (j.at("format").get<std::string>() != "qu.intent" || j.at("version").get<int>() != 1)
    throw Error("unsupported intent blob");
  std::map<std::string, std::vector<std::string>> markets;
  for (const auto& [m, labels] : j.at("label_space").items()) {
    markets[m] = labels.get<std::vector<std::string>>();
  }
  IntentModel model(LabelSpace(markets), j.at("feature_dim").get<int>());
  model.weights_ = j.at("weights").get<std::vector<double>>();
  model.bias_ = j.at("bias").get<std::vector<double>>();
  model.trained_ = j.at("trained").get<bool>();
  if (model.weights_.size() != static_cast<size_t>(model.total_dim_) *
                                   static_cast<size_t>(model.space_.num_global()))
    throw Error("intent blob weight size mismatch");
  return model;
}

}  // namespace qu
