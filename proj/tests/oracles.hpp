#pragma once

// Brute-force reference implementations used to freeze expected values.
// These stay independent of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "qu/ner.hpp"
#include "qu/retriever.hpp"

namespace qutest {

struct CrfEnumeration {
  double log_z = 0.0;
  std::vector<int> best_path;
  double best_score = 0.0;
};

// Enumerates every label sequence and scores it with the model potentials.
inline CrfEnumeration enumerate_crf(const qu::CrfModel& model, const qu::FeatureSequence& feats) {
  const int n = feats.length();
  const int num_labels = model.schema.num_labels();
  const std::vector<double> unary = qu::unary_scores(model, feats);

  CrfEnumeration result;
  std::vector<int> path(static_cast<size_t>(n), 0);
  double max_score = -1e300;
  std::vector<double> scores;

  while (true) {
    double s = 0.0;
    for (int t = 0; t < n; ++t) {
      s += unary[static_cast<size_t>(t) * static_cast<size_t>(num_labels) +
                 static_cast<size_t>(path[static_cast<size_t>(t)])];
      if (t > 0)
        s += model.trans_weight(path[static_cast<size_t>(t - 1)], path[static_cast<size_t>(t)]);
    }
    scores.push_back(s);
    if (s > max_score) {
      max_score = s;
      result.best_path = path;
      result.best_score = s;
    }
    // next tuple
    int pos = n - 1;
    while (pos >= 0) {
      path[static_cast<size_t>(pos)] += 1;
      if (path[static_cast<size_t>(pos)] < num_labels) break;
      path[static_cast<size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }

  double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - m);
  result.log_z = m + std::log(sum);
  return result;
}

// Dense multi-label BCE over an explicit target vector, masked.
inline double dense_bce(const std::vector<double>& probs, const std::vector<double>& targets,
                        const std::vector<bool>& mask, double eps) {
  double loss = 0.0;
  for (size_t t = 0; t < probs.size(); ++t) {
    if (!mask[t]) continue;
    double p = std::min(1.0 - eps, std::max(eps, probs[t]));
    loss += -(targets[t] * std::log(p) + (1.0 - targets[t]) * std::log(1.0 - p));
  }
  return loss;
}

// Exhaustive exact-Jaccard scan; top-k by (score desc, id asc).
inline std::vector<std::pair<int, double>> brute_force_topk(
    const std::vector<qu::KnowledgeEntry>& entries, const std::string& probe, int n, int k) {
  qu::ShingleSet probe_set = qu::shingle(qu::fold_text(probe), n);
  std::vector<std::pair<int, double>> scored;
  for (const auto& e : entries) {
    double score = qu::exact_jaccard(probe_set, qu::shingle(qu::fold_text(e.surface), n));
    if (score > 0.0) scored.emplace_back(e.id, score);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<size_t>(k));
  return scored;
}

// Spearman rank correlation with midranks.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> order(v.size());
    for (size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < order.size()) {
      size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (size_t t = i; t <= j; ++t) r[order[t]] = mid;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> rx = ranks(xs);
  std::vector<double> ry = ranks(ys);
  double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

}  // namespace qutest
