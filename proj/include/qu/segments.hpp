#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qu/common.hpp"
#include "qu/corpus.hpp"
#include "qu/features.hpp"
#include "qu/ner.hpp"
#include "qu/ranker.hpp"
#include "qu/taxonomy.hpp"

namespace qu {

struct UnfittedConfig : Error {
  UnfittedConfig() : Error("segmenter has not been fitted") {}
};

struct SegmenterConfig {
  bool fitted = false;
  // tercile boundaries (inclusive Mid range), frozen at fit time
  double freq_lo = 0.0, freq_hi = 0.0;
  double price_lo = 0.0, price_hi = 0.0;
  double pt_ratio_median = 0.0;

  std::string to_json() const;
  static SegmenterConfig from_json(const std::string& blob);
};

// Fit tercile boundaries on training data: per-query frequency, per-query mean
// judged product price, and the median product-type match ratio.
SegmenterConfig fit_segmenter(const std::vector<double>& frequencies,
                              const std::vector<double>& prices,
                              const std::vector<double>& pt_match_ratios);

// Bucket helpers: value below lo -> Low, above hi -> High, else Mid.
int tercile_bucket(double value, double lo, double hi);  // 0 low, 1 mid, 2 high

struct TopProduct {
  const Product* product;
  bool engaged;  // clicked at least once
};

// The segment set for one query: line from engaged top-k products, match
// ratio over top-k, plus brand/color flags and bucketed stats.
std::vector<SegmentId> assign_segments(const ParsedQuery& parsed, const QueryStats& stats,
                                       const std::vector<TopProduct>& topk, double mean_price,
                                       const SegmenterConfig& cfg);

struct SegmentRow {
  SegmentId segment;
  int members = 0;     // queries in the segment
  int evaluated = 0;   // members with positive ideal purchase gain
  std::optional<double> ndcg;  // null when empty
  std::optional<double> irr;
};

struct SegmentReport {
  std::vector<SegmentRow> rows;  // one per SegmentId, enum order
  double overall_ndcg = 0.0;     // equals evaluate() on the same groups
  double overall_irr = 0.0;
  int overall_queries = 0;
  int k = 16;

  std::string to_json() const;
  std::string to_csv() const;
};

// Per-segment NDCG@k (purchase gains) and IRR@k; groups must carry their
// segment assignments.
SegmentReport segment_report(const RankModel& model, const std::vector<QueryGroup>& groups,
                             int k = 16);

}  // namespace qu
