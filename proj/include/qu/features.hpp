#pragma once

#include <array>
#include <string>

#include "qu/common.hpp"
#include "qu/corpus.hpp"
#include "qu/ner.hpp"

namespace qu {

struct QueryStats {
  int64_t frequency = 0;
  double click_rate = 0.0;     // historical, in [0,1]
  double purchase_rate = 0.0;  // historical, <= click_rate
};

enum class Specificity : int { Low = 0, Mid = 1, High = 2 };
std::string_view specificity_name(Specificity s);

struct AttributeMatch {
  bool present = false;
  bool match = false;  // never set without present
};

// Case-folded string equality against the product attribute; absent query
// attribute yields (0,0).
std::array<AttributeMatch, 3> match_attributes(const ParsedQuery& parsed, const Product& product);

// Count of distinct entity types detected: 0 -> Low, 1-2 -> Mid, >=3 -> High.
Specificity specificity(const ParsedQuery& parsed);

// Fixed field order; see docs/feature_schema.md.
constexpr int kQuFeatureDim = 13;

struct QuFeatureVector {
  AttributeMatch brand;
  AttributeMatch color;
  AttributeMatch product_type;
  Specificity spec = Specificity::Low;
  QueryStats stats;
  double product_click_rate = 0.0;  // behavioral product feature

  std::array<double, kQuFeatureDim> to_array() const;
};

QuFeatureVector build_feature_vector(const ParsedQuery& parsed, const Product& product,
                                     const QueryStats& stats, double product_click_rate = 0.0);

// Ablation projection: zeroes the query-understanding dimensions (match bits
// and specificity), keeping behavioral features.
std::array<double, kQuFeatureDim> drop_qu_features(const std::array<double, kQuFeatureDim>& v);

// Index ranges of the drop mask, exposed for schema tests.
constexpr int kQuBlockBegin = 0;
constexpr int kQuBlockEnd = 9;  // exclusive

}  // namespace qu
