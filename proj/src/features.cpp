#include "qu/features.hpp"

namespace qu {

std::string_view specificity_name(Specificity s) {
  switch (s) {
    case Specificity::Low: return "Low";
    case Specificity::Mid: return "Mid";
    case Specificity::High: return "High";
  }
  throw Error("bad specificity");
}

namespace {

AttributeMatch match_one(const std::optional<std::string>& query_attr,
                         const std::optional<std::string>& product_attr) {
  AttributeMatch m;
  if (!query_attr) return m;
  m.present = true;
  m.match = product_attr && fold_text(*product_attr) == fold_text(*query_attr);
  return m;
}

}  // namespace

std::array<AttributeMatch, 3> match_attributes(const ParsedQuery& parsed, const Product& product) {
  return {
      match_one(parsed.attribute(EntityType::Brand), product.brand),
      match_one(parsed.attribute(EntityType::Color), product.color),
      match_one(parsed.attribute(EntityType::ProductType), product.product_type),
  };
}

Specificity specificity(const ParsedQuery& parsed) {
  int distinct = 0;
  for (int t = 0; t < kNumEntityTypes; ++t) {
    if (parsed.attributes[static_cast<size_t>(t)]) ++distinct;
  }
  if (distinct == 0) return Specificity::Low;
  if (distinct <= 2) return Specificity::Mid;
  return Specificity::High;
}

QuFeatureVector build_feature_vector(const ParsedQuery& parsed, const Product& product,
                                     const QueryStats& stats, double product_click_rate) {
  QuFeatureVector v;
  auto matches = match_attributes(parsed, product);
  v.brand = matches[0];
  v.color = matches[1];
  v.product_type = matches[2];
  v.spec = specificity(parsed);
  v.stats = stats;
  v.product_click_rate = product_click_rate;
  return v;
}

std::array<double, kQuFeatureDim> QuFeatureVector::to_array() const {
  return {
      brand.present ? 1.0 : 0.0,
      brand.match ? 1.0 : 0.0,
      color.present ? 1.0 : 0.0,
      color.match ? 1.0 : 0.0,
      product_type.present ? 1.0 : 0.0,
      product_type.match ? 1.0 : 0.0,
      spec == Specificity::Low ? 1.0 : 0.0,
      spec == Specificity::Mid ? 1.0 : 0.0,
      spec == Specificity::High ? 1.0 : 0.0,
      static_cast<double>(stats.frequency),
      stats.click_rate,
      stats.purchase_rate,
      product_click_rate,
  };
}

std::array<double, kQuFeatureDim> drop_qu_features(const std::array<double, kQuFeatureDim>& v) {
  std::array<double, kQuFeatureDim> out = v;
  for (int i = kQuBlockBegin; i < kQuBlockEnd; ++i) out[static_cast<size_t>(i)] = 0.0;
  return out;
}

}  // namespace qu
