#include <doctest.h>

#include "qu/segments.hpp"

using namespace qu;

namespace {

ParsedQuery parsed_with(std::vector<std::pair<EntityType, std::string>> attrs) {
  ParsedQuery p;
  p.query.id = "q";
  int pos = 0;
  for (auto& [type, value] : attrs) {
    p.spans.push_back({pos, pos + 1, type, value});
    p.attributes[static_cast<size_t>(type)] = value;
    ++pos;
  }
  return p;
}

}  // namespace

TEST_CASE("tercile boundaries land on the empirical percentiles") {
  std::vector<double> uniform;
  for (int i = 1; i <= 300; ++i) uniform.push_back(static_cast<double>(i));
  SegmenterConfig cfg = fit_segmenter(uniform, uniform, {0.1, 0.5, 0.9});
  CHECK(cfg.freq_lo == 100.0);
  CHECK(cfg.freq_hi == 200.0);
  CHECK(cfg.price_lo == 100.0);
  CHECK(cfg.price_hi == 200.0);
  CHECK(cfg.pt_ratio_median == 0.5);
}

TEST_CASE("refitting on the same data yields an identical config") {
  std::vector<double> freq = {5, 1, 9, 2, 8, 3};
  std::vector<double> price = {10.5, 20.0, 1.25, 7.5};
  std::vector<double> ratios = {0.2, 0.6, 0.4};
  SegmenterConfig a = fit_segmenter(freq, price, ratios);
  SegmenterConfig b = fit_segmenter(freq, price, ratios);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("constant prices bucket everything as Mid") {
  std::vector<double> constant(50, 42.0);
  SegmenterConfig cfg = fit_segmenter(constant, constant, {0.5});
  CHECK(tercile_bucket(42.0, cfg.price_lo, cfg.price_hi) == 1);
}

TEST_CASE("fit rejects empty inputs") {
  CHECK_THROWS_AS(fit_segmenter({}, {1.0}, {0.5}), EmptyDataset);
}

namespace {

Product product_of(ProductLine line, const std::string& type, double price) {
  Product p;
  p.id = "p" + type;
  p.title = type;
  p.product_type = type;
  p.price = price;
  p.line = line;
  return p;
}

SegmenterConfig simple_cfg() {
  SegmenterConfig cfg;
  cfg.fitted = true;
  cfg.freq_lo = 10;
  cfg.freq_hi = 100;
  cfg.price_lo = 10;
  cfg.price_hi = 50;
  cfg.pt_ratio_median = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("assign_segments applies every family rule") {
  ParsedQuery parsed = parsed_with({{EntityType::Color, "red"},
                                    {EntityType::Brand, "nike"},
                                    {EntityType::ProductType, "shoes"}});
  Product shoes = product_of(ProductLine::SoftLine, "shoes", 30.0);
  Product lamp = product_of(ProductLine::HardLine, "lamp", 30.0);
  std::vector<TopProduct> topk = {{&shoes, true}, {&shoes, true}, {&lamp, false}};
  QueryStats stats{500, 0.3, 0.1};

  auto segments = assign_segments(parsed, stats, topk, 30.0, simple_cfg());
  auto has = [&](SegmentId s) {
    return std::find(segments.begin(), segments.end(), s) != segments.end();
  };
  CHECK(has(SegmentId::HasBrand));
  CHECK(has(SegmentId::HasColor));
  CHECK(has(SegmentId::SoftLine));      // majority engaged line
  CHECK(has(SegmentId::FreqHigh));      // 500 > 100
  CHECK(has(SegmentId::PriceMid));      // 30 within [10, 50]
  CHECK(has(SegmentId::SpecHigh));      // three attribute types
  CHECK(has(SegmentId::PtMatchHigh));   // 2/3 >= 0.5
}

TEST_CASE("plain queries carry no flag segments") {
  ParsedQuery parsed = parsed_with({});
  Product lamp = product_of(ProductLine::HardLine, "lamp", 30.0);
  std::vector<TopProduct> topk = {{&lamp, false}};
  QueryStats stats{50, 0.0, 0.0};
  auto segments = assign_segments(parsed, stats, topk, 30.0, simple_cfg());
  auto has = [&](SegmentId s) {
    return std::find(segments.begin(), segments.end(), s) != segments.end();
  };
  CHECK(!has(SegmentId::HasBrand));
  CHECK(!has(SegmentId::HasColor));
  CHECK(has(SegmentId::SpecLow));
  CHECK(has(SegmentId::FreqMid));
  CHECK(has(SegmentId::PriceMid));
  CHECK(has(SegmentId::PtMatchLow));  // no product type attribute -> no matches
  CHECK(has(SegmentId::HardLine));
}

TEST_CASE("every exclusive family contributes exactly one segment") {
  ParsedQuery parsed = parsed_with({{EntityType::Brand, "acme"}});
  Product tea = product_of(ProductLine::Consumable, "tea", 5.0);
  std::vector<TopProduct> topk = {{&tea, true}};
  QueryStats stats{5, 0.1, 0.0};
  auto segments = assign_segments(parsed, stats, topk, 5.0, simple_cfg());
  for (SegmentFamily f : exclusive_families()) {
    int hits = 0;
    for (SegmentId s : family_members(f)) {
      if (std::find(segments.begin(), segments.end(), s) != segments.end()) ++hits;
    }
    CHECK(hits == 1);
  }
}

TEST_CASE("assignment requires a fitted config") {
  ParsedQuery parsed = parsed_with({});
  Product tea = product_of(ProductLine::Consumable, "tea", 5.0);
  std::vector<TopProduct> topk = {{&tea, false}};
  SegmenterConfig unfitted;
  CHECK_THROWS_AS(assign_segments(parsed, QueryStats{}, topk, 5.0, unfitted), UnfittedConfig);
}

TEST_CASE("segmenter config round-trips through json") {
  SegmenterConfig cfg = simple_cfg();
  SegmenterConfig loaded = SegmenterConfig::from_json(cfg.to_json());
  CHECK(loaded.to_json() == cfg.to_json());
}
