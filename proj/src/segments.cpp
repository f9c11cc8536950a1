#include "qu/segments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "qu/csu.hpp"

namespace qu {

using nlohmann::json;

namespace {

// Nearest-rank percentile over a copy of the values.
double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw EmptyDataset();
  std::sort(values.begin(), values.end());
  size_t rank = static_cast<size_t>(
      std::ceil(p * static_cast<double>(values.size())));
  if (rank == 0) rank = 1;
  if (rank > values.size()) rank = values.size();
  return values[rank - 1];
}

}  // namespace

SegmenterConfig fit_segmenter(const std::vector<double>& frequencies,
                              const std::vector<double>& prices,
                              const std::vector<double>& pt_match_ratios) {
  if (frequencies.empty() || prices.empty() || pt_match_ratios.empty()) throw EmptyDataset();
  SegmenterConfig cfg;
  cfg.freq_lo = percentile(frequencies, 1.0 / 3.0);
  cfg.freq_hi = percentile(frequencies, 2.0 / 3.0);
  cfg.price_lo = percentile(prices, 1.0 / 3.0);
  cfg.price_hi = percentile(prices, 2.0 / 3.0);
  cfg.pt_ratio_median = percentile(pt_match_ratios, 0.5);
  cfg.fitted = true;
  return cfg;
}

int tercile_bucket(double value, double lo, double hi) {
  if (value < lo) return 0;
  if (value > hi) return 2;
  return 1;
}

std::vector<SegmentId> assign_segments(const ParsedQuery& parsed, const QueryStats& stats,
                                       const std::vector<TopProduct>& topk, double mean_price,
                                       const SegmenterConfig& cfg) {
  if (!cfg.fitted) throw UnfittedConfig();
  if (topk.empty()) throw NoCandidates();

  std::vector<SegmentId> segments;

  // product line: majority line among engaged top-k, falling back to all top-k
  std::array<int, 4> line_votes{};
  bool any_engaged = false;
  for (const auto& tp : topk) {
    if (tp.engaged) {
      any_engaged = true;
      line_votes[static_cast<size_t>(tp.product->line)] += 1;
    }
  }
  if (!any_engaged) {
    for (const auto& tp : topk) line_votes[static_cast<size_t>(tp.product->line)] += 1;
  }
  int best_line = 0;
  for (int i = 1; i < 4; ++i) {
    if (line_votes[static_cast<size_t>(i)] > line_votes[static_cast<size_t>(best_line)])
      best_line = i;
  }
  segments.push_back(static_cast<SegmentId>(static_cast<int>(SegmentId::MediaLine) + best_line));

  if (parsed.attribute(EntityType::Brand)) segments.push_back(SegmentId::HasBrand);
  if (parsed.attribute(EntityType::Color)) segments.push_back(SegmentId::HasColor);

  // product-type match ratio over top-k
  int pt_matches = 0;
  for (const auto& tp : topk) {
    auto m = match_attributes(parsed, *tp.product);
    if (m[2].match) ++pt_matches;
  }
  double ratio = static_cast<double>(pt_matches) / static_cast<double>(topk.size());
  segments.push_back(ratio >= cfg.pt_ratio_median ? SegmentId::PtMatchHigh
                                                  : SegmentId::PtMatchLow);

  switch (tercile_bucket(mean_price, cfg.price_lo, cfg.price_hi)) {
    case 0: segments.push_back(SegmentId::PriceLow); break;
    case 1: segments.push_back(SegmentId::PriceMid); break;
    default: segments.push_back(SegmentId::PriceHigh); break;
  }
  switch (tercile_bucket(static_cast<double>(stats.frequency), cfg.freq_lo, cfg.freq_hi)) {
    case 0: segments.push_back(SegmentId::FreqLow); break;
    case 1: segments.push_back(SegmentId::FreqMid); break;
    default: segments.push_back(SegmentId::FreqHigh); break;
  }
  switch (specificity(parsed)) {
    case Specificity::Low: segments.push_back(SegmentId::SpecLow); break;
    case Specificity::Mid: segments.push_back(SegmentId::SpecMid); break;
    case Specificity::High: segments.push_back(SegmentId::SpecHigh); break;
  }

  std::sort(segments.begin(), segments.end());
  return segments;
}

SegmentReport segment_report(const RankModel& model, const std::vector<QueryGroup>& groups,
                             int k) {
  if (groups.empty()) throw EmptyDataset();

  SegmentReport report;
  report.k = k;
  report.overall_queries = static_cast<int>(groups.size());

  std::array<double, kNumSegments> ndcg_sum{};
  std::array<int, kNumSegments> ndcg_count{};
  std::array<double, kNumSegments> irr_sum{};
  std::array<int, kNumSegments> member_count{};
  double overall_ndcg_sum = 0.0;
  int overall_ndcg_count = 0;
  double overall_irr_sum = 0.0;

  size_t purchase = static_cast<size_t>(TaskId::Purchase);
  for (const auto& group : groups) {
    RankedList ranked = rank_topk(model, group, static_cast<int>(group.candidates.size()));
    std::map<std::string, const Candidate*> by_id;
    for (const auto& c : group.candidates) by_id[c.product_id] = &c;

    std::vector<double> ranked_gains;
    std::vector<Esci> ranked_esci;
    for (const auto& [pid, s] : ranked.items) {
      const Candidate* c = by_id.at(pid);
      ranked_gains.push_back(c->gains[purchase]);
      ranked_esci.push_back(c->esci);
    }
    std::vector<double> ideal = ranked_gains;
    std::sort(ideal.begin(), ideal.end(), std::greater<double>());

    std::optional<double> ndcg;
    try {
      ndcg = ndcg_at_k(ranked_gains, ideal, k);
    } catch (const ZeroIdealGain&) {
    }
    double irr = irr_at_k(ranked_esci, k);

    if (ndcg) {
      overall_ndcg_sum += *ndcg;
      ++overall_ndcg_count;
    }
    overall_irr_sum += irr;

    for (SegmentId s : group.segments) {
      size_t si = static_cast<size_t>(s);
      member_count[si] += 1;
      irr_sum[si] += irr;
      if (ndcg) {
        ndcg_sum[si] += *ndcg;
        ndcg_count[si] += 1;
      }
    }
  }

  report.overall_ndcg =
      overall_ndcg_count > 0 ? overall_ndcg_sum / overall_ndcg_count : 0.0;
  report.overall_irr = overall_irr_sum / static_cast<double>(groups.size());

  for (SegmentId s : all_segments()) {
    size_t si = static_cast<size_t>(s);
    SegmentRow row;
    row.segment = s;
    row.members = member_count[si];
    row.evaluated = ndcg_count[si];
    if (ndcg_count[si] > 0) row.ndcg = ndcg_sum[si] / ndcg_count[si];
    if (member_count[si] > 0) row.irr = irr_sum[si] / member_count[si];
    report.rows.push_back(row);
  }
  return report;
}

std::string SegmenterConfig::to_json() const {
  json j{{"fitted", fitted},       {"freq_hi", freq_hi},   {"freq_lo", freq_lo},
         {"price_hi", price_hi},   {"price_lo", price_lo}, {"pt_ratio_median", pt_ratio_median}};
  return j.dump();
}

SegmenterConfig SegmenterConfig::from_json(const std::string& blob) {
  json j = json::parse(blob);
  SegmenterConfig cfg;
  cfg.fitted = j.at("fitted").get<bool>();
  cfg.freq_lo = j.at("freq_lo").get<double>();
  cfg.freq_hi = j.at("freq_hi").get<double>();
  cfg.price_lo = j.at("price_lo").get<double>();
  cfg.price_hi = j.at("price_hi").get<double>();
  cfg.pt_ratio_median = j.at("pt_ratio_median").get<double>();
  return cfg;
}

std::string SegmentReport::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) {
    json r{{"segment", std::string(segment_name(row.segment))},
           {"members", row.members},
           {"evaluated", row.evaluated},
           {"ndcg", row.ndcg ? json(*row.ndcg) : json(nullptr)},
           {"irr", row.irr ? json(*row.irr) : json(nullptr)}};
    rows_json.push_back(r);
  }
  json j{{"k", k},
         {"overall", json{{"irr", overall_irr},
                          {"ndcg", overall_ndcg},
                          {"queries", overall_queries}}},
         {"segments", rows_json}};
  return j.dump(2) + "\n";
}

std::string SegmentReport::to_csv() const {
  std::string out = "segment,members,evaluated,ndcg,irr\n";
  char buf[64];
  for (const auto& row : rows) {
    out += segment_name(row.segment);
    out += ',' + std::to_string(row.members) + ',' + std::to_string(row.evaluated) + ',';
    if (row.ndcg) {
      std::snprintf(buf, sizeof(buf), "%.17g", *row.ndcg);
      out += buf;
    }
    out += ',';
    if (row.irr) {
      std::snprintf(buf, sizeof(buf), "%.17g", *row.irr);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace qu
