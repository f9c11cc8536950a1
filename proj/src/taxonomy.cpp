#include "qu/taxonomy.hpp"

#include <vector>

namespace qu {

TaskId task_from_name(std::string_view name) {
  for (TaskId t : all_tasks()) {
    if (task_name(t) == name) return t;
  }
  throw Error("unknown task name: " + std::string(name));
}

std::string_view segment_name(SegmentId s) {
  switch (s) {
    case SegmentId::MediaLine: return "MediaLine";
    case SegmentId::SoftLine: return "SoftLine";
    case SegmentId::HardLine: return "HardLine";
    case SegmentId::Consumable: return "Consumable";
    case SegmentId::HasBrand: return "hasBrand";
    case SegmentId::HasColor: return "hasColor";
    case SegmentId::PtMatchHigh: return "PTMatchRatio-High";
    case SegmentId::PtMatchLow: return "PTMatchRatio-Low";
    case SegmentId::PriceHigh: return "ProductPrice-High";
    case SegmentId::PriceMid: return "ProductPrice-Mid";
    case SegmentId::PriceLow: return "ProductPrice-Low";
    case SegmentId::FreqHigh: return "Frequency-High";
    case SegmentId::FreqMid: return "Frequency-Mid";
    case SegmentId::FreqLow: return "Frequency-Low";
    case SegmentId::SpecHigh: return "Specificity-High";
    case SegmentId::SpecMid: return "Specificity-Mid";
    case SegmentId::SpecLow: return "Specificity-Low";
  }
  throw Error("segment_name: bad segment id");
}

SegmentId segment_from_name(std::string_view name) {
  for (SegmentId s : all_segments()) {
    if (segment_name(s) == name) return s;
  }
  throw Error("unknown segment name: " + std::string(name));
}

std::array<SegmentFamily, kNumExclusiveFamilies> exclusive_families() {
  return {SegmentFamily::Line, SegmentFamily::PtMatch, SegmentFamily::Price,
          SegmentFamily::Frequency, SegmentFamily::Specificity};
}

std::vector<SegmentId> family_members(SegmentFamily f) {
  switch (f) {
    case SegmentFamily::Line:
      return {SegmentId::MediaLine, SegmentId::SoftLine, SegmentId::HardLine,
              SegmentId::Consumable};
    case SegmentFamily::PtMatch:
      return {SegmentId::PtMatchHigh, SegmentId::PtMatchLow};
    case SegmentFamily::Price:
      return {SegmentId::PriceHigh, SegmentId::PriceMid, SegmentId::PriceLow};
    case SegmentFamily::Frequency:
      return {SegmentId::FreqHigh, SegmentId::FreqMid, SegmentId::FreqLow};
    case SegmentFamily::Specificity:
      return {SegmentId::SpecHigh, SegmentId::SpecMid, SegmentId::SpecLow};
  }
  throw Error("family_members: bad family");
}

}  // namespace qu
