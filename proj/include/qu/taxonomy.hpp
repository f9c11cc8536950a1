#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "qu/common.hpp"

namespace qu {

// --- ranking tasks ---

enum class TaskId : int { Purchase = 0, Revenue = 1, Relevance = 2, Brand = 3 };
constexpr int kNumTasks = 4;

enum class TaskRole { Primary, Auxiliary };

inline TaskRole role_of(TaskId t) {
  switch (t) {
    case TaskId::Purchase:
    case TaskId::Revenue:
      return TaskRole::Primary;
    case TaskId::Relevance:
    case TaskId::Brand:
      return TaskRole::Auxiliary;
  }
  throw Error("role_of: bad task id");
}

inline std::string_view task_name(TaskId t) {
  switch (t) {
    case TaskId::Purchase: return "purchase";
    case TaskId::Revenue: return "revenue";
    case TaskId::Relevance: return "relevance";
    case TaskId::Brand: return "brand";
  }
  throw Error("task_name: bad task id");
}

TaskId task_from_name(std::string_view name);

inline std::array<TaskId, kNumTasks> all_tasks() {
  return {TaskId::Purchase, TaskId::Revenue, TaskId::Relevance, TaskId::Brand};
}

// --- query segments ---

enum class SegmentId : int {
  MediaLine = 0,
  SoftLine = 1,
  HardLine = 2,
  Consumable = 3,
  HasBrand = 4,
  HasColor = 5,
  PtMatchHigh = 6,
  PtMatchLow = 7,
  PriceHigh = 8,
  PriceMid = 9,
  PriceLow = 10,
  FreqHigh = 11,
  FreqMid = 12,
  FreqLow = 13,
  SpecHigh = 14,
  SpecMid = 15,
  SpecLow = 16,
};
constexpr int kNumSegments = 17;

std::string_view segment_name(SegmentId s);
SegmentId segment_from_name(std::string_view name);

inline std::array<SegmentId, kNumSegments> all_segments() {
  std::array<SegmentId, kNumSegments> out{};
  for (int i = 0; i < kNumSegments; ++i) out[static_cast<size_t>(i)] = static_cast<SegmentId>(i);
  return out;
}

// Mutually exclusive segment families; HasBrand / HasColor are independent flags.
enum class SegmentFamily { Line, PtMatch, Price, Frequency, Specificity };
constexpr int kNumExclusiveFamilies = 5;

std::array<SegmentFamily, kNumExclusiveFamilies> exclusive_families();
std::vector<SegmentId> family_members(SegmentFamily f);

// Cells with no defined weight: frozen at 1.0, never updated by the scheduler.
inline bool is_na_cell(TaskId t, SegmentId s) {
  if (t == TaskId::Brand && s == SegmentId::Consumable) return true;
  if (t == TaskId::Revenue && s == SegmentId::FreqHigh) return true;
  if (t == TaskId::Relevance && s == SegmentId::FreqHigh) return true;
  return false;
}

}  // namespace qu
