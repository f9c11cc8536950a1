#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qu/common.hpp"
#include "qu/taxonomy.hpp"

namespace qu {

struct NonFiniteInput : Error {
  NonFiniteInput() : Error("non-finite input to weight update") {}
};
struct NonPositiveDelta : Error {
  NonPositiveDelta() : Error("loss delta must be positive") {}
};
struct FrozenCell : Error {
  FrozenCell(TaskId t, SegmentId s)
      : Error("cell (" + std::string(task_name(t)) + ", " + std::string(segment_name(s)) +
              ") is frozen") {}
};

// Loss weight per (task, query segment); initialized to 1.0 everywhere.
// N/A cells stay at 1.0 and cannot be written.
class WeightTable {
 public:
  WeightTable();

  double get(TaskId t, SegmentId s) const {
    return w_[static_cast<size_t>(t)][static_cast<size_t>(s)];
  }
  void set(TaskId t, SegmentId s, double value);

  // Mean weight over a set of segments for one task.
  double effective(TaskId t, const std::vector<SegmentId>& segments) const;

  std::string to_json() const;
  static WeightTable from_json(const std::string& blob);

 private:
  std::array<std::array<double, kNumSegments>, kNumTasks> w_;
};

// Support-set losses at a checkpoint. Cells without support members carry no
// value; pooled losses cover the whole support set per task.
struct LossSnapshot {
  int checkpoint = 0;
  std::array<std::array<std::optional<double>, kNumSegments>, kNumTasks> seg_loss{};
  std::array<std::array<int, kNumSegments>, kNumTasks> seg_count{};
  std::array<double, kNumTasks> pooled{};
  std::array<int, kNumTasks> pooled_count{};
};

// w' = w + alpha * Relu(loss_i - loss_prev) * max(1, loss_i / loss_pooled);
// a zero pooled loss makes the ratio 1.
double update_primary(double w, double loss_i, double loss_prev, double loss_pooled,
                      double alpha);

// w' = w + Relu(loss_i - loss_prev)
double update_auxiliary(double w, double loss_i, double loss_prev);

// alpha = 0.1 / observed per-checkpoint loss delta
double recommend_alpha(double delta_loss);

struct SchedulerConfig {
  double alpha = 10.0;  // 0 disables the scheduler entirely
  int every_n = 50;     // steps between weight updates
  bool renormalize = true;
};

struct WeightLogRow {
  int step;
  TaskId task;
  SegmentId segment;
  double weight;
};

// Applies the update rules every N steps from support-set loss snapshots.
// The first eligible tick only records a baseline. Never touches the model.
class Scheduler {
 public:
  explicit Scheduler(const SchedulerConfig& cfg) : cfg_(cfg) {}

  const SchedulerConfig& config() const { return cfg_; }
  bool enabled() const { return cfg_.alpha > 0.0; }

  // `measure` is invoked only on update steps. Returns true if the table changed.
  bool tick(int step, const std::function<LossSnapshot()>& measure, WeightTable& weights);

  const std::vector<WeightLogRow>& log() const { return log_; }
  std::string log_csv() const;

 private:
  void apply_updates(const LossSnapshot& now, WeightTable& weights) const;
  void record(int step, const WeightTable& weights);

  SchedulerConfig cfg_;
  std::optional<LossSnapshot> prev_;
  std::vector<WeightLogRow> log_;
};

}  // namespace qu
