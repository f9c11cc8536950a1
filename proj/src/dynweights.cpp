#include "qu/dynweights.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace qu {

using nlohmann::json;

WeightTable::WeightTable() {
  for (auto& row : w_) row.fill(1.0);
}

void WeightTable::set(TaskId t, SegmentId s, double value) {
  if (is_na_cell(t, s)) throw FrozenCell(t, s);
  if (!std::isfinite(value) || value < 0.0) throw NonFiniteInput();
  w_[static_cast<size_t>(t)][static_cast<size_t>(s)] = value;
}

double WeightTable::effective(TaskId t, const std::vector<SegmentId>& segments) const {
  if (segments.empty()) return 1.0;
  double sum = 0.0;
  for (SegmentId s : segments) sum += get(t, s);
  return sum / static_cast<double>(segments.size());
}

std::string WeightTable::to_json() const {
  json rows = json::array();
  for (TaskId t : all_tasks()) {
    for (SegmentId s : all_segments()) {
      rows.push_back(json{{"segment", std::string(segment_name(s))},
                          {"task", std::string(task_name(t))},
                          {"weight", get(t, s)}});
    }
  }
  return json{{"format", "qu.weights"}, {"version", 1}, {"weights", rows}}.dump();
}

WeightTable WeightTable::from_json(const std::string& blob) {
  json j = json::parse(blob);
  if (j.at("format").get<std::string>() != "qu.weights") throw Error("unsupported weight blob");
  WeightTable table;
  for (const auto& row : j.at("weights")) {
    TaskId t = task_from_name(row.at("task").get<std::string>());
    SegmentId s = segment_from_name(row.at("segment").get<std::string>());
    if (!is_na_cell(t, s)) table.set(t, s, row.at("weight").get<double>());
  }
  return table;
}

double update_primary(double w, double loss_i, double loss_prev, double loss_pooled,
                      double alpha) {
  if (!std::isfinite(w) || !std::isfinite(loss_i) || !std::isfinite(loss_prev) ||
      !std::isfinite(loss_pooled) || !std::isfinite(alpha) || alpha < 0.0)
    throw NonFiniteInput();
  double relu = std::max(0.0, loss_i - loss_prev);
  double ratio = loss_pooled == 0.0 ? 1.0 : loss_i / loss_pooled;
  return w + alpha * relu * std::max(1.0, ratio);
}

double update_auxiliary(double w, double loss_i, double loss_prev) {
  if (!std::isfinite(w) || !std::isfinite(loss_i) || !std::isfinite(loss_prev))
    throw NonFiniteInput();
  return w + std::max(0.0, loss_i - loss_prev);
}

double recommend_alpha(double delta_loss) {
  if (!(delta_loss > 0.0)) throw NonPositiveDelta();
  return 0.1 / delta_loss;
}

bool Scheduler::tick(int step, const std::function<LossSnapshot()>& measure,
                     WeightTable& weights) {
  if (!enabled()) return false;
  if (step <= 0 || step % cfg_.every_n != 0) return false;
  LossSnapshot now = measure();
  now.checkpoint = step / cfg_.every_n;
  if (!prev_) {
    prev_ = std::move(now);
    record(step, weights);
    return false;
  }
  apply_updates(now, weights);
  prev_ = std::move(now);
  record(step, weights);
  return true;
}

void Scheduler::apply_updates(const LossSnapshot& now, WeightTable& weights) const {
  for (SegmentId s : all_segments()) {
    double pre_sum = 0.0;
    double post_sum = 0.0;
    std::array<double, kNumTasks> updated{};
    std::array<bool, kNumTasks> free_cell{};
    for (TaskId t : all_tasks()) {
      size_t ti = static_cast<size_t>(t);
      size_t si = static_cast<size_t>(s);
      double w = weights.get(t, s);
      if (is_na_cell(t, s)) {
        updated[ti] = w;
        continue;
      }
      free_cell[ti] = true;
      pre_sum += w;
      const auto& cur = now.seg_loss[ti][si];
      const auto& before = prev_->seg_loss[ti][si];
      if (cur && before) {
        if (role_of(t) == TaskRole::Primary) {
          w = update_primary(w, *cur, *before, now.pooled[ti], cfg_.alpha);
        } else {
          w = update_auxiliary(w, *cur, *before);
        }
      }
      updated[ti] = w;
      post_sum += w;
    }
    if (cfg_.renormalize && post_sum > 0.0 && pre_sum > 0.0) {
      double scale = pre_sum / post_sum;
      for (TaskId t : all_tasks()) {
        if (free_cell[static_cast<size_t>(t)]) updated[static_cast<size_t>(t)] *= scale;
      }
    }
    for (TaskId t : all_tasks()) {
      if (free_cell[static_cast<size_t>(t)]) weights.set(t, s, updated[static_cast<size_t>(t)]);
    }
  }
}

void Scheduler::record(int step, const WeightTable& weights) {
  for (TaskId t : all_tasks()) {
    for (SegmentId s : all_segments()) {
      log_.push_back({step, t, s, weights.get(t, s)});
    }
  }
}

std::string Scheduler::log_csv() const {
  std::string out = "step,task,segment,weight\n";
  char buf[64];
  for (const auto& row : log_) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.weight);
    out += std::to_string(row.step);
    out += ',';
    out += task_name(row.task);
    out += ',';
    out += segment_name(row.segment);
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

}  // namespace qu
