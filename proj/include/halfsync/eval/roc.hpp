#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halfsync/data/shots.hpp"

namespace halfsync::eval {

/// Alarms raised within this many timesteps (1 ms each) of a disruption are too late.
inline constexpr std::uint32_t kAlarmCutoffMs = 30;

/// Shot-level alarm score. Disruptive shots: max of the trace over
/// t <= t_disrupt - 30. Non-disruptive shots: max over the whole trace.
/// Returns nullopt (and logs a warning) for a disruptive shot with
/// t_disrupt < 30, which has no legal alarm window.
std::optional<double> shot_score(std::span<const double> trace, const data::Shot& shot);

struct ScoredShot {
  double score = 0.0;
  bool positive = false;
};

struct RocPoint {
  double threshold;  // alarm iff score > threshold; -inf for the final point
  double fpr;
  double tpr;
};

struct RocResult {
  std::vector<RocPoint> curve;  // from (0,0) to (1,1)
  double auc = 0.0;
};

/// Sweeps the threshold over the distinct scores, highest first, then -inf.
/// AUC by the trapezoid rule. Throws DataError when either class is absent
/// and NumericFault on a NaN score.
RocResult roc_auc(const std::vector<ScoredShot>& scores);

/// CSV with header threshold,fpr,tpr.
void write_roc_csv(const std::string& path, const RocResult& roc);

}  // namespace halfsync::eval
