#include "halfsync/eval/inference.hpp"

#include "halfsync/errors.hpp"
#include "halfsync/model/network.hpp"

namespace halfsync::eval {

namespace {

// Runs `count` consecutive windows of `len` steps starting at `first`.
void run_windows(const model::Parameters& params, const data::Shot& shot, std::size_t channels,
                 const numerics::PrecisionPolicy& policy, std::uint32_t first, std::uint32_t len, std::size_t count,
                 std::vector<double>& trace) {
  if (count == 0 || len == 0) return;
  std::vector<double> feat(count * len * channels);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = first + w * len;
    for (std::size_t k = 0; k < len * channels; ++k) feat[w * len * channels + k] = shot.signals[start * channels + k];
  }
  const numerics::Tensor batch({count, len, channels}, std::move(feat), numerics::Precision::fp32);
  const auto out = model::fprop(params, batch, policy, false, 0).outputs;
  for (std::size_t w = 0; w < count; ++w) {
    for (std::size_t k = 0; k < len; ++k) trace[first + w * len + k] = out[w * len + k];
  }
}

}  // namespace

std::vector<double> disruptivity_trace(const model::Parameters& params, const data::Shot& shot,
                                       std::size_t channels, const numerics::PrecisionPolicy& policy,
                                       std::uint32_t seq_len) {
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  if (shot.signals.size() != static_cast<std::size_t>(shot.length) * channels) {
    throw DimensionError("shot " + std::to_string(shot.id) + " does not hold " + std::to_string(channels) +
                         " channels");
  }
  std::vector<double> trace(shot.length, 0.0);
  const std::uint32_t lead = shot.length % seq_len;
  run_windows(params, shot, channels, policy, 0, lead, 1, trace);
  run_windows(params, shot, channels, policy, lead, seq_len, shot.length / seq_len, trace);
  return trace;
}

ShotEvaluation evaluate_shots(const model::Parameters& params, const std::vector<data::Shot>& shots,
                              std::size_t channels, const numerics::PrecisionPolicy& policy,
                              std::uint32_t seq_len) {
  ShotEvaluation ev;
  for (const auto& shot : shots) {
    const auto trace = disruptivity_trace(params, shot, channels, policy, seq_len);
    const auto score = shot_score(trace, shot);
    if (!score) {
      ++ev.excluded;
      continue;
    }
    ev.scores.push_back(ScoredShot{*score, shot.disruptive()});
    ev.shot_ids.push_back(shot.id);
  }
  ev.roc = roc_auc(ev.scores);
  return ev;
}

}  // namespace halfsync::eval
