#pragma once

#include <cstdint>
#include <vector>

#include "halfsync/data/shots.hpp"
#include "halfsync/eval/roc.hpp"
#include "halfsync/model/params.hpp"
#include "halfsync/numerics/precision.hpp"

namespace halfsync::eval {

/// Per-timestep disruptivity for a whole shot. The shot is cut like the
/// training data: seq_len windows aligned to its end, state reset at each
/// window; the leading remainder runs as one shorter sequence.
std::vector<double> disruptivity_trace(const model::Parameters& params, const data::Shot& shot,
                                       std::size_t channels, const numerics::PrecisionPolicy& policy,
                                       std::uint32_t seq_len);

struct ShotEvaluation {
  std::vector<ScoredShot> scores;
  std::vector<std::uint64_t> shot_ids;  // parallel to scores
  std::size_t excluded = 0;             // disruptive shots without an alarm window
  RocResult roc;
};

/// Scores every shot and computes the shot-level ROC.
ShotEvaluation evaluate_shots(const model::Parameters& params, const std::vector<data::Shot>& shots,
                              std::size_t channels, const numerics::PrecisionPolicy& policy,
                              std::uint32_t seq_len);

}  // namespace halfsync::eval
