#include "halfsync/eval/roc.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "halfsync/errors.hpp"
#include "halfsync/util/log.hpp"

namespace halfsync::eval {

std::optional<double> shot_score(std::span<const double> trace, const data::Shot& shot) {
  if (trace.size() != shot.length || trace.empty()) {
    throw DimensionError("trace of " + std::to_string(trace.size()) + " steps for shot " + std::to_string(shot.id) +
                         " of length " + std::to_string(shot.length));
  }
  std::size_t end = trace.size();
  if (shot.t_disrupt) {
    if (*shot.t_disrupt < kAlarmCutoffMs) {
      spdlog::warn("shot {} disrupts at {} ms, before the alarm cutoff; excluded", shot.id, *shot.t_disrupt);
      return std::nullopt;
    }
    end = *shot.t_disrupt - kAlarmCutoffMs + 1;
  }
  return *std::max_element(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(end));
}

RocResult roc_auc(const std::vector<ScoredShot>& scores) {
  std::size_t pos = 0;
  for (const auto& s : scores) {
    if (std::isnan(s.score)) throw NumericFault("NaN shot score in ROC input");
    pos += s.positive ? 1 : 0;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    throw DataError("AUC is undefined without both classes (" + std::to_string(pos) + " positive, " +
                    std::to_string(neg) + " negative)");
  }
  std::vector<ScoredShot> sorted = scores;
  std::sort(sorted.begin(), sorted.end(), [](const ScoredShot& a, const ScoredShot& b) { return a.score > b.score; });

  RocResult r;
  std::size_t tp = 0, fp = 0;
  auto point = [&](double threshold) {
    r.curve.push_back(RocPoint{threshold, static_cast<double>(fp) / static_cast<double>(neg),
                               static_cast<double>(tp) / static_cast<double>(pos)});
  };
  // At each distinct score as threshold, exactly the strictly higher scores alarm.
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double threshold = sorted[i].score;
    point(threshold);
    while (i < sorted.size() && sorted[i].score == threshold) {
      (sorted[i].positive ? tp : fp) += 1;
      ++i;
    }
  }
  point(-std::numeric_limits<double>::infinity());

  for (std::size_t k = 1; k < r.curve.size(); ++k) {
    r.auc += (r.curve[k].fpr - r.curve[k - 1].fpr) * (r.curve[k].tpr + r.curve[k - 1].tpr) / 2.0;
  }
  return r;
}

void write_roc_csv(const std::string& path, const RocResult& roc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc.curve) out << fmt::format("{:.17g},{:.17g},{:.17g}\n", p.threshold, p.fpr, p.tpr);
}

}  // namespace halfsync::eval
