#pragma once

#include <map>

#include <json.hpp>

#include "pillardet/scene.hpp"

namespace pillardet {

struct PredBox {
  std::array<double, 9> box{};  // x y z w l h yaw vx vy, current-frame ego coords
  std::size_t class_id = 0;
  double score = 0.0;
  std::size_t query = 0;  // tiebreaker for equal scores
};

struct MatchResult {
  std::vector<bool> tp;  // one flag per prediction, in input order
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred index, gt index)
};

// Greedy matching in score order: each prediction takes the nearest unmatched
// same-class ground truth within the 2D center-distance threshold.
MatchResult greedy_match(const std::vector<PredBox>& preds_sorted, const GroundTruthFrame& gt,
                         double threshold_m);

// Step integration of the precision-recall curve: every true positive adds
// precision-at-that-rank / num_gt. Zero when num_gt is 0.
double average_precision(const std::vector<bool>& labels, std::size_t num_gt);

struct TpErrors {
  double ate = 0.0;  // meters
  double ase = 0.0;  // 1 - aligned volume IoU
  double aoe = 0.0;  // radians in [0, pi]
  double ave = 0.0;  // m/s
};

TpErrors tp_errors(const std::vector<std::pair<PredBox, GroundTruthBox>>& matches);

// desk-NDS: (5 * mAP + sum over the 4 TP metrics of (1 - min(1, mTP))) / 9.
// The attribute error of the reference metric is excluded (no attribute
// head), hence the divisor 9.
double nds(double map, const TpErrors& errors);

struct ClassMetrics {
  std::size_t num_gt = 0;
  double ap = 0.0;  // mean over the distance thresholds
  TpErrors errors;
  bool has_matches = false;
};

struct MetricsReport {
  double mAP = 0.0;
  double mATE = 1.0, mASE = 1.0, mAOE = 1.0, mAVE = 1.0;
  double desk_nds = 0.0;
  std::map<std::size_t, ClassMetrics> per_class;
};

// mAP averages over the gt classes and thresholds {0.5, 1, 2, 4} m; TP errors
// are computed at the 2 m threshold. Classes with no matches score 1.0 on
// every TP error.
MetricsReport evaluate(std::vector<PredBox> preds, const GroundTruthFrame& gt);

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace pillardet
