#include "pillardet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pillardet {

namespace {

constexpr double kApThresholds[4] = {0.5, 1.0, 2.0, 4.0};
constexpr double kTpThreshold = 2.0;

double center_distance(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

void sort_by_score(std::vector<PredBox>& preds) {
  std::sort(preds.begin(), preds.end(), [](const PredBox& a, const PredBox& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.query < b.query;
  });
}

}  // namespace

MatchResult greedy_match(const std::vector<PredBox>& preds_sorted, const GroundTruthFrame& gt,
                         double threshold_m) {
  MatchResult out;
  out.tp.assign(preds_sorted.size(), false);
  std::vector<bool> taken(gt.boxes.size(), false);
  for (std::size_t i = 0; i < preds_sorted.size(); ++i) {
    const PredBox& pred = preds_sorted[i];
    double best = threshold_m;
    int best_g = -1;
    for (std::size_t g = 0; g < gt.boxes.size(); ++g) {
      if (taken[g] || gt.boxes[g].class_id != static_cast<int>(pred.class_id)) continue;
      const double d = center_distance(pred.box, gt.boxes[g].box);
      if (d <= best && (best_g < 0 || d < best)) {
        best = d;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      taken[best_g] = true;
      out.tp[i] = true;
      out.pairs.emplace_back(i, static_cast<std::size_t>(best_g));
    }
  }
  return out;
}

double average_precision(const std::vector<bool>& labels, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    ap += precision / static_cast<double>(num_gt);
  }
  return ap;
}

TpErrors tp_errors(const std::vector<std::pair<PredBox, GroundTruthBox>>& matches) {
  TpErrors e;
  if (matches.empty()) return e;
  for (const auto& [pred, gt] : matches) {
    e.ate += center_distance(pred.box, gt.box);
    double iou = 1.0;
    for (int d = 3; d < 6; ++d)
      iou *= std::min(pred.box[d], gt.box[d]) / std::max(pred.box[d], gt.box[d]);
    e.ase += 1.0 - iou;
    e.aoe += std::abs(wrap_angle(pred.box[6] - gt.box[6]));
    const double dvx = pred.box[7] - gt.box[7], dvy = pred.box[8] - gt.box[8];
    e.ave += std::sqrt(dvx * dvx + dvy * dvy);
  }
  const double inv = 1.0 / static_cast<double>(matches.size());
  e.ate *= inv;
  e.ase *= inv;
  e.aoe *= inv;
  e.ave *= inv;
  return e;
}

double nds(double map, const TpErrors& errors) {
  double sum = 5.0 * map;
  for (double e : {errors.ate, errors.ase, errors.aoe, errors.ave})
    sum += 1.0 - std::min(1.0, e);
  return sum / 9.0;
}

MetricsReport evaluate(std::vector<PredBox> preds, const GroundTruthFrame& gt) {
  sort_by_score(preds);

  std::set<std::size_t> classes;
  for (const GroundTruthBox& g : gt.boxes) classes.insert(static_cast<std::size_t>(g.class_id));

  MetricsReport report;
  if (classes.empty()) {
    report.desk_nds = nds(0.0, {1.0, 1.0, 1.0, 1.0});
    return report;
  }

  double ap_sum = 0.0;
  double ate_sum = 0.0, ase_sum = 0.0, aoe_sum = 0.0, ave_sum = 0.0;
  for (std::size_t cls : classes) {
    ClassMetrics cm;
    for (const GroundTruthBox& g : gt.boxes)
      if (static_cast<std::size_t>(g.class_id) == cls) ++cm.num_gt;

    for (double thr : kApThresholds) {
      const MatchResult match = greedy_match(preds, gt, thr);
      std::vector<bool> labels;
      for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].class_id == cls) labels.push_back(match.tp[i]);
      cm.ap += average_precision(labels, cm.num_gt) / 4.0;
    }

    const MatchResult tp_match = greedy_match(preds, gt, kTpThreshold);
    std::vector<std::pair<PredBox, GroundTruthBox>> pairs;
    for (const auto& [pi, gi] : tp_match.pairs)
      if (preds[pi].class_id == cls) pairs.emplace_back(preds[pi], gt.boxes[gi]);
    cm.has_matches = !pairs.empty();
    cm.errors = cm.has_matches ? tp_errors(pairs) : TpErrors{1.0, 1.0, 1.0, 1.0};

    ap_sum += cm.ap;
    ate_sum += cm.errors.ate;
    ase_sum += cm.errors.ase;
    aoe_sum += cm.errors.aoe;
    ave_sum += cm.errors.ave;
    report.per_class[cls] = cm;
  }

  const double inv = 1.0 / static_cast<double>(classes.size());
  report.mAP = ap_sum * inv;
  report.mATE = ate_sum * inv;
  report.mASE = ase_sum * inv;
  report.mAOE = aoe_sum * inv;
  report.mAVE = ave_sum * inv;
  report.desk_nds = nds(report.mAP, {report.mATE, report.mASE, report.mAOE, report.mAVE});
  return report;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [cls, cm] : report.per_class) {
    per_class[std::to_string(cls)] = {{"num_gt", cm.num_gt},   {"AP", cm.ap},
                                      {"ATE", cm.errors.ate},  {"ASE", cm.errors.ase},
                                      {"AOE", cm.errors.aoe},  {"AVE", cm.errors.ave},
                                      {"has_matches", cm.has_matches}};
  }
  return nlohmann::json{{"mAP", report.mAP},           {"mATE", report.mATE},
                        {"mASE", report.mASE},         {"mAOE", report.mAOE},
                        {"mAVE", report.mAVE},         {"desk_NDS", report.desk_nds},
                        {"per_class", per_class}};
}

}  // namespace pillardet
