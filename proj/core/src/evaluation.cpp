#include "detkit/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace detkit {

namespace {

std::vector<std::size_t> score_order(std::span<const EvalDetection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

}  // namespace

std::vector<char> match(std::span<const EvalDetection> dets,
                        std::span<const EvalGroundTruth> gts, double omega) {
  if (!(omega > 0.0 && omega <= 1.0)) {
    throw std::invalid_argument("match: omega must be in (0, 1]");
  }
  std::vector<char> tp(dets.size(), 0);
  std::vector<char> consumed(gts.size(), 0);
  std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> gt_index;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_index[{gts[g].image, gts[g].class_id}].push_back(g);
  }
  for (std::size_t i : score_order(dets)) {
    const EvalDetection& d = dets[i];
    double best_iou = -1.0;
    std::size_t best_gt = gts.size();
    auto it = gt_index.find({d.image, d.class_id});
    if (it == gt_index.end()) continue;
    for (std::size_t g : it->second) {
      if (consumed[g]) continue;
      const double ov = iou(d.box, gts[g].box);
      if (ov > best_iou) {
        best_iou = ov;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best_iou >= omega) {
      tp[i] = 1;
      consumed[best_gt] = 1;
    }
  }
  return tp;
}

double recall(std::span<const EvalDetection> dets,
              std::span<const EvalGroundTruth> gts, double omega) {
  if (gts.empty()) return 1.0;
  const std::vector<char> tp = match(dets, gts, omega);
  const auto n_tp = std::count(tp.begin(), tp.end(), char{1});
  return static_cast<double>(n_tp) / static_cast<double>(gts.size());
}

double average_precision(std::span<const EvalDetection> dets,
                         std::span<const EvalGroundTruth> gts, int class_id,
                         double omega, ApInterp interp) {
  std::vector<EvalDetection> cls_dets;
  for (const EvalDetection& d : dets) {
    if (d.class_id == class_id) cls_dets.push_back(d);
  }
  std::vector<EvalGroundTruth> cls_gts;
  for (const EvalGroundTruth& g : gts) {
    if (g.class_id == class_id) cls_gts.push_back(g);
  }
  if (cls_gts.empty()) {
    return cls_dets.empty() ? 1.0 : 0.0;
  }
  if (cls_dets.empty()) return 0.0;

  const std::vector<char> tp = match(cls_dets, cls_gts, omega);
  const std::vector<std::size_t> order = score_order(cls_dets);
  std::vector<double> precisions(order.size());
  std::vector<double> recalls(order.size());
  std::size_t tp_cum = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (tp[order[rank]]) ++tp_cum;
    precisions[rank] = static_cast<double>(tp_cum) / static_cast<double>(rank + 1);
    recalls[rank] = static_cast<double>(tp_cum) / static_cast<double>(cls_gts.size());
  }

  const int points = (interp == ApInterp::Coco101) ? 101 : 11;
  const double step = (interp == ApInterp::Coco101) ? 0.01 : 0.1;
  double sum = 0.0;
  // Interpolated precision: the best precision at any recall >= r.
  for (int k = 0; k < points; ++k) {
    const double r = k * step;
    double best = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (recalls[rank] + 1e-12 >= r) best = std::max(best, precisions[rank]);
    }
    sum += best;
  }
  return sum / points;
}

AreaBucket area_bucket(const Box& b) {
  const double a = b.area();
  if (a < 32.0 * 32.0) return AreaBucket::Small;
  if (a <= 96.0 * 96.0) return AreaBucket::Medium;
  return AreaBucket::Large;
}

namespace {

double mean_ap(std::span<const EvalDetection> dets, std::span<const EvalGroundTruth> gts,
               double omega, ApInterp interp,
               std::map<std::pair<int, double>, double>* ap_out) {
  std::set<int> classes;
  for (const auto& g : gts) classes.insert(g.class_id);
  for (const auto& d : dets) classes.insert(d.class_id);
  if (classes.empty()) return dets.empty() ? 1.0 : 0.0;
  double sum = 0.0;
  for (int c : classes) {
    const double ap = average_precision(dets, gts, c, omega, interp);
    if (ap_out) (*ap_out)[{c, omega}] = ap;
    sum += ap;
  }
  return sum / static_cast<double>(classes.size());
}

}  // namespace

EvalReport map_report(std::span<const EvalDetection> dets,
                      std::span<const EvalGroundTruth> gts,
                      const EvalOptions& options) {
  EvalReport report;
  report.detection_count = dets.size();

  for (double omega : options.omega_grid) {
    report.recall_at[omega] = recall(dets, gts, omega);
    report.map_at[omega] = mean_ap(dets, gts, omega, options.interp, &report.ap_at);
  }
  double sum = 0.0;
  for (const auto& [omega, v] : report.map_at) sum += v;
  report.map_range = report.map_at.empty() ? 0.0 : sum / report.map_at.size();

  for (int b = 0; b < 3; ++b) {
    std::vector<EvalDetection> bd;
    std::vector<EvalGroundTruth> bg;
    for (const auto& d : dets) {
      if (static_cast<int>(area_bucket(d.box)) == b) bd.push_back(d);
    }
    for (const auto& g : gts) {
      if (static_cast<int>(area_bucket(g.box)) == b) bg.push_back(g);
    }
    double bucket_sum = 0.0;
    for (double omega : options.omega_grid) {
      bucket_sum += mean_ap(bd, bg, omega, options.interp, nullptr);
    }
    report.map_by_area[b] =
        options.omega_grid.empty() ? 0.0 : bucket_sum / options.omega_grid.size();
  }
  return report;
}

}  // namespace detkit
