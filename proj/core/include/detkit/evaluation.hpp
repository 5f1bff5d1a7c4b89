#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include "detkit/box.hpp"

namespace detkit {

struct GtInstance {
  int class_id = 0;
  Box box;
};

/// Flattened, image-tagged records; matching only pairs entries that share
/// image and class.
struct EvalDetection {
  std::size_t image = 0;
  int class_id = 0;
  double score = 0.0;
  Box box;
};

struct EvalGroundTruth {
  std::size_t image = 0;
  int class_id = 0;
  Box box;
};

enum class ApInterp { Coco101, Voc11 };

struct EvalOptions {
  ApInterp interp = ApInterp::Coco101;
  std::vector<double> omega_grid = {0.50, 0.55, 0.60, 0.65, 0.70,
                                    0.75, 0.80, 0.85, 0.90, 0.95};
};

/// Greedy matcher: detections in descending score order (input order breaks
/// ties) claim their best-IoU unmatched same-class groundtruth; TP iff that
/// IoU >= omega. Returns one flag per detection in input order.
std::vector<char> match(std::span<const EvalDetection> dets,
                        std::span<const EvalGroundTruth> gts, double omega);

/// TP count / groundtruth count; 1.0 when there is nothing to find.
double recall(std::span<const EvalDetection> dets,
              std::span<const EvalGroundTruth> gts, double omega);

/// Interpolated average precision for one class at one matching IoU.
double average_precision(std::span<const EvalDetection> dets,
                         std::span<const EvalGroundTruth> gts, int class_id,
                         double omega, ApInterp interp = ApInterp::Coco101);

/// Area buckets follow the small / medium / large convention with
/// thresholds 32^2 and 96^2.
enum class AreaBucket { Small = 0, Medium = 1, Large = 2 };
AreaBucket area_bucket(const Box& b);

struct EvalReport {
  std::map<double, double> recall_at;
  std::map<std::pair<int, double>, double> ap_at;  // (class, omega) -> AP
  std::map<double, double> map_at;                 // omega -> mAP
  double map_range = 0.0;                          // mean of map_at over the grid
  std::array<double, 3> map_by_area{};             // S, M, L
  std::size_t detection_count = 0;
};

EvalReport map_report(std::span<const EvalDetection> dets,
                      std::span<const EvalGroundTruth> gts,
                      const EvalOptions& options = {});

}  // namespace detkit
