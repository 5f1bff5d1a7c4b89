#pragma once

#include <span>
#include <vector>

#include "detkit/box.hpp"

namespace detkit {

enum class CornerType { TopLeft = 0, TopRight = 1, BottomLeft = 2, BottomRight = 3 };

/// Per-type corner probability grid Pr(s | k, y, x) with the local-max
/// window radius m and detection threshold lambda_c.
struct CornerGrid {
  int height = 0;
  int width = 0;
  double lambda_c = 0.01;
  int m = 1;
  std::vector<double> probs;  // 4 * height * width, k-major then row-major

  CornerGrid(int h, int w, double lambda_c_ = 0.01, int m_ = 1);

  double at(int k, int y, int x) const { return probs[(k * height + y) * width + x]; }
  double& at(int k, int y, int x) { return probs[(k * height + y) * width + x]; }
};

struct Corner {
  int k = 0;
  int y = 0;
  int x = 0;
  double prob = 0.0;
};

/// Cells above lambda_c that dominate their (2m+1)x(2m+1) window (same
/// corner type). Windows truncate at grid borders. On plateaus of equal
/// probability only the lexicographically smallest (y, x) survives.
std::vector<Corner> corner_local_max(const CornerGrid& grid);

struct ScoredBox {
  Box box;
  double score = 0.0;
};

/// Pair top-left and bottom-right corners into candidate boxes with
/// positive extent, scored by the product of corner probabilities, keeping
/// the best max_rois (coordinate order breaks score ties).
std::vector<ScoredBox> corners_to_rois(std::span<const Corner> top_left,
                                       std::span<const Corner> bottom_right,
                                       int max_rois);

/// Hard-NMS clustering of candidate RoIs at the given IoU threshold.
std::vector<Box> roi_nms_cluster(std::span<const ScoredBox> candidates, double threshold);

}  // namespace detkit
