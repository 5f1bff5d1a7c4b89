#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "detkit/box.hpp"
#include "detkit/fitness.hpp"

namespace detkit {

struct SoftNmsParams {
  double sigma = 0.5;
  double score_floor = 0.001;
};

struct NmsConfig {
  double lambda_nms = 0.5;
  FitnessParams scoring;
  std::optional<SoftNmsParams> soft;
  bool per_class = true;
};

/// Hard suppression on pre-computed scores. A box is discarded iff some
/// strictly higher-scored box overlaps it with iou > lambda_nms; the
/// comparison runs against every box, kept or not. Returns the kept
/// indices in input order.
std::vector<std::size_t> nms_keep(std::span<const Box> boxes,
                                  std::span<const double> scores,
                                  double lambda_nms);

/// Hard NMS over detections for one class. Output preserves input order
/// and is a subset of the input.
std::vector<Detection> nms(const std::vector<Detection>& dets, int class_id,
                           const NmsConfig& cfg);

struct SoftNmsEntry {
  std::size_t index;  // position in the input list
  double score;       // decayed score
};

/// Gaussian Soft-NMS: greedily select the highest remaining score and decay
/// every other unprocessed score by exp(-iou^2 / sigma). Entries whose
/// decayed score falls below score_floor are dropped. Results are returned
/// in selection (descending decayed score) order.
std::vector<SoftNmsEntry> soft_nms(const std::vector<Detection>& dets, int class_id,
                                   const NmsConfig& cfg);

/// Same as above on pre-computed scores and bare boxes.
std::vector<SoftNmsEntry> soft_nms_scores(std::span<const Box> boxes,
                                          std::span<const double> scores,
                                          const SoftNmsParams& params);

}  // namespace detkit
