#include "detkit/nms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace detkit {

std::vector<std::size_t> nms_keep(std::span<const Box> boxes,
                                  std::span<const double> scores,
                                  double lambda_nms) {
  if (boxes.size() != scores.size()) {
    throw std::invalid_argument("nms_keep: boxes/scores size mismatch");
  }
  const std::size_t n = boxes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<char> discarded(n, 0);
  // Walking in descending score order lets the inner scan stop as soon as
  // scores are no longer strictly greater.
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t i = order[oi];
    for (std::size_t oj = 0; oj < oi; ++oj) {
      const std::size_t j = order[oj];
      if (scores[j] <= scores[i]) continue;  // tie: strict inequality keeps both
      if (iou(boxes[i], boxes[j]) > lambda_nms) {
        discarded[i] = 1;
        break;
      }
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (!discarded[i]) kept.push_back(i);
  }
  return kept;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, int class_id,
                           const NmsConfig& cfg) {
  std::vector<Box> boxes;
  std::vector<double> scores;
  boxes.reserve(dets.size());
  scores.reserve(dets.size());
  for (const Detection& d : dets) {
    boxes.push_back(d.box);
    scores.push_back(score(d, class_id, cfg.scoring));
  }
  std::vector<Detection> out;
  for (std::size_t i : nms_keep(boxes, scores, cfg.lambda_nms)) {
    out.push_back(dets[i]);
  }
  return out;
}

std::vector<SoftNmsEntry> soft_nms_scores(std::span<const Box> boxes,
                                          std::span<const double> scores,
                                          const SoftNmsParams& params) {
  if (boxes.size() != scores.size()) {
    throw std::invalid_argument("soft_nms: boxes/scores size mismatch");
  }
  if (!(params.sigma > 0.0)) {
    throw std::invalid_argument("soft_nms: sigma must be > 0");
  }
  const std::size_t n = boxes.size();
  std::vector<double> current(scores.begin(), scores.end());
  std::vector<char> processed(n, 0);
  std::vector<SoftNmsEntry> out;

  for (std::size_t step = 0; step < n; ++step) {
    // Highest remaining score; earlier input index wins ties.
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!processed[i] && (best == n || current[i] > current[best])) best = i;
    }
    if (best == n) break;
    processed[best] = 1;
    if (current[best] < params.score_floor) continue;
    out.push_back({best, current[best]});
    for (std::size_t i = 0; i < n; ++i) {
      if (processed[i]) continue;
      const double ov = iou(boxes[i], boxes[best]);
      if (ov > 0.0) {
        current[i] *= std::exp(-(ov * ov) / params.sigma);
      }
    }
  }
  return out;
}

std::vector<SoftNmsEntry> soft_nms(const std::vector<Detection>& dets, int class_id,
                                   const NmsConfig& cfg) {
  const SoftNmsParams params = cfg.soft.value_or(SoftNmsParams{});
  std::vector<Box> boxes;
  std::vector<double> scores;
  boxes.reserve(dets.size());
  scores.reserve(dets.size());
  for (const Detection& d : dets) {
    boxes.push_back(d.box);
    scores.push_back(score(d, class_id, cfg.scoring));
  }
  return soft_nms_scores(boxes, scores, params);
}

}  // namespace detkit
