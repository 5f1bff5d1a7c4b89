#include "detkit/roi_cluster.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "detkit/nms.hpp"

namespace detkit {

CornerGrid::CornerGrid(int h, int w, double lambda_c_, int m_)
    : height(h), width(w), lambda_c(lambda_c_), m(m_),
      probs(static_cast<std::size_t>(4) * h * w, 0.0) {
  if (h < 1 || w < 1) {
    throw std::invalid_argument("CornerGrid: dimensions must be >= 1");
  }
  if (m < 1) {
    throw std::invalid_argument("CornerGrid: window radius m must be >= 1");
  }
}

std::vector<Corner> corner_local_max(const CornerGrid& grid) {
  std::vector<Corner> out;
  for (int k = 0; k < 4; ++k) {
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        const double p = grid.at(k, y, x);
        if (!(p > grid.lambda_c)) continue;
        const int y0 = std::max(0, y - grid.m);
        const int y1 = std::min(grid.height - 1, y + grid.m);
        const int x0 = std::max(0, x - grid.m);
        const int x1 = std::min(grid.width - 1, x + grid.m);
        bool keep = true;
        for (int yy = y0; keep && yy <= y1; ++yy) {
          for (int xx = x0; xx <= x1; ++xx) {
            const double q = grid.at(k, yy, xx);
            if (q > p || (q == p && std::make_pair(yy, xx) < std::make_pair(y, x))) {
              keep = false;
              break;
            }
          }
        }
        if (keep) out.push_back({k, y, x, p});
      }
    }
  }
  return out;
}

std::vector<ScoredBox> corners_to_rois(std::span<const Corner> top_left,
                                       std::span<const Corner> bottom_right,
                                       int max_rois) {
  if (max_rois < 1) {
    throw std::invalid_argument("corners_to_rois: max_rois must be >= 1");
  }
  struct Candidate {
    double score;
    int y0, x0, y1, x1;
  };
  std::vector<Candidate> cands;
  for (const Corner& tl : top_left) {
    for (const Corner& br : bottom_right) {
      if (br.x <= tl.x || br.y <= tl.y) continue;  // needs positive extent
      cands.push_back({tl.prob * br.prob, tl.y, tl.x, br.y, br.x});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.y0, a.x0, a.y1, a.x1) < std::tie(b.y0, b.x0, b.y1, b.x1);
  });
  if (static_cast<int>(cands.size()) > max_rois) {
    cands.resize(max_rois);
  }
  std::vector<ScoredBox> out;
  out.reserve(cands.size());
  for (const Candidate& c : cands) {
    out.push_back({Box::from_corners(c.x0, c.y0, c.x1, c.y1), c.score});
  }
  return out;
}

std::vector<Box> roi_nms_cluster(std::span<const ScoredBox> candidates, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("roi_nms_cluster: threshold must be in (0, 1]");
  }
  std::vector<Box> boxes;
  std::vector<double> scores;
  boxes.reserve(candidates.size());
  scores.reserve(candidates.size());
  for (const ScoredBox& c : candidates) {
    boxes.push_back(c.box);
    scores.push_back(c.score);
  }
  std::vector<Box> out;
  for (std::size_t i : nms_keep(boxes, scores, threshold)) {
    out.push_back(boxes[i]);
  }
  return out;
}

}  // namespace detkit
