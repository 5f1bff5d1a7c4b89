#include "detkit/box.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace detkit {

Box::Box(double cx, double cy, double w, double h) : cx_(cx), cy_(cy), w_(w), h_(h) {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("Box: width and height must be > 0");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h)) {
    throw std::invalid_argument("Box: coordinates must be finite");
  }
}

Box Box::from_corners(double x_min, double y_min, double x_max, double y_max) {
  return Box(0.5 * (x_min + x_max), 0.5 * (y_min + y_max), x_max - x_min, y_max - y_min);
}

double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double iy = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  // Rounding in the corner reconstruction can push the ratio an ulp past 1.
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_bound_x(double dx, double w_t) {
  if (!(w_t > 0.0)) {
    throw std::invalid_argument("iou_bound_x: w_t must be > 0");
  }
  const double d = std::abs(dx);
  return std::max(0.0, (w_t - 2.0 * d) / (w_t + 2.0 * d));
}

double iou_bound_w(double w, double w_t) {
  if (!(w > 0.0) || !(w_t > 0.0)) {
    throw std::invalid_argument("iou_bound_w: widths must be > 0");
  }
  return std::min(w / w_t, w_t / w);
}

double max_iou_over(std::span<const Box> boxes, const Box& b) {
  double best = 0.0;
  for (const Box& gt : boxes) {
    best = std::max(best, iou(gt, b));
  }
  return best;
}

}  // namespace detkit
