#pragma once

#include <span>

namespace detkit {

/// Axis-aligned rectangle stored in center form (cx, cy, w, h).
/// Width and height must be strictly positive; degenerate boxes are
/// rejected at construction so downstream ratio math never divides by zero.
class Box {
public:
  Box(double cx, double cy, double w, double h);

  static Box from_corners(double x_min, double y_min, double x_max, double y_max);

  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double w() const { return w_; }
  double h() const { return h_; }

  double x_min() const { return cx_ - 0.5 * w_; }
  double x_max() const { return cx_ + 0.5 * w_; }
  double y_min() const { return cy_ - 0.5 * h_; }
  double y_max() const { return cy_ + 0.5 * h_; }

  double area() const { return w_ * h_; }

private:
  double cx_;
  double cy_;
  double w_;
  double h_;
};

/// Intersection over union; symmetric, in [0, 1].
double iou(const Box& a, const Box& b);

/// Position term of the per-coordinate IoU bound used by the bounded box
/// loss: max(0, (w_t - 2|dx|) / (w_t + 2|dx|)). Even in dx, monotone
/// non-increasing in |dx|, reaches 0 at |dx| = w_t / 2.
double iou_bound_x(double dx, double w_t);

/// Scale term of the per-coordinate IoU bound: min(w / w_t, w_t / w).
/// Symmetric under reciprocal swap, maximal (1) at w = w_t.
double iou_bound_w(double w, double w_t);

/// Maximum IoU of `b` against a set of boxes; 0 for an empty set.
double max_iou_over(std::span<const Box> boxes, const Box& b);

}  // namespace detkit
