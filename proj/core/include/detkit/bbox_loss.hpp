#pragma once

#include <array>
#include <functional>

#include "detkit/box.hpp"

namespace detkit {

/// Huber loss: z^2/2 below tau, linear above, C1 at the junction.
double huber(double z, double tau);
double huber_deriv(double z, double tau);

/// A regression instance: sampling RoI, groundtruth target and the current
/// estimate. Regression is only meaningful when the RoI overlaps the target
/// with IoU >= 0.5; construction checks this unless allow_low_overlap.
struct RegressionTarget {
  Box roi;
  Box target;
  Box estimate;

  RegressionTarget(Box roi_, Box target_, Box estimate_, bool allow_low_overlap = false);
};

/// Loss evaluation with per-coordinate components (x, y, w, h) and the
/// analytic gradient with respect to the estimate's (cx, cy, w, h).
struct LossValue {
  double total = 0.0;
  std::array<double, 4> components{};  // x, y, w, h
  std::array<double, 4> gradient{};    // d total / d (cx, cy, w, h)
};

using LossFn = std::function<LossValue(const RegressionTarget&)>;

/// R-CNN regression cost: Huber of (dx / w_roi) for position and
/// Huber of ln(w / w_t) for scale, tau = 1.
LossValue rcnn_cost(const RegressionTarget& t);

/// Bounded IoU cost: 2 * Huber(1 - bound) per coordinate, tau = 1, using
/// the closed-form per-coordinate IoU bounds. The positional component
/// saturates at 1 as |dx| grows instead of diverging.
LossValue bounded_iou_cost(const RegressionTarget& t);

/// Alternative positional cost 15 * Huber_{0.16}(dx / w_roi); shaped to
/// track the bounded positional cost over the operating range.
double rcnn_cost_alt_position(const RegressionTarget& t);

/// LossValue form of the alternative cost (x and y components only),
/// for gradient checking and curve dumps.
LossValue rcnn_cost_alt(const RegressionTarget& t);

struct GradCheckResult {
  double max_rel_error = 0.0;
  /// Set when the two-step finite differences disagree, which indicates the
  /// evaluation point sits at or near a non-smooth locus; the comparison is
  /// then unreliable and reported rather than silently trusted.
  bool near_nonsmooth = false;
};

/// Central finite differences against the analytic gradient, component-wise
/// max relative error.
GradCheckResult gradient_check(const LossFn& loss, const RegressionTarget& t, double eps);

/// Fixed-step gradient descent on the loss in target-normalized coordinates
/// (cx/w_t, cy/h_t, ln w/w_t, ln h/h_t). Returns the final estimate.
Box descend(const LossFn& loss, const Box& roi, const Box& target, const Box& start,
            int steps = 500, double step_size = 0.05);

}  // namespace detkit
