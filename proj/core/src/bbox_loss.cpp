#include "detkit/bbox_loss.hpp"

#include <cmath>
#include <stdexcept>

namespace detkit {

double huber(double z, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("huber: tau must be > 0");
  }
  const double a = std::abs(z);
  if (a < tau) return 0.5 * z * z;
  return tau * a - 0.5 * tau * tau;
}

double huber_deriv(double z, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("huber_deriv: tau must be > 0");
  }
  if (std::abs(z) < tau) return z;
  return z > 0.0 ? tau : -tau;
}

RegressionTarget::RegressionTarget(Box roi_, Box target_, Box estimate_, bool allow_low_overlap)
    : roi(roi_), target(target_), estimate(estimate_) {
  if (!allow_low_overlap && iou(roi, target) < 0.5) {
    throw std::invalid_argument("RegressionTarget: iou(roi, target) < 0.5");
  }
}

namespace {

LossValue finish(LossValue v) {
  v.total = v.components[0] + v.components[1] + v.components[2] + v.components[3];
  return v;
}

// Positional bounded component: cost and d cost / d delta.
void bounded_position(double dx, double w_t, double& cost, double& grad) {
  const double d = std::abs(dx);
  const double z = 1.0 - iou_bound_x(dx, w_t);
  cost = 2.0 * huber(z, 1.0);
  if (d == 0.0 || d >= 0.5 * w_t) {
    grad = 0.0;  // minimum and saturated plateau
    return;
  }
  const double dz_dd = 4.0 * w_t / ((w_t + 2.0 * d) * (w_t + 2.0 * d));
  grad = 2.0 * huber_deriv(z, 1.0) * dz_dd * (dx > 0.0 ? 1.0 : -1.0);
}

// Scale bounded component: cost and d cost / d w.
void bounded_scale(double w, double w_t, double& cost, double& grad) {
  const double z = 1.0 - iou_bound_w(w, w_t);
  cost = 2.0 * huber(z, 1.0);
  double dz_dw;
  if (w < w_t) {
    dz_dw = -1.0 / w_t;
  } else if (w > w_t) {
    dz_dw = w_t / (w * w);
  } else {
    dz_dw = 0.0;
  }
  grad = 2.0 * huber_deriv(z, 1.0) * dz_dw;
}

}  // namespace

LossValue rcnn_cost(const RegressionTarget& t) {
  LossValue v;
  const double zx = (t.estimate.cx() - t.target.cx()) / t.roi.w();
  const double zy = (t.estimate.cy() - t.target.cy()) / t.roi.h();
  const double zw = std::log(t.estimate.w() / t.target.w());
  const double zh = std::log(t.estimate.h() / t.target.h());
  v.components = {huber(zx, 1.0), huber(zy, 1.0), huber(zw, 1.0), huber(zh, 1.0)};
  v.gradient = {huber_deriv(zx, 1.0) / t.roi.w(),
                huber_deriv(zy, 1.0) / t.roi.h(),
                huber_deriv(zw, 1.0) / t.estimate.w(),
                huber_deriv(zh, 1.0) / t.estimate.h()};
  return finish(v);
}

LossValue bounded_iou_cost(const RegressionTarget& t) {
  LossValue v;
  bounded_position(t.estimate.cx() - t.target.cx(), t.target.w(), v.components[0], v.gradient[0]);
  bounded_position(t.estimate.cy() - t.target.cy(), t.target.h(), v.components[1], v.gradient[1]);
  bounded_scale(t.estimate.w(), t.target.w(), v.components[2], v.gradient[2]);
  bounded_scale(t.estimate.h(), t.target.h(), v.components[3], v.gradient[3]);
  return finish(v);
}

double rcnn_cost_alt_position(const RegressionTarget& t) {
  const double zx = (t.estimate.cx() - t.target.cx()) / t.roi.w();
  return 15.0 * huber(zx, 0.16);
}

LossValue rcnn_cost_alt(const RegressionTarget& t) {
  LossValue v;
  const double zx = (t.estimate.cx() - t.target.cx()) / t.roi.w();
  const double zy = (t.estimate.cy() - t.target.cy()) / t.roi.h();
  v.components[0] = 15.0 * huber(zx, 0.16);
  v.components[1] = 15.0 * huber(zy, 0.16);
  v.gradient[0] = 15.0 * huber_deriv(zx, 0.16) / t.roi.w();
  v.gradient[1] = 15.0 * huber_deriv(zy, 0.16) / t.roi.h();
  return finish(v);
}

GradCheckResult gradient_check(const LossFn& loss, const RegressionTarget& t, double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-3)) {
    throw std::invalid_argument("gradient_check: eps out of [1e-8, 1e-3]");
  }
  const LossValue at = loss(t);

  auto fd = [&](int dim, double step) {
    auto nudge = [&](double delta) {
      double cx = t.estimate.cx(), cy = t.estimate.cy();
      double w = t.estimate.w(), h = t.estimate.h();
      switch (dim) {
        case 0: cx += delta; break;
        case 1: cy += delta; break;
        case 2: w += delta; break;
        default: h += delta; break;
      }
      RegressionTarget shifted(t.roi, t.target, Box(cx, cy, w, h), true);
      return loss(shifted).total;
    };
    return (nudge(step) - nudge(-step)) / (2.0 * step);
  };

  GradCheckResult r;
  for (int dim = 0; dim < 4; ++dim) {
    // Scale dimension steps by the coordinate magnitude so w, h nudges stay
    // proportionate for large boxes.
    const double scale_ref = (dim == 0 || dim == 2) ? t.estimate.w() : t.estimate.h();
    const double step = eps * std::max(1.0, scale_ref);
    const double g1 = fd(dim, step);
    const double g2 = fd(dim, 0.5 * step);
    const double scale = std::max({std::abs(at.gradient[dim]), std::abs(g2), 1e-6});
    if (std::abs(g1 - g2) / scale > 1e-3) {
      r.near_nonsmooth = true;
    }
    const double err = std::abs(g2 - at.gradient[dim]) / scale;
    r.max_rel_error = std::max(r.max_rel_error, err);
  }
  return r;
}

Box descend(const LossFn& loss, const Box& roi, const Box& target, const Box& start,
            int steps, double step_size) {
  double u = start.cx() / target.w();
  double v = start.cy() / target.h();
  double p = std::log(start.w() / target.w());
  double q = std::log(start.h() / target.h());
  for (int i = 0; i < steps; ++i) {
    const Box est(u * target.w(), v * target.h(),
                  std::exp(p) * target.w(), std::exp(q) * target.h());
    const LossValue lv = loss(RegressionTarget(roi, target, est, true));
    u -= step_size * lv.gradient[0] * target.w();
    v -= step_size * lv.gradient[1] * target.h();
    p -= step_size * lv.gradient[2] * est.w();
    q -= step_size * lv.gradient[3] * est.h();
  }
  return Box(u * target.w(), v * target.h(),
             std::exp(p) * target.w(), std::exp(q) * target.h());
}

}  // namespace detkit
