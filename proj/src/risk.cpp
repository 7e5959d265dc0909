#include "planrisk/risk.hpp"

#include <cmath>

#include "planrisk/errors.hpp"

namespace planrisk {

double ade(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size()) throw ArgumentError("ade: trajectory length mismatch");
  if (pred.empty()) throw ArgumentError("ade: empty trajectory");
  double acc = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) acc += norm(pred[t] - gt[t]);
  return acc / static_cast<double>(pred.size());
}

namespace {

struct RectFrame {
  Vec2 axis_l;  // unit vector along length
  Vec2 axis_w;  // unit vector along width
  double half_l;
  double half_w;
};

RectFrame frame_of(const OrientedRect& r) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  return {{c, s}, {-s, c}, 0.5 * r.length, 0.5 * r.width};
}

// projection radius of a rectangle onto a unit axis
double radius_on(const RectFrame& f, Vec2 axis) {
  return f.half_l * std::abs(dot(f.axis_l, axis)) + f.half_w * std::abs(dot(f.axis_w, axis));
}

}  // namespace

bool rects_intersect(const OrientedRect& a, const OrientedRect& b) {
  const RectFrame fa = frame_of(a);
  const RectFrame fb = frame_of(b);
  const Vec2 d = b.center - a.center;
  const Vec2 axes[4] = {fa.axis_l, fa.axis_w, fb.axis_l, fb.axis_w};
  for (const Vec2& axis : axes) {
    const double gap = std::abs(dot(d, axis)) - (radius_on(fa, axis) + radius_on(fb, axis));
    if (gap > 0.0) return false;  // separating axis found
  }
  return true;
}

std::vector<OrientedRect> ego_footprints(const Trajectory& pred, const EgoStatus& ego) {
  std::vector<OrientedRect> out;
  out.reserve(pred.size());
  double heading = 0.0;  // +x until the first real displacement
  Vec2 prev{0.0, 0.0};
  for (const Vec2& w : pred) {
    const Vec2 step = w - prev;
    if (norm(step) >= 1e-6) heading = std::atan2(step.y, step.x);
    out.push_back({w, heading, ego.footprint_length, ego.footprint_width});
    prev = w;
  }
  return out;
}

bool collision_any(const Trajectory& pred, const EgoStatus& ego,
                   const std::vector<std::vector<OrientedRect>>& boxes) {
  if (boxes.size() != pred.size()) {
    throw ArgumentError("collision_any: obstacle list length must equal horizon");
  }
  const auto footprints = ego_footprints(pred, ego);
  for (std::size_t t = 0; t < pred.size(); ++t) {
    for (const auto& box : boxes[t]) {
      if (rects_intersect(footprints[t], box)) return true;
    }
  }
  return false;
}

RiskLabels risk_labels(const Trajectory& pred, const SampleRecord& sample) {
  return {ade(pred, sample.gt_trajectory),
          collision_any(pred, sample.ego, sample.obstacle_boxes)};
}

}  // namespace planrisk
