#pragma once

#include <vector>

#include "planrisk/types.hpp"

namespace planrisk {

// Mean per-step Euclidean distance between trajectories of equal length.
double ade(const Trajectory& pred, const Trajectory& gt);

// Separating-axis intersection test for two oriented rectangles; touching
// counts as intersecting.
bool rects_intersect(const OrientedRect& a, const OrientedRect& b);

// Ego footprint at step t: rectangle centered at pred[t] with the ego dims,
// heading from the unit direction of (pred[t] - pred[t-1]) with pred[-1] at
// the origin. Steps shorter than 1e-6 m carry the previous heading; the
// initial heading is +x.
std::vector<OrientedRect> ego_footprints(const Trajectory& pred, const EgoStatus& ego);

// True iff any footprint intersects any obstacle box at its step.
bool collision_any(const Trajectory& pred, const EgoStatus& ego,
                   const std::vector<std::vector<OrientedRect>>& boxes);

struct RiskLabels {
  double ade = 0.0;
  bool collision_any = false;
};

RiskLabels risk_labels(const Trajectory& pred, const SampleRecord& sample);

}  // namespace planrisk
