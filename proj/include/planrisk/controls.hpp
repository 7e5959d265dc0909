#pragma once

#include <optional>
#include <vector>

#include "planrisk/types.hpp"

namespace planrisk {

// Axis-aligned image-plane footprint of a projected 3D box; extents are kept
// unclipped, visibility is a rectangle-overlap test against [0,W) x [0,H).
struct Footprint {
  double u_min = 0.0, u_max = 0.0;  // rows
  double v_min = 0.0, v_max = 0.0;  // cols
  double center_u() const { return 0.5 * (u_min + u_max); }
  double center_v() const { return 0.5 * (v_min + v_max); }
};

// Projects the eight annotation-box corners through the calibration; corners
// with camera-frame depth <= 0 are discarded. Returns nothing when no corner
// survives or the corner AABB misses the image rectangle.
std::optional<Footprint> project_box(const ObjectAnnotation& a, const CameraCalibration& cal,
                                     int height, int width);

struct MatchedControls {
  std::int64_t n_obj = 0;                  // objects visible in >= 1 camera, counted once
  std::optional<double> d_obj;             // object-center spatial second moment, pixels^2
  std::optional<double> gini_obj;          // gini of per-camera visible counts
  std::vector<std::int64_t> per_camera;    // n_c
};

MatchedControls matched_controls(const SampleRecord& s, int height, int width);

struct ExtendedControls {
  double ego_speed = 0.0;
  std::int64_t barrier_cone_count = 0;
  std::int64_t nearfield_count = 0;    // within 5 m
  std::int64_t side_object_count = 0;  // pi/3 < |bearing| < 2pi/3, strict
  std::optional<double> mean_radar_pts;
  std::optional<double> nearest_veh_speed;
  std::optional<double> mean_speed_20m;  // dynamic actors within 20 m
  std::int64_t approach_count = 0;       // dynamic actors closing on ego
  std::int64_t approach_veh_count = 0;
  std::optional<double> dyn_ratio;
};

ExtendedControls extended_controls(const SampleRecord& s);

}  // namespace planrisk
