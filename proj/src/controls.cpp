#include "planrisk/controls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "planrisk/stats.hpp"

namespace planrisk {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::optional<Footprint> project_box(const ObjectAnnotation& a, const CameraCalibration& cal,
                                     int height, int width) {
  const double cy = std::cos(a.yaw), sy = std::sin(a.yaw);
  Footprint fp{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  bool any = false;
  for (int i = 0; i < 8; ++i) {
    const double dl = (i & 1) ? 0.5 * a.length : -0.5 * a.length;
    const double dw = (i & 2) ? 0.5 * a.width : -0.5 * a.width;
    const double dh = (i & 4) ? 0.5 * a.height : -0.5 * a.height;
    // yaw about +z in the ego frame, length along the heading
    const double ex = a.cx + cy * dl - sy * dw;
    const double ey = a.cy + sy * dl + cy * dw;
    const double ez = a.cz + dh;

    double cam[3];
    for (int r = 0; r < 3; ++r) {
      cam[r] = cal.extrinsics[r][0] * ex + cal.extrinsics[r][1] * ey +
               cal.extrinsics[r][2] * ez + cal.extrinsics[r][3];
    }
    if (cam[2] <= 0.0) continue;  // behind the camera
    const double px = cam[0] / cam[2];
    const double py = cam[1] / cam[2];
    const double v = cal.intrinsics[0][0] * px + cal.intrinsics[0][1] * py + cal.intrinsics[0][2];
    const double u = cal.intrinsics[1][0] * px + cal.intrinsics[1][1] * py + cal.intrinsics[1][2];
    fp.u_min = std::min(fp.u_min, u);
    fp.u_max = std::max(fp.u_max, u);
    fp.v_min = std::min(fp.v_min, v);
    fp.v_max = std::max(fp.v_max, v);
    any = true;
  }
  if (!any) return std::nullopt;
  // overlap with [0, W) x [0, H) must have positive area
  if (fp.u_max <= 0.0 || fp.u_min >= height || fp.v_max <= 0.0 || fp.v_min >= width) {
    return std::nullopt;
  }
  return fp;
}

MatchedControls matched_controls(const SampleRecord& s, int height, int width) {
  MatchedControls out;
  const int C = static_cast<int>(s.calibrations.size());
  out.per_camera.assign(C, 0);

  // footprint centers per camera, for the second moment
  std::vector<std::vector<Vec2>> centers(C);
  for (const auto& a : s.annotations) {
    bool visible_somewhere = false;
    for (int c = 0; c < C; ++c) {
      const auto fp = project_box(a, s.calibrations[c], height, width);
      if (!fp) continue;
      visible_somewhere = true;
      out.per_camera[c]++;
      centers[c].push_back({fp->center_u(), fp->center_v()});
    }
    if (visible_somewhere) out.n_obj++;
  }

  std::int64_t total = 0;
  for (auto n : out.per_camera) total += n;
  if (total == 0) return out;  // d_obj and gini_obj stay missing

  // n_c-weighted within-camera second moment of footprint centers; the same
  // template as the saliency spatial variance with objects as unit masses.
  double d_obj = 0.0;
  for (int c = 0; c < C; ++c) {
    const auto& pts = centers[c];
    if (pts.empty()) continue;
    Vec2 mean{};
    for (const auto& p : pts) mean = mean + p;
    mean = (1.0 / static_cast<double>(pts.size())) * mean;
    double second = 0.0;
    for (const auto& p : pts) {
      const Vec2 d = p - mean;
      second += d.x * d.x + d.y * d.y;
    }
    second /= static_cast<double>(pts.size());
    d_obj += (static_cast<double>(pts.size()) / static_cast<double>(total)) * second;
  }
  out.d_obj = d_obj;

  std::vector<double> masses(out.per_camera.begin(), out.per_camera.end());
  out.gini_obj = gini_coefficient(masses);
  return out;
}

ExtendedControls extended_controls(const SampleRecord& s) {
  ExtendedControls out;
  const Vec2 ego_v{s.ego.vx, s.ego.vy};
  out.ego_speed = norm(ego_v);

  double radar_sum = 0.0;
  std::int64_t radar_n = 0;
  double nearest_veh_dist = std::numeric_limits<double>::infinity();
  double speed20_sum = 0.0;
  std::int64_t speed20_n = 0;
  std::int64_t dyn_n = 0;

  for (const auto& a : s.annotations) {
    const Vec2 p{a.cx, a.cy};
    const double d = norm(p);
    const Vec2 v{a.vx, a.vy};
    const double speed = norm(v);
    const bool dynamic = is_dynamic_class(a.cls);
    const bool vehicle = a.cls == ObjectClass::kVehicle;

    if (a.cls == ObjectClass::kBarrier || a.cls == ObjectClass::kTrafficCone) {
      out.barrier_cone_count++;
    }
    if (d <= 5.0) out.nearfield_count++;
    const double bearing = std::abs(std::atan2(a.cy, a.cx));
    if (bearing > kPi / 3.0 && bearing < 2.0 * kPi / 3.0) out.side_object_count++;
    if (a.radar_point_count) {
      radar_sum += static_cast<double>(*a.radar_point_count);
      radar_n++;
    }
    if (vehicle && d < nearest_veh_dist) {
      nearest_veh_dist = d;
      out.nearest_veh_speed = speed;
    }
    if (dynamic) {
      dyn_n++;
      if (d <= 20.0) {
        speed20_sum += speed;
        speed20_n++;
      }
      // closing-motion criterion: relative velocity points back toward ego
      if (dot(p, v - ego_v) < 0.0) {
        out.approach_count++;
        if (vehicle) out.approach_veh_count++;
      }
    }
  }

  if (radar_n > 0) out.mean_radar_pts = radar_sum / static_cast<double>(radar_n);
  if (speed20_n > 0) out.mean_speed_20m = speed20_sum / static_cast<double>(speed20_n);
  if (!s.annotations.empty()) {
    out.dyn_ratio = static_cast<double>(dyn_n) / static_cast<double>(s.annotations.size());
  }
  return out;
}

}  // namespace planrisk
