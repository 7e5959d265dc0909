#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace planrisk {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

// Planned or ground-truth trajectory: T waypoints (x, y) in meters, ego frame.
using Trajectory = std::vector<Vec2>;

// Flat L2 over all T x 2 coordinates.
double trajectory_distance(const Trajectory& a, const Trajectory& b);

// Oriented rectangle in the ego ground plane: obstacle boxes and the ego footprint.
struct OrientedRect {
  Vec2 center;
  double yaw = 0.0;     // radians
  double length = 0.0;  // extent along the yaw direction
  double width = 0.0;
};

struct CameraCalibration {
  // 3x3 pinhole intrinsics in pixels; [2][2] must be 1.
  std::array<std::array<double, 3>, 3> intrinsics{};
  // 4x4 ego-to-camera rigid transform (rotation block orthonormal within 1e-6).
  std::array<std::array<double, 4>, 4> extrinsics{};
};

enum class ObjectClass : int {
  kVehicle = 0,
  kPedestrian,
  kBicycle,
  kMotorcycle,
  kBarrier,
  kTrafficCone,
  kOther,
};

const char* to_string(ObjectClass c);
ObjectClass object_class_from_string(const std::string& s);

// Dynamic actor categories: vehicle, pedestrian, bicycle, motorcycle.
bool is_dynamic_class(ObjectClass c);

struct ObjectAnnotation {
  std::string id;
  ObjectClass cls = ObjectClass::kOther;
  double cx = 0.0, cy = 0.0, cz = 0.0;  // center, meters, ego frame
  double length = 0.0, width = 0.0, height = 0.0;
  double yaw = 0.0;
  double vx = 0.0, vy = 0.0;  // ground-plane velocity, m/s
  std::optional<std::int64_t> radar_point_count;
};

struct EgoStatus {
  double vx = 0.0, vy = 0.0;
  double footprint_length = 4.08;  // configurable default; never stated upstream
  double footprint_width = 1.73;
};

// One timestamped frame. obstacle_boxes[t] lists the oriented boxes active at
// trajectory step t+1; its length equals the horizon T.
struct SampleRecord {
  std::string sample_id;
  std::string scene_id;
  std::string tensor_path;  // relative to the manifest's dataset root
  std::vector<CameraCalibration> calibrations;
  std::vector<ObjectAnnotation> annotations;
  EgoStatus ego;
  Trajectory gt_trajectory;
  std::vector<std::vector<OrientedRect>> obstacle_boxes;

  int horizon() const { return static_cast<int>(gt_trajectory.size()); }
};

struct Scene {
  std::string scene_id;
  std::vector<SampleRecord> samples;
};

struct SceneManifest {
  std::string dataset_root;  // directory the tensor paths resolve against
  int version = 1;
  int cameras = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<Scene> scenes;

  std::size_t sample_count() const;
  std::string tensor_file(const SampleRecord& s) const;
};

}  // namespace planrisk
