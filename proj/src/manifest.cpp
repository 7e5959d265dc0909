#include "planrisk/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "planrisk/errors.hpp"

namespace planrisk {

using nlohmann::json;

double trajectory_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw ArgumentError("trajectory length mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const Vec2 d = a[t] - b[t];
    acc += d.x * d.x + d.y * d.y;
  }
  return std::sqrt(acc);
}

const char* to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return "vehicle";
    case ObjectClass::kPedestrian: return "pedestrian";
    case ObjectClass::kBicycle: return "bicycle";
    case ObjectClass::kMotorcycle: return "motorcycle";
    case ObjectClass::kBarrier: return "barrier";
    case ObjectClass::kTrafficCone: return "traffic_cone";
    case ObjectClass::kOther: return "other";
  }
  return "other";
}

ObjectClass object_class_from_string(const std::string& s) {
  if (s == "vehicle") return ObjectClass::kVehicle;
  if (s == "pedestrian") return ObjectClass::kPedestrian;
  if (s == "bicycle") return ObjectClass::kBicycle;
  if (s == "motorcycle") return ObjectClass::kMotorcycle;
  if (s == "barrier") return ObjectClass::kBarrier;
  if (s == "traffic_cone") return ObjectClass::kTrafficCone;
  if (s == "other") return ObjectClass::kOther;
  throw ValidationError("unknown object class: " + s);
}

bool is_dynamic_class(ObjectClass c) {
  return c == ObjectClass::kVehicle || c == ObjectClass::kPedestrian ||
         c == ObjectClass::kBicycle || c == ObjectClass::kMotorcycle;
}

std::size_t SceneManifest::sample_count() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += s.samples.size();
  return n;
}

std::string SceneManifest::tensor_file(const SampleRecord& s) const {
  return (std::filesystem::path(dataset_root) / s.tensor_path).string();
}

namespace {

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw ValidationError("non-finite value in " + what);
}

Vec2 parse_vec2(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw ValidationError(what + " must be [x, y]");
  Vec2 v{j[0].get<double>(), j[1].get<double>()};
  require_finite(v.x, what);
  require_finite(v.y, what);
  return v;
}

CameraCalibration parse_calibration(const json& j, const std::string& ctx) {
  CameraCalibration cal;
  const auto& k = j.at("intrinsics");
  const auto& e = j.at("extrinsics");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      cal.intrinsics[r][c] = k.at(r).at(c).get<double>();
      require_finite(cal.intrinsics[r][c], ctx + " intrinsics");
    }
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      cal.extrinsics[r][c] = e.at(r).at(c).get<double>();
      require_finite(cal.extrinsics[r][c], ctx + " extrinsics");
    }
  if (std::abs(cal.intrinsics[2][2] - 1.0) > 1e-9) {
    throw ValidationError(ctx + ": intrinsics[2][2] must be 1");
  }
  // rotation block orthonormal within 1e-6
  for (int i = 0; i < 3; ++i) {
    for (int j2 = 0; j2 < 3; ++j2) {
      double dot = 0.0;
      for (int k2 = 0; k2 < 3; ++k2) dot += cal.extrinsics[k2][i] * cal.extrinsics[k2][j2];
      const double want = (i == j2) ? 1.0 : 0.0;
      if (std::abs(dot - want) > 1e-6) {
        throw ValidationError(ctx + ": extrinsics rotation block not orthonormal");
      }
    }
  }
  return cal;
}

ObjectAnnotation parse_annotation(const json& j, const std::string& ctx) {
  ObjectAnnotation a;
  a.id = j.at("id").get<std::string>();
  a.cls = object_class_from_string(j.at("class").get<std::string>());
  const auto& c = j.at("center");
  a.cx = c.at(0).get<double>();
  a.cy = c.at(1).get<double>();
  a.cz = c.at(2).get<double>();
  const auto& s = j.at("size");
  a.length = s.at(0).get<double>();
  a.width = s.at(1).get<double>();
  a.height = s.at(2).get<double>();
  a.yaw = j.at("yaw").get<double>();
  const auto& v = j.at("velocity");
  a.vx = v.at(0).get<double>();
  a.vy = v.at(1).get<double>();
  if (j.contains("radar_point_count") && !j.at("radar_point_count").is_null()) {
    a.radar_point_count = j.at("radar_point_count").get<std::int64_t>();
    if (*a.radar_point_count < 0) throw ValidationError(ctx + ": negative radar_point_count");
  }
  for (double x : {a.cx, a.cy, a.cz, a.yaw, a.vx, a.vy}) require_finite(x, ctx + " annotation");
  if (!(a.length > 0 && a.width > 0 && a.height > 0)) {
    throw ValidationError(ctx + ": annotation size must be positive");
  }
  return a;
}

OrientedRect parse_box(const json& j, const std::string& ctx) {
  OrientedRect r;
  r.center.x = j.at("cx").get<double>();
  r.center.y = j.at("cy").get<double>();
  r.yaw = j.at("yaw").get<double>();
  r.length = j.at("l").get<double>();
  r.width = j.at("w").get<double>();
  for (double x : {r.center.x, r.center.y, r.yaw, r.length, r.width}) {
    require_finite(x, ctx + " obstacle box");
  }
  if (!(r.length > 0 && r.width > 0)) throw ValidationError(ctx + ": obstacle box dims must be positive");
  return r;
}

json dump_calibration(const CameraCalibration& cal) {
  json k = json::array();
  for (int r = 0; r < 3; ++r) k.push_back({cal.intrinsics[r][0], cal.intrinsics[r][1], cal.intrinsics[r][2]});
  json e = json::array();
  for (int r = 0; r < 4; ++r) {
    e.push_back({cal.extrinsics[r][0], cal.extrinsics[r][1], cal.extrinsics[r][2], cal.extrinsics[r][3]});
  }
  return json{{"intrinsics", k}, {"extrinsics", e}};
}

}  // namespace

SceneManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("manifest parse error in " + path.string() + ": " + e.what());
  }

  SceneManifest m;
  m.dataset_root = path.parent_path().string();
  if (m.dataset_root.empty()) m.dataset_root = ".";
  try {
    m.version = doc.at("version").get<int>();
    m.cameras = doc.at("cameras").get<int>();
    m.channels = doc.at("channels").get<int>();
    m.height = doc.at("height").get<int>();
    m.width = doc.at("width").get<int>();
    if (m.cameras < 1 || m.channels < 1 || m.height < 1 || m.width < 1) {
      throw ValidationError("manifest dims must be positive");
    }

    std::set<std::string> seen_ids;
    for (const auto& js : doc.at("scenes")) {
      Scene scene;
      scene.scene_id = js.at("scene_id").get<std::string>();
      for (const auto& jrec : js.at("samples")) {
        SampleRecord rec;
        rec.sample_id = jrec.at("sample_id").get<std::string>();
        rec.scene_id = scene.scene_id;
        const std::string ctx = "sample " + rec.sample_id;
        if (!seen_ids.insert(rec.sample_id).second) {
          throw ValidationError("duplicate sample id: " + rec.sample_id);
        }
        rec.tensor_path = jrec.at("tensor_path").get<std::string>();
        if (!std::filesystem::exists(m.tensor_file(rec))) {
          throw ValidationError(ctx + ": missing tensor file " + m.tensor_file(rec));
        }
        for (const auto& jc : jrec.at("calibrations")) {
          rec.calibrations.push_back(parse_calibration(jc, ctx));
        }
        if (static_cast<int>(rec.calibrations.size()) != m.cameras) {
          throw ValidationError(ctx + ": calibration count does not match camera count");
        }
        for (const auto& ja : jrec.at("annotations")) {
          rec.annotations.push_back(parse_annotation(ja, ctx));
        }
        const auto& je = jrec.at("ego");
        const Vec2 ev = parse_vec2(je.at("velocity"), ctx + " ego velocity");
        rec.ego.vx = ev.x;
        rec.ego.vy = ev.y;
        rec.ego.footprint_length = je.at("length").get<double>();
        rec.ego.footprint_width = je.at("width").get<double>();
        if (!(rec.ego.footprint_length > 0 && rec.ego.footprint_width > 0)) {
          throw ValidationError(ctx + ": ego footprint dims must be positive");
        }
        for (const auto& jw : jrec.at("gt_trajectory")) {
          rec.gt_trajectory.push_back(parse_vec2(jw, ctx + " gt waypoint"));
        }
        if (rec.gt_trajectory.empty()) throw ValidationError(ctx + ": empty gt trajectory");
        for (const auto& jstep : jrec.at("obstacle_boxes")) {
          std::vector<OrientedRect> step;
          for (const auto& jb : jstep) step.push_back(parse_box(jb, ctx));
          rec.obstacle_boxes.push_back(std::move(step));
        }
        if (rec.obstacle_boxes.size() != rec.gt_trajectory.size()) {
          throw ValidationError(ctx + ": obstacle box list length must equal horizon");
        }
        scene.samples.push_back(std::move(rec));
      }
      m.scenes.push_back(std::move(scene));
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest schema error in " + path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const SceneManifest& m, const std::filesystem::path& path) {
  json doc;
  doc["version"] = m.version;
  doc["cameras"] = m.cameras;
  doc["channels"] = m.channels;
  doc["height"] = m.height;
  doc["width"] = m.width;
  json scenes = json::array();
  for (const auto& scene : m.scenes) {
    json js;
    js["scene_id"] = scene.scene_id;
    json samples = json::array();
    for (const auto& rec : scene.samples) {
      json jr;
      jr["sample_id"] = rec.sample_id;
      jr["tensor_path"] = rec.tensor_path;
      json cals = json::array();
      for (const auto& cal : rec.calibrations) cals.push_back(dump_calibration(cal));
      jr["calibrations"] = cals;
      json anns = json::array();
      for (const auto& a : rec.annotations) {
        json ja{{"id", a.id},
                {"class", to_string(a.cls)},
                {"center", {a.cx, a.cy, a.cz}},
                {"size", {a.length, a.width, a.height}},
                {"yaw", a.yaw},
                {"velocity", {a.vx, a.vy}}};
        if (a.radar_point_count) {
          ja["radar_point_count"] = *a.radar_point_count;
        } else {
          ja["radar_point_count"] = nullptr;
        }
        anns.push_back(ja);
      }
      jr["annotations"] = anns;
      jr["ego"] = json{{"velocity", {rec.ego.vx, rec.ego.vy}},
                       {"length", rec.ego.footprint_length},
                       {"width", rec.ego.footprint_width}};
      json traj = json::array();
      for (const auto& w : rec.gt_trajectory) traj.push_back({w.x, w.y});
      jr["gt_trajectory"] = traj;
      json boxes = json::array();
      for (const auto& step : rec.obstacle_boxes) {
        json jstep = json::array();
        for (const auto& b : step) {
          jstep.push_back(json{{"cx", b.center.x},
                               {"cy", b.center.y},
                               {"yaw", b.yaw},
                               {"l", b.length},
                               {"w", b.width}});
        }
        boxes.push_back(jstep);
      }
      jr["obstacle_boxes"] = boxes;
      samples.push_back(std::move(jr));
    }
    js["samples"] = samples;
    scenes.push_back(std::move(js));
  }
  doc["scenes"] = scenes;

  std::ofstream out(path);
  if (!out) throw Error("cannot open manifest for writing: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace planrisk
