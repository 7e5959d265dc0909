#include "planrisk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "planrisk/errors.hpp"
#include "planrisk/manifest.hpp"
#include "planrisk/rng.hpp"

namespace planrisk {

using nlohmann::json;

SynthSpec::Profile profile_from_string(const std::string& s) {
  if (s == "concentrated") return SynthSpec::Profile::kConcentrated;
  if (s == "diffuse") return SynthSpec::Profile::kDiffuse;
  if (s == "single-camera") return SynthSpec::Profile::kSingleCamera;
  if (s == "mixed") return SynthSpec::Profile::kMixed;
  throw ArgumentError("unknown profile: " + s);
}

const char* to_string(SynthSpec::Profile p) {
  switch (p) {
    case SynthSpec::Profile::kConcentrated: return "concentrated";
    case SynthSpec::Profile::kDiffuse: return "diffuse";
    case SynthSpec::Profile::kSingleCamera: return "single-camera";
    case SynthSpec::Profile::kMixed: return "mixed";
  }
  return "mixed";
}

namespace {

// factor pair of n with rows <= cols and rows as close to sqrt(n) as possible
std::pair<int, int> grid_shape(int n) {
  int rows = 1;
  for (int r = 1; r * r <= n; ++r) {
    if (n % r == 0) rows = r;
  }
  return {rows, n / rows};
}

struct ClassShape {
  double l, w, h;
};

ClassShape shape_of(ObjectClass c) {
  switch (c) {
    case ObjectClass::kVehicle: return {4.5, 1.9, 1.7};
    case ObjectClass::kPedestrian: return {0.6, 0.6, 1.7};
    case ObjectClass::kBicycle: return {1.7, 0.6, 1.3};
    case ObjectClass::kMotorcycle: return {2.1, 0.8, 1.4};
    case ObjectClass::kBarrier: return {2.0, 0.4, 1.0};
    case ObjectClass::kTrafficCone: return {0.3, 0.3, 0.7};
    case ObjectClass::kOther: return {1.2, 1.2, 1.2};
  }
  return {1.0, 1.0, 1.0};
}

ObjectClass draw_class(Rng& rng) {
  const double u = rng.uniform01();
  if (u < 0.40) return ObjectClass::kVehicle;
  if (u < 0.60) return ObjectClass::kPedestrian;
  if (u < 0.68) return ObjectClass::kBicycle;
  if (u < 0.74) return ObjectClass::kMotorcycle;
  if (u < 0.84) return ObjectClass::kBarrier;
  if (u < 0.94) return ObjectClass::kTrafficCone;
  return ObjectClass::kOther;
}

// Surround ring of cameras: camera k faces yaw 2 pi k / C. Camera frame is
// +z forward, +x right, +y down; extrinsics map ego points into it.
CameraCalibration ring_calibration(int camera, int cameras, int height, int width) {
  const double phi = 2.0 * 3.14159265358979323846 * camera / cameras;
  const double c = std::cos(phi), s = std::sin(phi);
  CameraCalibration cal{};
  const double f = 0.6 * width;
  cal.intrinsics = {{{f, 0.0, width / 2.0}, {0.0, f, height / 2.0}, {0.0, 0.0, 1.0}}};
  // rows are the camera axes expressed in ego coordinates
  const double rot[3][3] = {
      {s, -c, 0.0},   // x_cam: right
      {0.0, 0.0, -1.0},  // y_cam: down
      {c, s, 0.0},    // z_cam: forward
  };
  const double t_ego[3] = {0.8 * c, 0.8 * s, 1.5};  // camera position on the roof ring
  for (int r = 0; r < 3; ++r) {
    double dot = 0.0;
    for (int k = 0; k < 3; ++k) {
      cal.extrinsics[r][k] = rot[r][k];
      dot += rot[r][k] * t_ego[k];
    }
    cal.extrinsics[r][3] = -dot;
  }
  cal.extrinsics[3] = {0.0, 0.0, 0.0, 1.0};
  return cal;
}

Trajectory make_base_trajectory(Rng& rng, int horizon) {
  const double speed = rng.uniform(2.0, 10.0);
  const double turn = rng.uniform(-0.08, 0.08);  // heading drift per step
  const double dt = 0.5;
  Trajectory out;
  double heading = rng.uniform(-0.2, 0.2);
  Vec2 pos{0.0, 0.0};
  for (int t = 0; t < horizon; ++t) {
    heading += turn;
    pos = pos + Vec2{speed * dt * std::cos(heading), speed * dt * std::sin(heading)};
    out.push_back(pos);
  }
  return out;
}

double flat_norm(const Trajectory& w) {
  double acc = 0.0;
  for (const auto& p : w) acc += p.x * p.x + p.y * p.y;
  return std::sqrt(acc);
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  if (spec.scenes < 1 || spec.samples_per_scene < 1 || spec.cameras < 1 || spec.channels < 1 ||
      spec.height < 1 || spec.width < 1 || spec.regions_per_camera < 1 || spec.horizon < 1) {
    throw ArgumentError("synth spec counts must be >= 1");
  }
  if (!(spec.offset_scale >= 0 && spec.noise_scale >= 0)) {
    throw ArgumentError("synth spec scales must be >= 0");
  }

  const auto [rows, cols] = grid_shape(spec.regions_per_camera);
  const int regions_total = spec.cameras * rows * cols;
  const int n_samples = spec.scenes * spec.samples_per_scene;

  SynthResult out;
  out.grid_rows = rows;
  out.grid_cols = cols;
  out.manifest.version = 1;
  out.manifest.cameras = spec.cameras;
  out.manifest.channels = spec.channels;
  out.manifest.height = spec.height;
  out.manifest.width = spec.width;

  out.planners.common.kind = SyntheticPlannerSpec::Kind::kModular;
  out.planners.common.cameras = spec.cameras;
  out.planners.common.channels = spec.channels;
  out.planners.common.height = spec.height;
  out.planners.common.width = spec.width;
  out.planners.common.baseline = 0.0f;
  out.planners.common.detect_grid = {rows, cols};

  // collision samples fixed up front so the base rate is ~10% by construction
  std::vector<int> order(n_samples);
  for (int i = 0; i < n_samples; ++i) order[i] = i;
  {
    Rng rng(mix_seed(spec.seed, 0xC0111DEULL));
    rng.shuffle(order);
  }
  const int n_collide = static_cast<int>(std::lround(0.10 * n_samples));
  std::vector<char> collide(n_samples, 0);
  for (int i = 0; i < n_collide; ++i) collide[order[i]] = 1;

  int global_index = 0;
  for (int sc = 0; sc < spec.scenes; ++sc) {
    Scene scene;
    {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "scene_%03d", sc);
      scene.scene_id = buf;
    }
    for (int sa = 0; sa < spec.samples_per_scene; ++sa, ++global_index) {
      SampleRecord rec;
      {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%s_s%02d", scene.scene_id.c_str(), sa);
        rec.sample_id = buf;
      }
      rec.scene_id = scene.scene_id;
      rec.tensor_path = "tensors/" + rec.sample_id + ".mvtn";

      const std::uint64_t base_seed = mix_seed(spec.seed, static_cast<std::uint64_t>(global_index));

      // tensor values stay clear of the 0.0 masking baseline
      ViewTensor tensor;
      tensor.cameras = spec.cameras;
      tensor.channels = spec.channels;
      tensor.height = spec.height;
      tensor.width = spec.width;
      tensor.data.resize(tensor.size());
      {
        Rng rng(mix_seed(base_seed, 1));
        for (auto& v : tensor.data) v = static_cast<float>(rng.uniform(0.1, 1.0));
      }

      // planted planner
      SyntheticPlannerSpec planner = out.planners.common;
      {
        Rng rng(mix_seed(base_seed, 2));
        planner.base = make_base_trajectory(rng, spec.horizon);

        SynthSpec::Profile profile = spec.profile;
        if (profile == SynthSpec::Profile::kMixed) {
          const double u = rng.uniform01();
          profile = u < 1.0 / 3 ? SynthSpec::Profile::kConcentrated
                    : u < 2.0 / 3 ? SynthSpec::Profile::kDiffuse
                                  : SynthSpec::Profile::kSingleCamera;
        }

        std::vector<std::int32_t> candidates;
        if (profile == SynthSpec::Profile::kConcentrated) {
          // spatially adjacent block of regions inside one camera
          const int cam = static_cast<int>(rng.uniform_int(0, spec.cameras - 1));
          const int block_r = std::min(2, rows), block_c = std::min(2, cols);
          const int r0 = static_cast<int>(rng.uniform_int(0, rows - block_r));
          const int c0 = static_cast<int>(rng.uniform_int(0, cols - block_c));
          for (int dr = 0; dr < block_r; ++dr) {
            for (int dc = 0; dc < block_c; ++dc) {
              candidates.push_back(
                  static_cast<std::int32_t>((cam * rows + r0 + dr) * cols + c0 + dc));
            }
          }
        } else if (profile == SynthSpec::Profile::kSingleCamera) {
          const int cam = static_cast<int>(rng.uniform_int(0, spec.cameras - 1));
          for (int r = 0; r < rows * cols; ++r) {
            candidates.push_back(static_cast<std::int32_t>(cam * rows * cols + r));
          }
          rng.shuffle(candidates);
        } else {
          for (int r = 0; r < regions_total; ++r) candidates.push_back(r);
          rng.shuffle(candidates);
        }

        if (profile == SynthSpec::Profile::kDiffuse) {
          const int n_planted = std::max(1, static_cast<int>(0.4 * regions_total));
          for (int i = 0; i < n_planted; ++i) {
            Trajectory w(spec.horizon);
            for (auto& p : w) {
              p.x = 0.15 * spec.offset_scale * rng.normal() / std::sqrt(spec.horizon);
              p.y = 0.15 * spec.offset_scale * rng.normal() / std::sqrt(spec.horizon);
            }
            planner.offsets[candidates[i]] = std::move(w);
          }
        } else {
          // colinear positive offsets: the objective is modular, so greedy
          // search recovers the planted regions exactly
          const int n_planted = std::min<int>(4, static_cast<int>(candidates.size()));
          Trajectory direction(spec.horizon);
          for (auto& p : direction) {
            p.x = rng.normal();
            p.y = rng.normal();
          }
          const double d_norm = flat_norm(direction);
          for (auto& p : direction) p = (1.0 / d_norm) * p;
          for (int i = 0; i < n_planted; ++i) {
            const double c = spec.offset_scale * rng.uniform(0.5, 1.5);
            Trajectory w(spec.horizon);
            for (int t = 0; t < spec.horizon; ++t) w[t] = c * direction[t];
            planner.offsets[candidates[i]] = std::move(w);
          }
        }
      }

      // gt trajectory = planted full output + noise
      {
        Rng rng(mix_seed(base_seed, 3));
        rec.gt_trajectory = planner.base;
        const double scale = spec.noise_scale * rng.uniform(0.5, 1.5);
        for (auto& p : rec.gt_trajectory) {
          p.x += scale * rng.normal();
          p.y += scale * rng.normal();
        }
      }

      rec.ego.vx = norm(planner.base.front()) / 0.5;
      rec.ego.vy = 0.0;

      for (int c = 0; c < spec.cameras; ++c) {
        rec.calibrations.push_back(ring_calibration(c, spec.cameras, spec.height, spec.width));
      }

      // annotations
      {
        Rng rng(mix_seed(base_seed, 4));
        const int n_ann = static_cast<int>(rng.uniform_int(3, 10));
        for (int i = 0; i < n_ann; ++i) {
          ObjectAnnotation a;
          {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s_obj%02d", rec.sample_id.c_str(), i);
            a.id = buf;
          }
          a.cls = draw_class(rng);
          const ClassShape shape = shape_of(a.cls);
          a.length = shape.l * rng.uniform(0.8, 1.2);
          a.width = shape.w * rng.uniform(0.8, 1.2);
          a.height = shape.h * rng.uniform(0.8, 1.2);
          a.cx = rng.uniform(-40.0, 40.0);
          a.cy = rng.uniform(-40.0, 40.0);
          a.cz = a.height / 2.0;
          a.yaw = rng.uniform(-3.14159, 3.14159);
          if (is_dynamic_class(a.cls)) {
            a.vx = 3.0 * rng.normal();
            a.vy = 3.0 * rng.normal();
          }
          if (rng.bernoulli(0.8)) {
            a.radar_point_count = rng.uniform_int(0, 30);
          }
          rec.annotations.push_back(std::move(a));
        }
      }

      // obstacle boxes; the prediction used for the collision label is the
      // planted planner's full output
      {
        Rng rng(mix_seed(base_seed, 5));
        rec.obstacle_boxes.assign(spec.horizon, {});
        if (collide[global_index]) {
          const int t_star = static_cast<int>(rng.uniform_int(0, spec.horizon - 1));
          const Vec2 at = planner.base[t_star];
          rec.obstacle_boxes[t_star].push_back({at, rng.uniform(-0.5, 0.5), 4.0, 2.0});
          out.collision_count++;
        }
        for (int t = 0; t < spec.horizon; ++t) {
          for (int k = 0; k < spec.obstacle_density; ++k) {
            // background clutter well away from every waypoint
            for (int attempt = 0; attempt < 64; ++attempt) {
              const Vec2 pos{rng.uniform(-60.0, 60.0), rng.uniform(-60.0, 60.0)};
              double min_d = 1e9;
              for (const auto& w : planner.base) min_d = std::min(min_d, norm(pos - w));
              if (min_d >= 15.0) {
                rec.obstacle_boxes[t].push_back(
                    {pos, rng.uniform(-3.14, 3.14), rng.uniform(1.0, 5.0), rng.uniform(0.5, 2.5)});
                break;
              }
            }
          }
        }
      }

      for (const auto& [rid, w] : planner.offsets) {
        const double n = flat_norm(w);
        if (n > 0.0) out.planted[rec.sample_id][rid] = n;
      }
      out.planners.per_sample.emplace(rec.sample_id, std::move(planner));
      out.tensors.push_back(std::move(tensor));
      scene.samples.push_back(std::move(rec));
    }
    out.manifest.scenes.push_back(std::move(scene));
  }
  return out;
}

void write_synth(const SynthResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tensors");
  std::size_t i = 0;
  for (const auto& scene : result.manifest.scenes) {
    for (const auto& rec : scene.samples) {
      write_tensor(result.tensors[i++], dir / rec.tensor_path);
    }
  }
  SceneManifest manifest = result.manifest;
  manifest.dataset_root = dir.string();
  save_manifest(manifest, dir / "manifest.json");
  save_planner_set(result.planners, dir / "planners.json");

  json planted;
  for (const auto& [sid, regions] : result.planted) {
    json entry = json::object();
    for (const auto& [rid, norm_value] : regions) entry[std::to_string(rid)] = norm_value;
    planted[sid] = entry;
  }
  json doc{{"grid_rows", result.grid_rows},
           {"grid_cols", result.grid_cols},
           {"planted", planted}};
  std::ofstream out(dir / "planted.json");
  if (!out) throw Error("cannot write planted.json under " + dir.string());
  out << doc.dump(2) << "\n";
}

double recovery_score(const OrderedSelection& selection,
                      const std::map<std::int32_t, double>& planted_norms) {
  double total = 0.0;
  for (const auto& [rid, n] : planted_norms) total += n;
  if (total == 0.0) return 1.0;
  // Top-K by attribution score (the per-region gain); the hierarchical
  // ordering is group-major, so selection position alone is not a ranking.
  // Ties keep selection order.
  std::vector<std::size_t> order(selection.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return selection.gains[a] > selection.gains[b];
  });
  const std::size_t k = planted_norms.size();
  double captured = 0.0;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    auto it = planted_norms.find(selection.ids[order[i]]);
    if (it != planted_norms.end()) captured += it->second;
  }
  return captured / total;
}

std::map<std::string, std::map<std::int32_t, double>> load_planted(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open planted truth: " + path.string());
  json doc;
  in >> doc;
  std::map<std::string, std::map<std::int32_t, double>> out;
  for (const auto& [sid, entry] : doc.at("planted").items()) {
    for (const auto& [rid, v] : entry.items()) {
      out[sid][static_cast<std::int32_t>(std::stol(rid))] = v.get<double>();
    }
  }
  return out;
}

}  // namespace planrisk
