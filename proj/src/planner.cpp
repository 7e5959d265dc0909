#include "planrisk/planner.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "planrisk/errors.hpp"

namespace planrisk {

using nlohmann::json;

namespace {

class SyntheticPlanner : public Planner {
 public:
  explicit SyntheticPlanner(SyntheticPlannerSpec spec) : spec_(std::move(spec)) {
    if (spec_.base.empty()) throw ArgumentError("synthetic planner needs a base trajectory");
    for (const auto& [id, w] : spec_.offsets) {
      if (w.size() != spec_.base.size()) {
        throw ArgumentError("offset length mismatch for region " + std::to_string(id));
      }
    }
    if (spec_.kind == SyntheticPlannerSpec::Kind::kSaturating &&
        !(spec_.saturation > 0 && std::isfinite(spec_.saturation))) {
      throw ArgumentError("saturation cap must be positive and finite");
    }
    if (spec_.detect_grid) {
      detect_partition_ = grid_partition(spec_.cameras, spec_.height, spec_.width,
                                         spec_.detect_grid->first, spec_.detect_grid->second);
    }
  }

  Trajectory plan(const ViewTensor& x, const RegionSet* kept) override {
    if (spec_.cameras > 0 &&
        (x.cameras != spec_.cameras || x.channels != spec_.channels ||
         x.height != spec_.height || x.width != spec_.width)) {
      throw ArgumentError("tensor shape does not match planner spec");
    }
    const int T = static_cast<int>(spec_.base.size());
    std::vector<Vec2> removed_sum(T, Vec2{});
    // offsets iterate in ascending region id so float accumulation is canonical
    for (const auto& [id, w] : spec_.offsets) {
      if (!is_removed(id, x, kept)) continue;
      for (int t = 0; t < T; ++t) removed_sum[t] = removed_sum[t] + w[t];
    }
    Trajectory out(T);
    for (int t = 0; t < T; ++t) {
      Vec2 off = removed_sum[t];
      if (spec_.kind == SyntheticPlannerSpec::Kind::kSaturating) {
        const double n = norm(off);
        if (n > spec_.saturation) off = (spec_.saturation / n) * off;
      }
      out[t] = spec_.base[t] - off;
    }
    return out;
  }

  int horizon() const override { return static_cast<int>(spec_.base.size()); }

 private:
  bool is_removed(std::int32_t id, const ViewTensor& x, const RegionSet* kept) const {
    if (kept) return !kept->contains(id);
    if (!spec_.detect_grid) return false;  // tensor-only query, no grid: full input
    if (id < 0 || id >= detect_partition_.region_count()) return false;
    // A region counts as removed iff every channel of every pixel equals the
    // baseline; generated tensors avoid the baseline value so this is exact.
    const auto& reg = detect_partition_.regions[id];
    const std::size_t plane = static_cast<std::size_t>(x.height) * x.width;
    for (std::int32_t off : detect_partition_.pixels[id]) {
      for (int k = 0; k < x.channels; ++k) {
        const std::size_t base = (static_cast<std::size_t>(reg.camera) * x.channels + k) * plane;
        if (x.data[base + off] != spec_.baseline) return false;
      }
    }
    return true;
  }

  SyntheticPlannerSpec spec_;
  RegionPartition detect_partition_;
};

json trajectory_to_json(const Trajectory& t) {
  json out = json::array();
  for (const auto& w : t) out.push_back({w.x, w.y});
  return out;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  for (const auto& w : j) t.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
  return t;
}

json spec_body_to_json(const SyntheticPlannerSpec& s) {
  json offs = json::object();
  for (const auto& [id, w] : s.offsets) offs[std::to_string(id)] = trajectory_to_json(w);
  return json{{"base", trajectory_to_json(s.base)}, {"offsets", offs}};
}

void spec_body_from_json(const json& j, SyntheticPlannerSpec& s) {
  s.base = trajectory_from_json(j.at("base"));
  for (const auto& [key, val] : j.at("offsets").items()) {
    s.offsets[static_cast<std::int32_t>(std::stol(key))] = trajectory_from_json(val);
  }
}

json spec_header_to_json(const SyntheticPlannerSpec& s) {
  json doc;
  doc["kind"] = s.kind == SyntheticPlannerSpec::Kind::kModular ? "modular" : "saturating";
  doc["cameras"] = s.cameras;
  doc["channels"] = s.channels;
  doc["height"] = s.height;
  doc["width"] = s.width;
  doc["baseline"] = s.baseline;
  if (s.kind == SyntheticPlannerSpec::Kind::kSaturating) doc["saturation"] = s.saturation;
  if (s.detect_grid) {
    doc["detect_grid"] = {s.detect_grid->first, s.detect_grid->second};
  } else {
    doc["detect_grid"] = nullptr;
  }
  return doc;
}

void spec_header_from_json(const json& doc, SyntheticPlannerSpec& s) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "modular") {
    s.kind = SyntheticPlannerSpec::Kind::kModular;
  } else if (kind == "saturating") {
    s.kind = SyntheticPlannerSpec::Kind::kSaturating;
  } else {
    throw ValidationError("unknown planner kind: " + kind);
  }
  s.cameras = doc.at("cameras").get<int>();
  s.channels = doc.at("channels").get<int>();
  s.height = doc.at("height").get<int>();
  s.width = doc.at("width").get<int>();
  s.baseline = doc.at("baseline").get<float>();
  if (doc.contains("saturation")) s.saturation = doc.at("saturation").get<double>();
  if (doc.contains("detect_grid") && !doc.at("detect_grid").is_null()) {
    s.detect_grid = {doc.at("detect_grid").at(0).get<int>(), doc.at("detect_grid").at(1).get<int>()};
  }
}

json load_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string("cannot open ") + what + ": " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " parse error in " + path.string() + ": " + e.what());
  }
  return doc;
}

}  // namespace

std::shared_ptr<Planner> make_synthetic_planner(SyntheticPlannerSpec spec) {
  return std::make_shared<SyntheticPlanner>(std::move(spec));
}

SyntheticPlannerSpec load_planner_spec(const std::filesystem::path& path) {
  const json doc = load_json_file(path, "planner spec");
  SyntheticPlannerSpec s;
  try {
    spec_header_from_json(doc, s);
    spec_body_from_json(doc, s);
  } catch (const json::exception& e) {
    throw ValidationError("planner spec schema error in " + path.string() + ": " + e.what());
  }
  return s;
}

void save_planner_spec(const SyntheticPlannerSpec& spec, const std::filesystem::path& path) {
  json doc = spec_header_to_json(spec);
  doc.update(spec_body_to_json(spec));
  std::ofstream out(path);
  if (!out) throw Error("cannot write planner spec: " + path.string());
  out << doc.dump(2) << "\n";
}

const SyntheticPlannerSpec& PlannerSpecSet::for_sample(const std::string& sample_id) const {
  auto it = per_sample.find(sample_id);
  if (it == per_sample.end()) {
    throw ValidationError("planner spec set has no entry for sample " + sample_id);
  }
  return it->second;
}

PlannerSpecSet load_planner_set(const std::filesystem::path& path) {
  const json doc = load_json_file(path, "planner set");
  PlannerSpecSet set;
  try {
    spec_header_from_json(doc, set.common);
    for (const auto& [sid, body] : doc.at("samples").items()) {
      SyntheticPlannerSpec s = set.common;
      spec_body_from_json(body, s);
      set.per_sample.emplace(sid, std::move(s));
    }
  } catch (const json::exception& e) {
    throw ValidationError("planner set schema error in " + path.string() + ": " + e.what());
  }
  return set;
}

void save_planner_set(const PlannerSpecSet& set, const std::filesystem::path& path) {
  json doc = spec_header_to_json(set.common);
  json samples = json::object();
  for (const auto& [sid, s] : set.per_sample) samples[sid] = spec_body_to_json(s);
  doc["samples"] = samples;
  std::ofstream out(path);
  if (!out) throw Error("cannot write planner set: " + path.string());
  out << doc.dump(2) << "\n";
}

// counting gate; std::counting_semaphore wants a compile-time ceiling
struct PlannerHandle::Gate {
  explicit Gate(int slots) : slots_(slots) {}
  void acquire() {
    std::unique_lock<std::mutex> lock(m_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(m_);
      ++slots_;
    }
    cv_.notify_one();
  }
  std::mutex m_;
  std::condition_variable cv_;
  int slots_;
};

PlannerHandle::PlannerHandle(std::shared_ptr<Planner> backend, int max_in_flight)
    : backend_(std::move(backend)),
      max_in_flight_(std::max(1, max_in_flight)),
      gate_(std::make_shared<Gate>(std::max(1, max_in_flight))) {
  if (!backend_) throw ArgumentError("null planner backend");
  if (backend_->horizon() < 1) throw ArgumentError("planner horizon must be >= 1");
}

Trajectory PlannerHandle::plan(const ViewTensor& x, const RegionSet* kept) const {
  gate_->acquire();
  calls_.fetch_add(1);
  try {
    Trajectory out = backend_->plan(x, kept);
    gate_->release();
    return out;
  } catch (...) {
    gate_->release();
    throw;
  }
}

std::vector<Trajectory> PlannerHandle::plan_batch(const std::vector<ViewTensor>& xs) const {
  if (xs.empty()) throw ArgumentError("plan_batch requires a nonempty list");
  std::vector<Trajectory> out(xs.size());
  std::vector<std::exception_ptr> errors(xs.size());

  const int workers = std::min<int>(max_in_flight_, static_cast<int>(xs.size()));
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= xs.size()) return;
      try {
        out[i] = plan(xs[i], nullptr);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    const std::string at = "plan_batch element " + std::to_string(i) + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const TransportError& e) {
      throw TransportError(at + e.what());
    } catch (const ArgumentError& e) {
      throw ArgumentError(at + e.what());
    } catch (const std::exception& e) {
      throw Error(at + e.what());
    }
  }
  return out;
}

}  // namespace planrisk
