#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "planrisk/partition.hpp"
#include "planrisk/tensor.hpp"
#include "planrisk/types.hpp"

namespace planrisk {

// Black-box planner: tensor in, trajectory out. `kept` is the side channel the
// synthetic backends use to read region survival exactly; external backends
// ignore it and see only the tensor, nullptr means "full input".
class Planner {
 public:
  virtual ~Planner() = default;
  virtual Trajectory plan(const ViewTensor& x, const RegionSet* kept) = 0;
  virtual int horizon() const = 0;
};

// Planted synthetic planner. Modular kind: output on kept-set S is
// base - sum of offsets[r] over removed regions r. Saturating kind clamps the
// summed per-waypoint offset to norm <= saturation before subtracting, which
// induces diminishing returns.
struct SyntheticPlannerSpec {
  enum class Kind { kModular, kSaturating };
  Kind kind = Kind::kModular;
  int cameras = 0, channels = 0, height = 0, width = 0;
  float baseline = 0.0f;
  Trajectory base;
  std::map<std::int32_t, Trajectory> offsets;  // region id -> per-waypoint offset
  double saturation = 1.0;
  // When set, tensor-only queries (no kept side channel, e.g. over the wire)
  // recover survival by checking each grid region for an all-baseline patch.
  std::optional<std::pair<int, int>> detect_grid;
};

std::shared_ptr<Planner> make_synthetic_planner(SyntheticPlannerSpec spec);

SyntheticPlannerSpec load_planner_spec(const std::filesystem::path& path);
void save_planner_spec(const SyntheticPlannerSpec& spec, const std::filesystem::path& path);

// Per-sample planted specs sharing one configuration (synthetic dataset file).
struct PlannerSpecSet {
  SyntheticPlannerSpec common;  // base/offsets empty; carries kind, dims, grid
  std::map<std::string, SyntheticPlannerSpec> per_sample;

  const SyntheticPlannerSpec& for_sample(const std::string& sample_id) const;
};

PlannerSpecSet load_planner_set(const std::filesystem::path& path);
void save_planner_set(const PlannerSpecSet& set, const std::filesystem::path& path);

// Shareable wrapper: counts every backend call and enforces the max-in-flight
// limit. plan is deterministic whenever the backend is.
class PlannerHandle {
 public:
  PlannerHandle(std::shared_ptr<Planner> backend, int max_in_flight = 1);

  Trajectory plan(const ViewTensor& x, const RegionSet* kept = nullptr) const;

  // Order-preserving, elementwise equal to sequential plan calls; runs up to
  // max_in_flight queries concurrently. A failing element aborts the batch
  // with an error naming the lowest failed index.
  std::vector<Trajectory> plan_batch(const std::vector<ViewTensor>& xs) const;

  int horizon() const { return backend_->horizon(); }
  int max_in_flight() const { return max_in_flight_; }
  std::uint64_t call_count() const { return calls_.load(); }
  void reset_call_count() { calls_.store(0); }

 private:
  std::shared_ptr<Planner> backend_;
  int max_in_flight_;
  mutable std::atomic<std::uint64_t> calls_{0};
  struct Gate;
  std::shared_ptr<Gate> gate_;
};

}  // namespace planrisk
