#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "planrisk/attribution.hpp"
#include "planrisk/planner.hpp"
#include "planrisk/types.hpp"

namespace planrisk {

// Seeded synthetic dataset with planted region dependencies, so attribution
// correctness is checkable against ground truth.
struct SynthSpec {
  int scenes = 5;
  int samples_per_scene = 4;
  int cameras = 6;
  int channels = 1;
  int height = 32;
  int width = 32;
  int regions_per_camera = 16;

  // concentrated: few colinear offsets with large mass (modular objective,
  // greedy-recoverable). diffuse: many small independent offsets.
  // single-camera: concentrated mass inside one view. mixed: per-sample draw.
  enum class Profile { kConcentrated, kDiffuse, kSingleCamera, kMixed };
  Profile profile = Profile::kConcentrated;

  double offset_scale = 1.0;
  int obstacle_density = 2;  // background boxes per timestep
  double noise_scale = 0.3;  // gt-trajectory noise, meters
  int horizon = 6;
  std::uint64_t seed = 1;
};

SynthSpec::Profile profile_from_string(const std::string& s);
const char* to_string(SynthSpec::Profile p);

struct SynthResult {
  SceneManifest manifest;                       // tensor paths relative to out dir
  std::vector<ViewTensor> tensors;              // aligned with manifest sample order
  PlannerSpecSet planners;
  // sample id -> planted region id -> flat-L2 offset norm (nonzero regions only)
  std::map<std::string, std::map<std::int32_t, double>> planted;
  std::size_t collision_count = 0;
  // grid used to key the planted offsets
  int grid_rows = 0;
  int grid_cols = 0;
};

SynthResult generate(const SynthSpec& spec);

// Persists manifest.json, tensors/, planners.json and planted.json under dir.
void write_synth(const SynthResult& result, const std::filesystem::path& dir);

// Fraction of planted offset mass captured by the attribution's top-K selected
// regions, K = number of planted nonzero regions. 1.0 when nothing is planted.
double recovery_score(const OrderedSelection& selection,
                      const std::map<std::int32_t, double>& planted_norms);

std::map<std::string, std::map<std::int32_t, double>> load_planted(
    const std::filesystem::path& path);

}  // namespace planrisk
