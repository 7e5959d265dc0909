#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "planrisk/tensor.hpp"

namespace planrisk {

// Candidate subset S: sorted unique region ids. Keeping it sorted gives every
// consumer (masking, planner offset sums) one canonical iteration order.
class RegionSet {
 public:
  RegionSet() = default;
  explicit RegionSet(std::vector<std::int32_t> ids);

  bool contains(std::int32_t id) const;
  RegionSet with(std::int32_t id) const;          // copy + insert
  RegionSet unite(const RegionSet& other) const;  // set union
  RegionSet complement(std::int32_t universe_size) const;

  const std::vector<std::int32_t>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  bool operator==(const RegionSet&) const = default;

 private:
  std::vector<std::int32_t> ids_;
};

struct RegionInfo {
  std::int32_t id = 0;
  int camera = 0;
  std::int64_t pixel_count = 0;
  double centroid_u = 0.0;  // row
  double centroid_v = 0.0;  // col
};

// Per-camera region label maps with labels globally unique and dense across
// cameras. pixels[id] lists (u*W + v) offsets within the region's camera plane.
struct RegionPartition {
  LabelTensor labels;
  std::vector<RegionInfo> regions;
  std::vector<std::vector<std::int32_t>> pixels;

  std::int32_t region_count() const { return static_cast<std::int32_t>(regions.size()); }
  RegionSet all_regions() const;
};

// region id -> group id; every group's members share one camera.
struct GroupAssignment {
  std::vector<std::int32_t> group_of;  // indexed by region id
  struct Group {
    std::int32_t id = 0;
    int camera = 0;
    std::vector<std::int32_t> members;
  };
  std::vector<Group> groups;
};

// Tiles each camera into rows x cols rectangles; remainder pixels are absorbed
// by the last row/column. Labels are camera-major, then row-major over tiles.
RegionPartition grid_partition(int cameras, int height, int width, int rows, int cols);

// SLICO-style superpixels per camera over (mean-channel intensity, u, v), with
// per-cluster adaptive compactness and a 4-connectivity repair pass. Final
// region count may drift within roughly +/-30% of the target.
RegionPartition slic_partition(const ViewTensor& x, int regions_per_camera,
                               double compactness, int iterations);

// Overlays each camera with a group_rows x group_cols coarse grid and assigns
// every region to the half-open cell containing its centroid.
GroupAssignment group_regions(const RegionPartition& p, int group_rows, int group_cols);

// Singleton grouping: one group per region (hierarchy-collapse configuration).
GroupAssignment singleton_groups(const RegionPartition& p);

// Copies the pixels of kept regions (all channels) and fills the rest with the
// baseline value. The input is unchanged.
ViewTensor mask_views(const ViewTensor& x, const RegionPartition& p, const RegionSet& kept,
                      float baseline);

// Serialization: label map as an int32 "MVTN" tensor plus a JSON region table.
void save_partition(const RegionPartition& p, const std::filesystem::path& labels_path,
                    const std::filesystem::path& regions_path);
RegionPartition load_partition(const std::filesystem::path& labels_path,
                               const std::filesystem::path& regions_path);

}  // namespace planrisk
