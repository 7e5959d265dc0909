#include "planrisk/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include <json.hpp>

#include "planrisk/errors.hpp"

namespace planrisk {

using nlohmann::json;

RegionSet::RegionSet(std::vector<std::int32_t> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool RegionSet::contains(std::int32_t id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

RegionSet RegionSet::with(std::int32_t id) const {
  RegionSet out;
  out.ids_.reserve(ids_.size() + 1);
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  out.ids_.assign(ids_.begin(), it);
  if (it == ids_.end() || *it != id) out.ids_.push_back(id);
  out.ids_.insert(out.ids_.end(), it, ids_.end());
  return out;
}

RegionSet RegionSet::unite(const RegionSet& other) const {
  RegionSet out;
  std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                 std::back_inserter(out.ids_));
  return out;
}

RegionSet RegionSet::complement(std::int32_t universe_size) const {
  RegionSet out;
  out.ids_.reserve(universe_size - ids_.size());
  std::size_t k = 0;
  for (std::int32_t id = 0; id < universe_size; ++id) {
    if (k < ids_.size() && ids_[k] == id) {
      ++k;
    } else {
      out.ids_.push_back(id);
    }
  }
  return out;
}

RegionSet RegionPartition::all_regions() const {
  std::vector<std::int32_t> ids(regions.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int32_t>(i);
  return RegionSet(std::move(ids));
}

namespace {

// Rebuilds the region table and pixel lists from a finished label map.
// Labels must already be dense 0..N-1 and camera-local.
void finalize_partition(RegionPartition& p) {
  std::int32_t max_label = -1;
  for (auto l : p.labels.data) max_label = std::max(max_label, l);
  const std::int32_t n = max_label + 1;
  p.regions.assign(n, {});
  p.pixels.assign(n, {});
  std::vector<double> sum_u(n, 0.0), sum_v(n, 0.0);
  const int H = p.labels.height, W = p.labels.width;
  for (int c = 0; c < p.labels.cameras; ++c) {
    for (int u = 0; u < H; ++u) {
      for (int v = 0; v < W; ++v) {
        const std::int32_t id = p.labels.at(c, u, v);
        auto& r = p.regions[id];
        if (r.pixel_count == 0) {
          r.id = id;
          r.camera = c;
        }
        r.pixel_count++;
        sum_u[id] += u;
        sum_v[id] += v;
        p.pixels[id].push_back(u * W + v);
      }
    }
  }
  for (std::int32_t id = 0; id < n; ++id) {
    auto& r = p.regions[id];
    if (r.pixel_count == 0) throw Error("partition produced an empty label");
    r.centroid_u = sum_u[id] / static_cast<double>(r.pixel_count);
    r.centroid_v = sum_v[id] / static_cast<double>(r.pixel_count);
  }
}

// Band edge positions for a rows-way split of extent n: uniform floor(n/rows)
// bands, last band absorbs the remainder.
int band_of(int coord, int n, int bands) {
  const int base = n / bands;
  const int b = coord / base;
  return b >= bands ? bands - 1 : b;
}

}  // namespace

RegionPartition grid_partition(int cameras, int height, int width, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw ArgumentError("grid rows/cols must be positive");
  if (rows > height || cols > width) throw ArgumentError("grid finer than image");

  RegionPartition p;
  p.labels.cameras = cameras;
  p.labels.height = height;
  p.labels.width = width;
  p.labels.data.resize(p.labels.size());
  for (int c = 0; c < cameras; ++c) {
    for (int u = 0; u < height; ++u) {
      const int ru = band_of(u, height, rows);
      for (int v = 0; v < width; ++v) {
        const int rv = band_of(v, width, cols);
        p.labels.at(c, u, v) = static_cast<std::int32_t>((c * rows + ru) * cols + rv);
      }
    }
  }
  finalize_partition(p);
  return p;
}

namespace {

struct SlicCluster {
  double intensity = 0.0;
  double u = 0.0, v = 0.0;
  double max_color_dist = 1.0;  // SLICO adaptive compactness, per cluster
  std::int64_t count = 0;
};

// Relabels every 4-connected component that is not its label's largest to the
// dominant neighboring label.
void enforce_connectivity(LabelTensor& labels, int camera, std::int32_t label_lo,
                          std::int32_t label_hi) {
  const int H = labels.height, W = labels.width;
  std::vector<std::int32_t> comp(static_cast<std::size_t>(H) * W, -1);
  struct Component {
    std::int32_t label;
    std::vector<int> cells;
  };
  std::vector<Component> comps;

  const int du[4] = {-1, 1, 0, 0};
  const int dv[4] = {0, 0, -1, 1};
  for (int u = 0; u < H; ++u) {
    for (int v = 0; v < W; ++v) {
      const int cell = u * W + v;
      if (comp[cell] != -1) continue;
      const std::int32_t label = labels.at(camera, u, v);
      const std::int32_t cid = static_cast<std::int32_t>(comps.size());
      comps.push_back({label, {}});
      std::queue<int> q;
      q.push(cell);
      comp[cell] = cid;
      while (!q.empty()) {
        const int cur = q.front();
        q.pop();
        comps[cid].cells.push_back(cur);
        const int cu = cur / W, cv = cur % W;
        for (int d = 0; d < 4; ++d) {
          const int nu = cu + du[d], nv = cv + dv[d];
          if (nu < 0 || nu >= H || nv < 0 || nv >= W) continue;
          const int ncell = nu * W + nv;
          if (comp[ncell] == -1 && labels.at(camera, nu, nv) == label) {
            comp[ncell] = cid;
            q.push(ncell);
          }
        }
      }
    }
  }

  // Largest component keeps its label.
  std::vector<std::int32_t> keeper(label_hi - label_lo, -1);
  for (std::int32_t cid = 0; cid < static_cast<std::int32_t>(comps.size()); ++cid) {
    const std::int32_t slot = comps[cid].label - label_lo;
    if (keeper[slot] == -1 || comps[cid].cells.size() > comps[keeper[slot]].cells.size()) {
      keeper[slot] = cid;
    }
  }

  // Orphans absorb into whichever neighboring label touches them most,
  // smallest orphan first so chains collapse toward real regions.
  std::vector<std::int32_t> order;
  for (std::int32_t cid = 0; cid < static_cast<std::int32_t>(comps.size()); ++cid) {
    if (keeper[comps[cid].label - label_lo] != cid) order.push_back(cid);
  }
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (comps[a].cells.size() != comps[b].cells.size()) {
      return comps[a].cells.size() < comps[b].cells.size();
    }
    return a < b;
  });
  for (std::int32_t cid : order) {
    std::vector<std::pair<std::int32_t, int>> votes;  // label -> touch count
    for (int cell : comps[cid].cells) {
      const int cu = cell / W, cv = cell % W;
      for (int d = 0; d < 4; ++d) {
        const int nu = cu + du[d], nv = cv + dv[d];
        if (nu < 0 || nu >= H || nv < 0 || nv >= W) continue;
        const std::int32_t nl = labels.at(camera, nu, nv);
        if (nl == labels.at(camera, cu, cv)) continue;
        bool found = false;
        for (auto& [l, n] : votes) {
          if (l == nl) {
            ++n;
            found = true;
            break;
          }
        }
        if (!found) votes.push_back({nl, 1});
      }
    }
    if (votes.empty()) continue;  // camera fully covered by one label
    std::sort(votes.begin(), votes.end(), [](auto a, auto b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const std::int32_t target = votes.front().first;
    for (int cell : comps[cid].cells) {
      labels.at(camera, cell / W, cell % W) = target;
    }
  }
}

}  // namespace

RegionPartition slic_partition(const ViewTensor& x, int regions_per_camera, double compactness,
                               int iterations) {
  const int C = x.cameras, H = x.height, W = x.width;
  if (regions_per_camera < 1) throw ArgumentError("regions_per_camera must be >= 1");
  if (regions_per_camera > H * W) throw ArgumentError("regions_per_camera exceeds pixel count");
  if (iterations < 1) throw ArgumentError("iterations must be >= 1");

  // Mean over channels as the color feature.
  std::vector<double> intensity(static_cast<std::size_t>(C) * H * W, 0.0);
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < x.channels; ++k) {
      for (int u = 0; u < H; ++u) {
        for (int v = 0; v < W; ++v) {
          intensity[(static_cast<std::size_t>(c) * H + u) * W + v] += x.at(c, k, u, v);
        }
      }
    }
  }
  for (auto& val : intensity) val /= x.channels;

  LabelTensor labels;
  labels.cameras = C;
  labels.height = H;
  labels.width = W;
  labels.data.assign(labels.size(), 0);

  const double spacing = std::sqrt(static_cast<double>(H) * W / regions_per_camera);
  const int search = std::max(1, static_cast<int>(std::ceil(2.0 * spacing)));
  std::int32_t next_label = 0;

  for (int c = 0; c < C; ++c) {
    // Seed on a near-regular grid.
    const int seed_rows = std::max(1, static_cast<int>(std::round(H / spacing)));
    const int seed_cols = std::max(
        1, static_cast<int>(std::round(static_cast<double>(regions_per_camera) / seed_rows)));
    std::vector<SlicCluster> clusters;
    for (int i = 0; i < seed_rows; ++i) {
      for (int j = 0; j < seed_cols; ++j) {
        SlicCluster cl;
        cl.u = (i + 0.5) * H / seed_rows;
        cl.v = (j + 0.5) * W / seed_cols;
        cl.u = std::min<double>(cl.u, H - 1);
        cl.v = std::min<double>(cl.v, W - 1);
        const int pu = static_cast<int>(cl.u), pv = static_cast<int>(cl.v);
        cl.intensity = intensity[(static_cast<std::size_t>(c) * H + pu) * W + pv];
        cl.max_color_dist = std::max(compactness, 1e-12);
        clusters.push_back(cl);
      }
    }

    std::vector<std::int32_t> assign(static_cast<std::size_t>(H) * W, 0);
    std::vector<double> best(static_cast<std::size_t>(H) * W);
    for (int it = 0; it < iterations; ++it) {
      std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
      for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        const auto& cl = clusters[ci];
        const int u0 = std::max(0, static_cast<int>(cl.u) - search);
        const int u1 = std::min(H - 1, static_cast<int>(cl.u) + search);
        const int v0 = std::max(0, static_cast<int>(cl.v) - search);
        const int v1 = std::min(W - 1, static_cast<int>(cl.v) + search);
        for (int u = u0; u <= u1; ++u) {
          for (int v = v0; v <= v1; ++v) {
            const std::size_t pix = static_cast<std::size_t>(u) * W + v;
            const double dc =
                intensity[(static_cast<std::size_t>(c) * H + u) * W + v] - cl.intensity;
            const double dsu = u - cl.u, dsv = v - cl.v;
            // SLICO distance: color normalized by the cluster's own running
            // maximum, space by the seed spacing.
            const double d = (dc * dc) / (cl.max_color_dist * cl.max_color_dist) +
                             (dsu * dsu + dsv * dsv) / (spacing * spacing);
            if (d < best[pix]) {
              best[pix] = d;
              assign[pix] = static_cast<std::int32_t>(ci);
            }
          }
        }
      }
      // Update centers and the per-cluster adaptive compactness.
      std::vector<double> su(clusters.size(), 0), sv(clusters.size(), 0),
          si(clusters.size(), 0), md(clusters.size(), 0);
      std::vector<std::int64_t> cnt(clusters.size(), 0);
      for (int u = 0; u < H; ++u) {
        for (int v = 0; v < W; ++v) {
          const std::size_t pix = static_cast<std::size_t>(u) * W + v;
          const std::int32_t ci = assign[pix];
          su[ci] += u;
          sv[ci] += v;
          si[ci] += intensity[(static_cast<std::size_t>(c) * H + u) * W + v];
          cnt[ci]++;
          md[ci] = std::max(
              md[ci],
              std::abs(intensity[(static_cast<std::size_t>(c) * H + u) * W + v] -
                       clusters[ci].intensity));
        }
      }
      for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        if (cnt[ci] == 0) continue;
        clusters[ci].u = su[ci] / cnt[ci];
        clusters[ci].v = sv[ci] / cnt[ci];
        clusters[ci].intensity = si[ci] / cnt[ci];
        clusters[ci].max_color_dist = std::max(md[ci], 1e-12);
        clusters[ci].count = cnt[ci];
      }
    }

    // Survivors get camera-local labels; empty clusters drop out.
    std::vector<std::int32_t> remap(clusters.size(), -1);
    const std::int32_t label_lo = next_label;
    std::vector<std::int64_t> final_cnt(clusters.size(), 0);
    for (auto a : assign) final_cnt[a]++;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      if (final_cnt[ci] > 0) remap[ci] = next_label++;
    }
    for (int u = 0; u < H; ++u) {
      for (int v = 0; v < W; ++v) {
        labels.at(c, u, v) = remap[assign[static_cast<std::size_t>(u) * W + v]];
      }
    }
    enforce_connectivity(labels, c, label_lo, next_label);
  }

  // Connectivity repair can empty labels entirely; re-densify.
  std::vector<std::int32_t> dense(next_label, -1);
  std::int32_t n_dense = 0;
  for (auto l : labels.data) {
    if (dense[l] == -1) dense[l] = 0;  // mark used
  }
  for (std::int32_t l = 0; l < next_label; ++l) {
    if (dense[l] == 0) dense[l] = n_dense++;
  }
  for (auto& l : labels.data) l = dense[l];

  RegionPartition p;
  p.labels = std::move(labels);
  finalize_partition(p);
  return p;
}

GroupAssignment group_regions(const RegionPartition& p, int group_rows, int group_cols) {
  if (group_rows <= 0 || group_cols <= 0) throw ArgumentError("group grid must be positive");
  const int H = p.labels.height, W = p.labels.width;

  GroupAssignment g;
  g.group_of.assign(p.regions.size(), -1);
  // group id = (camera * group_rows + cell_row) * group_cols + cell_col, then
  // compacted to drop empty cells.
  const std::int32_t raw_count =
      static_cast<std::int32_t>(p.labels.cameras) * group_rows * group_cols;
  std::vector<std::vector<std::int32_t>> members(raw_count);
  for (const auto& r : p.regions) {
    // centroid lies in exactly one half-open cell
    int cu = static_cast<int>(r.centroid_u * group_rows / H);
    int cv = static_cast<int>(r.centroid_v * group_cols / W);
    cu = std::min(cu, group_rows - 1);
    cv = std::min(cv, group_cols - 1);
    const std::int32_t raw = (static_cast<std::int32_t>(r.camera) * group_rows + cu) * group_cols + cv;
    members[raw].push_back(r.id);
  }
  for (std::int32_t raw = 0; raw < raw_count; ++raw) {
    if (members[raw].empty()) continue;
    GroupAssignment::Group grp;
    grp.id = static_cast<std::int32_t>(g.groups.size());
    grp.camera = p.regions[members[raw].front()].camera;
    grp.members = members[raw];
    for (auto rid : grp.members) g.group_of[rid] = grp.id;
    g.groups.push_back(std::move(grp));
  }
  return g;
}

GroupAssignment singleton_groups(const RegionPartition& p) {
  GroupAssignment g;
  g.group_of.resize(p.regions.size());
  g.groups.resize(p.regions.size());
  for (const auto& r : p.regions) {
    g.group_of[r.id] = r.id;
    g.groups[r.id] = {r.id, r.camera, {r.id}};
  }
  return g;
}

ViewTensor mask_views(const ViewTensor& x, const RegionPartition& p, const RegionSet& kept,
                      float baseline) {
  if (x.cameras != p.labels.cameras || x.height != p.labels.height ||
      x.width != p.labels.width) {
    throw ArgumentError("tensor shape does not match partition");
  }
  ViewTensor out;
  out.cameras = x.cameras;
  out.channels = x.channels;
  out.height = x.height;
  out.width = x.width;
  out.data.assign(x.data.size(), baseline);
  const std::size_t plane = static_cast<std::size_t>(x.height) * x.width;
  for (std::int32_t id : kept.ids()) {
    if (id < 0 || id >= p.region_count()) {
      throw ArgumentError("kept set contains region id outside the partition");
    }
    const int cam = p.regions[id].camera;
    for (std::int32_t off : p.pixels[id]) {
      for (int k = 0; k < x.channels; ++k) {
        const std::size_t base = (static_cast<std::size_t>(cam) * x.channels + k) * plane;
        out.data[base + off] = x.data[base + off];
      }
    }
  }
  return out;
}

void save_partition(const RegionPartition& p, const std::filesystem::path& labels_path,
                    const std::filesystem::path& regions_path) {
  write_tensor(p.labels, labels_path);
  json doc = json::array();
  for (const auto& r : p.regions) {
    doc.push_back(json{{"id", r.id},
                       {"camera", r.camera},
                       {"pixel_count", r.pixel_count},
                       {"centroid", {r.centroid_u, r.centroid_v}}});
  }
  std::ofstream out(regions_path);
  if (!out) throw Error("cannot write region table: " + regions_path.string());
  out << doc.dump(2) << "\n";
}

RegionPartition load_partition(const std::filesystem::path& labels_path,
                               const std::filesystem::path& regions_path) {
  RegionPartition p;
  p.labels = read_label_tensor(labels_path);
  finalize_partition(p);

  // Cross-check the stored table against the label map.
  std::ifstream in(regions_path);
  if (!in) throw ValidationError("cannot open region table: " + regions_path.string());
  json doc;
  in >> doc;
  if (doc.size() != p.regions.size()) {
    throw ValidationError("region table size does not match label map: " + regions_path.string());
  }
  for (const auto& jr : doc) {
    const std::int32_t id = jr.at("id").get<std::int32_t>();
    if (id < 0 || id >= p.region_count() || p.regions[id].camera != jr.at("camera").get<int>() ||
        p.regions[id].pixel_count != jr.at("pixel_count").get<std::int64_t>()) {
      throw ValidationError("region table disagrees with label map: " + regions_path.string());
    }
  }
  return p;
}

}  // namespace planrisk
