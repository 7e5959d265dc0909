#include "planrisk/faithfulness.hpp"

#include <algorithm>
#include <cmath>

#include "planrisk/errors.hpp"
#include "planrisk/parallel.hpp"

namespace planrisk {

namespace {

double trapezoid_auc(const std::vector<double>& ys) {
  // x spacing is uniform over [0, 1]
  const std::size_t n = ys.size();
  if (n < 2) return ys.empty() ? 0.0 : ys.front();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) acc += 0.5 * (ys[i] + ys[i + 1]);
  return acc / static_cast<double>(n - 1);
}

}  // namespace

FaithfulnessResult insertion_deletion(const PlannerHandle& h, const ViewTensor& x,
                                      const RegionPartition& p,
                                      const std::vector<std::int32_t>& ordering,
                                      const ObjectiveConfig& cfg, int jobs) {
  const std::int32_t n = p.region_count();

  // complete the ordering: unordered remainder appended in region-id order
  std::vector<char> seen(n, 0);
  std::vector<std::int32_t> full_order;
  full_order.reserve(n);
  for (std::int32_t id : ordering) {
    if (id < 0 || id >= n) throw ArgumentError("ordering references a region outside the partition");
    if (seen[id]) throw ArgumentError("ordering repeats a region id");
    seen[id] = 1;
    full_order.push_back(id);
  }
  for (std::int32_t id = 0; id < n; ++id) {
    if (!seen[id]) full_order.push_back(id);
  }

  const ObjectiveEvaluator eval(h, x, p, cfg);

  // prefix kept-sets for insertion; complements give the deletion sets
  std::vector<RegionSet> prefixes(n + 1);
  for (std::int32_t i = 0; i < n; ++i) {
    prefixes[i + 1] = prefixes[i].with(full_order[i]);
  }

  FaithfulnessResult out;
  out.insertion_curve.assign(n + 1, 0.0);
  out.deletion_curve.assign(n + 1, 0.0);
  parallel_for(static_cast<std::size_t>(n) + 1, jobs, [&](std::size_t i) {
    out.insertion_curve[i] = eval.score01(prefixes[i]);
    out.deletion_curve[i] = eval.score01(prefixes[i].complement(n));
  });

  out.insertion_auc = trapezoid_auc(out.insertion_curve);
  out.deletion_auc = trapezoid_auc(out.deletion_curve);

  // mean of the top ceil(10%) insertion scores
  std::vector<double> sorted = out.insertion_curve;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t top = static_cast<std::size_t>(
      std::ceil(0.10 * static_cast<double>(sorted.size())));
  double acc = 0.0;
  for (std::size_t i = 0; i < top; ++i) acc += sorted[i];
  out.s_high = acc / static_cast<double>(top);

  out.planner_calls = eval.planner_calls();
  return out;
}

}  // namespace planrisk
