#include "planrisk/attribution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "planrisk/errors.hpp"
#include "planrisk/parallel.hpp"
#include "planrisk/rng.hpp"

namespace planrisk {

using nlohmann::json;

ObjectiveEvaluator::ObjectiveEvaluator(const PlannerHandle& planner, const ViewTensor& x,
                                       const RegionPartition& partition,
                                       const ObjectiveConfig& cfg)
    : planner_(planner), x_(x), partition_(partition), cfg_(cfg) {
  if (!(cfg_.lambda_suf >= 0 && cfg_.lambda_nec >= 0 && cfg_.lambda_suf + cfg_.lambda_nec > 0)) {
    throw ArgumentError("objective weights must be nonnegative with a positive sum");
  }
  calls_.fetch_add(1);
  y_full_ = planner_.plan(x_, nullptr);
}

Trajectory ObjectiveEvaluator::masked_plan(const RegionSet& kept) const {
  const ViewTensor masked = mask_views(x_, partition_, kept, cfg_.baseline);
  calls_.fetch_add(1);
  return planner_.plan(masked, &kept);
}

double ObjectiveEvaluator::suff(const RegionSet& kept) const {
  return -trajectory_distance(masked_plan(kept), y_full_);
}

double ObjectiveEvaluator::nec(const RegionSet& removed) const {
  const RegionSet survivors = removed.complement(partition_.region_count());
  return trajectory_distance(masked_plan(survivors), y_full_);
}

double ObjectiveEvaluator::evaluate(const RegionSet& kept) const {
  evaluations_.fetch_add(1);
  return cfg_.lambda_suf * suff(kept) + cfg_.lambda_nec * nec(kept);
}

double ObjectiveEvaluator::d0() const {
  std::call_once(d0_once_, [&] {
    d0_ = trajectory_distance(masked_plan(RegionSet{}), y_full_);
  });
  return d0_;
}

double ObjectiveEvaluator::empty_value() const { return -cfg_.lambda_suf * d0(); }

double ObjectiveEvaluator::score01(const RegionSet& kept) const {
  const double denom = d0();
  if (denom == 0.0) return 1.0;
  const double dist = trajectory_distance(masked_plan(kept), y_full_);
  return std::max(0.0, 1.0 - dist / denom);
}

double suff_score(const PlannerHandle& h, const ViewTensor& x, const RegionPartition& p,
                  const RegionSet& s, const ObjectiveConfig& cfg) {
  return ObjectiveEvaluator(h, x, p, cfg).suff(s);
}

double nec_score(const PlannerHandle& h, const ViewTensor& x, const RegionPartition& p,
                 const RegionSet& s, const ObjectiveConfig& cfg) {
  return ObjectiveEvaluator(h, x, p, cfg).nec(s);
}

double objective(const PlannerHandle& h, const ViewTensor& x, const RegionPartition& p,
                 const RegionSet& s, const ObjectiveConfig& cfg) {
  return ObjectiveEvaluator(h, x, p, cfg).evaluate(s);
}

namespace {

// One greedy ranking pass over `items`, where selecting item i means adding
// expand(i) to the running kept-set. Candidate scores within a step are
// gathered (possibly in parallel) and the argmax applied serially, so the
// outcome is independent of scheduling; ties break to the lowest item.
struct GreedyOutcome {
  std::vector<std::int32_t> order;
  std::vector<double> gains;
  std::vector<std::uint64_t> step_calls;
  std::vector<double> cumulative;  // objective value after each step
};

template <typename ExpandFn>
GreedyOutcome greedy_rank(const ObjectiveEvaluator& eval, std::vector<std::int32_t> items,
                          const RegionSet& prefix, double prefix_value, int budget,
                          bool early_stop_negative, int jobs, ExpandFn&& expand) {
  GreedyOutcome out;
  RegionSet selected = prefix;
  double current = prefix_value;
  const int steps = std::min<int>(budget, static_cast<int>(items.size()));
  for (int step = 0; step < steps; ++step) {
    std::vector<double> values(items.size());
    const std::uint64_t before = eval.planner_calls();
    parallel_for(items.size(), jobs, [&](std::size_t i) {
      values[i] = eval.evaluate(selected.unite(expand(items[i])));
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < items.size(); ++i) {
      if (values[i] > values[best]) best = i;  // items ascend, so ties keep the lowest
    }
    const double gain = values[best] - current;
    if (early_stop_negative && gain < 0) break;
    out.order.push_back(items[best]);
    out.gains.push_back(gain);
    out.step_calls.push_back(eval.planner_calls() - before);
    current = values[best];
    out.cumulative.push_back(current);
    selected = selected.unite(expand(items[best]));
    items.erase(items.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

SaliencyTensor assemble_saliency(const RegionPartition& p,
                                 const std::vector<std::int32_t>& ids,
                                 const std::vector<double>& values, bool area_normalize) {
  SaliencyTensor t;
  t.cameras = p.labels.cameras;
  t.height = p.labels.height;
  t.width = p.labels.width;
  t.data.assign(t.size(), 0.0f);
  const std::size_t plane = static_cast<std::size_t>(t.height) * t.width;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& reg = p.regions[ids[i]];
    double v = values[i];
    if (area_normalize) v /= static_cast<double>(reg.pixel_count);
    const float fv = static_cast<float>(v);
    for (std::int32_t off : p.pixels[ids[i]]) {
      t.data[static_cast<std::size_t>(reg.camera) * plane + off] = fv;
    }
  }
  return t;
}

int effective_budget(int requested, int universe) {
  if (requested < 0) return universe;
  if (requested < 1) throw ArgumentError("search budget must be >= 1");
  return std::min(requested, universe);
}

}  // namespace

OrderedSelection exact_greedy(const PlannerHandle& h, const ViewTensor& x,
                              const RegionPartition& p, const ObjectiveConfig& cfg,
                              const SearchConfig& search) {
  const ObjectiveEvaluator eval(h, x, p, cfg);
  const int budget = effective_budget(search.budget, p.region_count());
  std::vector<std::int32_t> items(p.region_count());
  for (std::int32_t i = 0; i < p.region_count(); ++i) items[i] = i;
  auto outcome =
      greedy_rank(eval, std::move(items), RegionSet{}, eval.empty_value(), budget,
                  search.early_stop_negative, search.jobs,
                  [](std::int32_t id) { return RegionSet({id}); });
  return {std::move(outcome.order), std::move(outcome.gains), std::move(outcome.step_calls)};
}

AttributionResult exact_attribute(const PlannerHandle& h, const ViewTensor& x,
                                  const RegionPartition& p, const ObjectiveConfig& cfg,
                                  const SearchConfig& search) {
  const auto t0 = std::chrono::steady_clock::now();
  const ObjectiveEvaluator eval(h, x, p, cfg);
  const int budget = effective_budget(search.budget, p.region_count());
  std::vector<std::int32_t> items(p.region_count());
  for (std::int32_t i = 0; i < p.region_count(); ++i) items[i] = i;
  auto outcome =
      greedy_rank(eval, std::move(items), RegionSet{}, eval.empty_value(), budget,
                  search.early_stop_negative, search.jobs,
                  [](std::int32_t id) { return RegionSet({id}); });

  AttributionResult r;
  r.method = "exact";
  r.selection = {outcome.order, outcome.gains, outcome.step_calls};
  r.saliency = assemble_saliency(p, outcome.order, outcome.gains, search.area_normalize);
  r.planner_calls = eval.planner_calls();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

AttributionResult hierarchical_attribute(const PlannerHandle& h, const ViewTensor& x,
                                         const RegionPartition& p, const GroupAssignment& g,
                                         const ObjectiveConfig& cfg, const SearchConfig& search) {
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& grp : g.groups) {
    if (grp.members.empty()) throw ArgumentError("group assignment contains an empty group");
  }
  std::size_t covered = 0;
  for (const auto& grp : g.groups) covered += grp.members.size();
  if (covered != static_cast<std::size_t>(p.region_count())) {
    throw ArgumentError("group assignment does not partition the regions");
  }

  const ObjectiveEvaluator eval(h, x, p, cfg);
  const int budget = effective_budget(search.budget, p.region_count());
  const int coarse_budget = effective_budget(search.coarse_budget, static_cast<int>(g.groups.size()));

  // Coarse stage: greedy over groups with the same objective, group unions as
  // the search unit.
  std::vector<std::int32_t> group_ids(g.groups.size());
  for (std::size_t i = 0; i < g.groups.size(); ++i) group_ids[i] = static_cast<std::int32_t>(i);
  auto member_set = [&](std::int32_t gid) { return RegionSet(g.groups[gid].members); };
  auto coarse = greedy_rank(eval, std::move(group_ids), RegionSet{}, eval.empty_value(),
                            coarse_budget, search.early_stop_negative, search.jobs, member_set);

  // The prefix C_j for refinement of the j-th selected group, plus the
  // objective value at that prefix (known from the coarse pass).
  std::vector<RegionSet> prefixes(coarse.order.size());
  std::vector<double> prefix_values(coarse.order.size());
  {
    RegionSet acc;
    double value = eval.empty_value();
    for (std::size_t j = 0; j < coarse.order.size(); ++j) {
      prefixes[j] = acc;
      prefix_values[j] = value;
      acc = acc.unite(member_set(coarse.order[j]));
      value = coarse.cumulative[j];
    }
  }

  // Only groups that can still contribute to the region budget get refined.
  std::size_t refine_count = 0, budget_left = static_cast<std::size_t>(budget);
  while (refine_count < coarse.order.size() && budget_left > 0) {
    const auto& members = g.groups[coarse.order[refine_count]].members;
    const std::size_t take = std::min<std::size_t>(members.size(), budget_left);
    budget_left -= take;
    ++refine_count;
  }

  std::vector<GreedyOutcome> refined(refine_count);
  parallel_for(refine_count, search.jobs, [&](std::size_t j) {
    const auto& grp = g.groups[coarse.order[j]];
    if (grp.members.size() == 1) {
      // F(C_j + {v}) is exactly the coarse step's value; reuse it
      refined[j].order = grp.members;
      refined[j].gains = {coarse.gains[j]};
      refined[j].step_calls = {0};
      return;
    }
    std::vector<std::int32_t> members = grp.members;
    std::sort(members.begin(), members.end());
    const int member_budget =
        search.refine_budget < 0 ? static_cast<int>(members.size())
                                 : std::min<int>(search.refine_budget, static_cast<int>(members.size()));
    // refinements nest inside the group-level parallel loop; keep them serial
    refined[j] = greedy_rank(eval, std::move(members), prefixes[j], prefix_values[j],
                             member_budget, search.early_stop_negative, /*jobs=*/1,
                             [](std::int32_t id) { return RegionSet({id}); });
  });

  AttributionResult r;
  r.method = "hierarchical";
  for (std::size_t j = 0; j < refine_count; ++j) {
    for (std::size_t i = 0; i < refined[j].order.size(); ++i) {
      if (static_cast<int>(r.selection.ids.size()) >= budget) break;
      r.selection.ids.push_back(refined[j].order[i]);
      r.selection.gains.push_back(refined[j].gains[i]);
      r.selection.step_planner_calls.push_back(refined[j].step_calls[i]);
    }
  }
  r.saliency = assemble_saliency(p, r.selection.ids, r.selection.gains, search.area_normalize);
  r.planner_calls = eval.planner_calls();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

AttributionResult rise_attribute(const PlannerHandle& h, const ViewTensor& x,
                                 const RegionPartition& p, int num_masks, double keep_prob,
                                 std::uint64_t seed, const ObjectiveConfig& cfg, int jobs) {
  if (num_masks < 1) throw ArgumentError("rise needs at least one mask");
  if (!(keep_prob > 0.0 && keep_prob < 1.0)) throw ArgumentError("keep_prob must be in (0, 1)");

  const auto t0 = std::chrono::steady_clock::now();
  const ObjectiveEvaluator eval(h, x, p, cfg);
  const std::int32_t n = p.region_count();

  // Draw all kept-sets up front from per-mask derived streams; mask i is
  // reproducible independent of evaluation order.
  std::vector<std::vector<std::uint8_t>> member(num_masks,
                                                std::vector<std::uint8_t>(n, 0));
  for (int i = 0; i < num_masks; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    for (std::int32_t r = 0; r < n; ++r) member[i][r] = rng.bernoulli(keep_prob) ? 1 : 0;
  }

  std::vector<double> scores(num_masks, 0.0);
  parallel_for(static_cast<std::size_t>(num_masks), jobs, [&](std::size_t i) {
    std::vector<std::int32_t> ids;
    for (std::int32_t r = 0; r < n; ++r) {
      if (member[i][r]) ids.push_back(r);
    }
    scores[i] = eval.score01(RegionSet(std::move(ids)));
  });

  std::vector<double> importance(n, 0.0);
  for (int i = 0; i < num_masks; ++i) {
    for (std::int32_t r = 0; r < n; ++r) {
      if (member[i][r]) importance[r] += scores[i];
    }
  }
  const double denom = static_cast<double>(num_masks) * keep_prob;
  for (auto& v : importance) v /= denom;

  AttributionResult r;
  r.method = "rise";
  std::vector<std::int32_t> order(n);
  for (std::int32_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (importance[a] != importance[b]) return importance[a] > importance[b];
    return a < b;
  });
  r.selection.ids = order;
  r.selection.gains.reserve(n);
  for (std::int32_t id : order) r.selection.gains.push_back(importance[id]);
  // all planner calls happen during sampling, not per ordering step
  r.selection.step_planner_calls.assign(n, 0);

  std::vector<std::int32_t> all_ids(n);
  for (std::int32_t i = 0; i < n; ++i) all_ids[i] = i;
  r.saliency = assemble_saliency(p, all_ids, importance, false);
  r.planner_calls = eval.planner_calls();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void save_attribution(const AttributionResult& r, const std::filesystem::path& saliency_path,
                      const std::filesystem::path& sidecar_path, const ObjectiveConfig& cfg,
                      const SearchConfig& search) {
  write_tensor(r.saliency, saliency_path);
  json doc;
  doc["method"] = r.method;
  doc["lambda_suf"] = cfg.lambda_suf;
  doc["lambda_nec"] = cfg.lambda_nec;
  doc["baseline"] = cfg.baseline;
  doc["seed"] = search.seed;
  doc["budget"] = search.budget;
  doc["coarse_budget"] = search.coarse_budget;
  doc["refine_budget"] = search.refine_budget;
  doc["area_normalize"] = search.area_normalize;
  doc["planner_calls"] = r.planner_calls;
  doc["selection"] = r.selection.ids;
  doc["gains"] = r.selection.gains;
  doc["step_planner_calls"] = r.selection.step_planner_calls;
  if (r.method == "rise") {
    doc["score_normalization"] = "s = max(0, 1 - L2/D0), D0 = L2(y(empty), y)";
  }
  std::ofstream out(sidecar_path);
  if (!out) throw Error("cannot write attribution sidecar: " + sidecar_path.string());
  out << doc.dump(2) << "\n";
}

AttributionResult load_attribution(const std::filesystem::path& saliency_path,
                                   const std::filesystem::path& sidecar_path) {
  AttributionResult r;
  r.saliency = read_saliency_tensor(saliency_path);
  std::ifstream in(sidecar_path);
  if (!in) throw ValidationError("cannot open attribution sidecar: " + sidecar_path.string());
  json doc;
  try {
    in >> doc;
    r.method = doc.at("method").get<std::string>();
    r.selection.ids = doc.at("selection").get<std::vector<std::int32_t>>();
    r.selection.gains = doc.at("gains").get<std::vector<double>>();
    r.selection.step_planner_calls =
        doc.at("step_planner_calls").get<std::vector<std::uint64_t>>();
    r.planner_calls = doc.at("planner_calls").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError("attribution sidecar schema error in " + sidecar_path.string() + ": " +
                          e.what());
  }
  return r;
}

}  // namespace planrisk
