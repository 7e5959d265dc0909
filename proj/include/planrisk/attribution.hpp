#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "planrisk/partition.hpp"
#include "planrisk/planner.hpp"
#include "planrisk/tensor.hpp"
#include "planrisk/types.hpp"

namespace planrisk {

struct ObjectiveConfig {
  double lambda_suf = 1.0;
  double lambda_nec = 1.0;
  float baseline = 0.0f;
};

struct SearchConfig {
  int budget = -1;         // K, max regions selected; -1 means |V|
  int coarse_budget = -1;  // L_c, max groups ranked; -1 means all groups
  int refine_budget = -1;  // max members ranked per group; -1 means all
  std::uint64_t seed = 0;
  bool early_stop_negative = false;
  bool area_normalize = false;  // divide per-region saliency by pixel count
  int jobs = 1;
};

struct OrderedSelection {
  std::vector<std::int32_t> ids;
  std::vector<double> gains;                     // marginal gain per step
  std::vector<std::uint64_t> step_planner_calls;
};

struct AttributionResult {
  OrderedSelection selection;
  SaliencyTensor saliency;
  double wall_seconds = 0.0;
  std::uint64_t planner_calls = 0;
  std::string method;  // exact | hierarchical | rise
};

// Binds a planner to one sample. The full-input trajectory is computed once
// and cached; the empty-input trajectory (for F(empty) and the D0 normalizer)
// is computed lazily on first use. Every objective evaluation afterwards costs
// exactly two planner calls.
class ObjectiveEvaluator {
 public:
  ObjectiveEvaluator(const PlannerHandle& planner, const ViewTensor& x,
                     const RegionPartition& partition, const ObjectiveConfig& cfg);

  double suff(const RegionSet& kept) const;     // -||y(S) - y||, one call
  double nec(const RegionSet& removed) const;   // +||y(V\S) - y||, one call
  double evaluate(const RegionSet& kept) const; // combined objective, two calls

  // F(empty): the necessity term vanishes (x_V is x bit-exactly), leaving
  // -lambda_suf * D0.
  double empty_value() const;
  // ||y(empty) - y||; zero means the planner ignores the input entirely.
  double d0() const;
  // Planning score s(S) = max(0, 1 - ||y(S) - y|| / D0); all ones when D0 = 0.
  double score01(const RegionSet& kept) const;

  const Trajectory& full_trajectory() const { return y_full_; }
  std::uint64_t planner_calls() const { return calls_.load(); }
  std::uint64_t evaluations() const { return evaluations_.load(); }

 private:
  Trajectory masked_plan(const RegionSet& kept) const;

  const PlannerHandle& planner_;
  const ViewTensor& x_;
  const RegionPartition& partition_;
  ObjectiveConfig cfg_;
  Trajectory y_full_;
  mutable std::once_flag d0_once_;
  mutable double d0_ = 0.0;
  mutable std::atomic<std::uint64_t> calls_{0};
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

// One-off objective scores matching the evaluator semantics (each builds a
// throwaway evaluator; prefer the evaluator in loops).
double suff_score(const PlannerHandle& h, const ViewTensor& x, const RegionPartition& p,
                  const RegionSet& s, const ObjectiveConfig& cfg);
double nec_score(const PlannerHandle& h, const ViewTensor& x, const RegionPartition& p,
                 const RegionSet& s, const ObjectiveConfig& cfg);
double objective(const PlannerHandle& h, const ViewTensor& x, const RegionPartition& p,
                 const RegionSet& s, const ObjectiveConfig& cfg);

// Greedy marginal-gain search over individual regions. Step r selects the
// unselected region maximizing F(S + {v}); ties break to the lowest id. The
// budget alone terminates unless early_stop_negative is set.
OrderedSelection exact_greedy(const PlannerHandle& h, const ViewTensor& x,
                              const RegionPartition& p, const ObjectiveConfig& cfg,
                              const SearchConfig& search);

AttributionResult exact_attribute(const PlannerHandle& h, const ViewTensor& x,
                                  const RegionPartition& p, const ObjectiveConfig& cfg,
                                  const SearchConfig& search);

// Coarse-to-fine search: greedy over groups first (same objective, group
// unions as the search unit), then per-group refinement conditioned on all
// preceding groups. Refinements of distinct groups run independently.
AttributionResult hierarchical_attribute(const PlannerHandle& h, const ViewTensor& x,
                                         const RegionPartition& p, const GroupAssignment& g,
                                         const ObjectiveConfig& cfg, const SearchConfig& search);

// Region-level RISE: N Bernoulli(keep_prob) kept-sets, planning score
// s(S) = max(0, 1 - ||y(S)-y||/D0), importance_r = sum_i s_i [r in S_i] / (N keep_prob).
AttributionResult rise_attribute(const PlannerHandle& h, const ViewTensor& x,
                                 const RegionPartition& p, int num_masks, double keep_prob,
                                 std::uint64_t seed, const ObjectiveConfig& cfg, int jobs = 1);

// Sidecar serialization: saliency as a tensor file, selection + metadata as
// JSON. Wall-clock seconds deliberately stay out of the sidecar so identical
// runs produce identical bytes.
void save_attribution(const AttributionResult& r, const std::filesystem::path& saliency_path,
                      const std::filesystem::path& sidecar_path, const ObjectiveConfig& cfg,
                      const SearchConfig& search);
AttributionResult load_attribution(const std::filesystem::path& saliency_path,
                                   const std::filesystem::path& sidecar_path);

}  // namespace planrisk
