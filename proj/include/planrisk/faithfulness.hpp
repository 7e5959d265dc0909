#pragma once

#include <cstdint>
#include <vector>

#include "planrisk/attribution.hpp"
#include "planrisk/partition.hpp"
#include "planrisk/planner.hpp"

namespace planrisk {

struct FaithfulnessResult {
  double insertion_auc = 0.0;
  double deletion_auc = 0.0;
  double s_high = 0.0;  // mean of the top 10% insertion-curve scores
  std::vector<double> insertion_curve;  // |V|+1 points, x = fraction inserted
  std::vector<double> deletion_curve;   // |V|+1 points, x = fraction deleted
  std::uint64_t planner_calls = 0;
};

// Planning score s(S) = max(0, 1 - ||y(S) - y|| / D0), all ones when D0 = 0.
// Insertion grows S from empty one region per step in attribution order;
// deletion shrinks S from V in the same order; AUC by trapezoid over all
// |V|+1 points. Regions missing from the ordering are appended in id order.
FaithfulnessResult insertion_deletion(const PlannerHandle& h, const ViewTensor& x,
                                      const RegionPartition& p,
                                      const std::vector<std::int32_t>& ordering,
                                      const ObjectiveConfig& cfg, int jobs = 1);

}  // namespace planrisk
