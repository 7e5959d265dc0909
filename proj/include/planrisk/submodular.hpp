#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace planrisk {

// Weighted coverage instance: the canonical normalized, monotone, submodular
// family used to exercise the grouped-domain properties.
struct CoverageFunction {
  std::vector<double> element_weights;          // w_e >= 0
  std::vector<std::vector<int>> covers;         // region -> covered element ids

  int universe() const { return static_cast<int>(covers.size()); }
};

// F(S) = sum of weights of elements covered by any region in S.
double eval_coverage(const CoverageFunction& f, const std::vector<int>& s);

// Set function over bitmask subsets of {0, ..., n-1}.
using SetFunction = std::function<double(std::uint32_t)>;

SetFunction coverage_as_set_function(const CoverageFunction& f);

struct PropertyWitness {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  int h = -1;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct PropertyReport {
  bool normalized = false;
  bool monotone = false;
  bool submodular = false;
  std::optional<PropertyWitness> monotone_witness;
  std::optional<PropertyWitness> submodular_witness;

  bool all() const { return normalized && monotone && submodular; }
};

// Exhaustive verification over 2^n subsets (n <= 12): F(empty) = 0,
// F(A) <= F(B) for A included in B, and diminishing returns.
PropertyReport check_properties(const SetFunction& f, int n);

// Builds F_grp(P) = F(union of the groups in P) and checks the grouped domain.
PropertyReport check_grouped(const SetFunction& f, const std::vector<std::uint32_t>& group_masks);

struct GreedyRatio {
  double greedy_value = 0.0;
  double optimum = 0.0;
  double ratio = 1.0;  // 1 when the optimum is 0
  std::vector<int> greedy_order;
};

// Marginal-gain greedy (ties to the lowest id, budget-only termination)
// against the exhaustive optimum over subsets of size <= budget.
GreedyRatio greedy_ratio(const SetFunction& f, int n, int budget);

// Seeded random coverage instance for the property harness.
CoverageFunction random_coverage(int regions, int elements, std::uint64_t seed);

}  // namespace planrisk
