#include "planrisk/submodular.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "planrisk/errors.hpp"
#include "planrisk/rng.hpp"

namespace planrisk {

double eval_coverage(const CoverageFunction& f, const std::vector<int>& s) {
  std::vector<char> covered(f.element_weights.size(), 0);
  for (int v : s) {
    if (v < 0 || v >= f.universe()) throw ArgumentError("region outside coverage universe");
    for (int e : f.covers[v]) covered[e] = 1;
  }
  double acc = 0.0;
  for (std::size_t e = 0; e < covered.size(); ++e) {
    if (covered[e]) acc += f.element_weights[e];
  }
  return acc;
}

SetFunction coverage_as_set_function(const CoverageFunction& f) {
  return [f](std::uint32_t mask) {
    std::vector<int> s;
    for (int v = 0; v < f.universe(); ++v) {
      if (mask & (1u << v)) s.push_back(v);
    }
    return eval_coverage(f, s);
  };
}

PropertyReport check_properties(const SetFunction& f, int n) {
  if (n < 0 || n > 12) throw ArgumentError("exhaustive property check limited to n <= 12");
  const std::uint32_t full = n == 32 ? 0xffffffffu : ((1u << n) - 1);
  // tiny slack absorbs float noise in accumulated sums
  constexpr double kTol = 1e-9;

  std::vector<double> value(static_cast<std::size_t>(full) + 1);
  for (std::uint32_t s = 0; s <= full; ++s) value[s] = f(s);

  PropertyReport report;
  report.normalized = std::abs(value[0]) <= kTol;

  report.monotone = true;
  report.submodular = true;
  // enumerate A as a strict submask of B via the standard subset walk
  for (std::uint32_t b = 0; b <= full && (report.monotone || report.submodular); ++b) {
    for (std::uint32_t a = b;; a = (a - 1) & b) {
      if (report.monotone && value[a] > value[b] + kTol) {
        report.monotone = false;
        report.monotone_witness = {a, b, -1, value[a], value[b]};
      }
      if (report.submodular) {
        for (int h = 0; h < n; ++h) {
          const std::uint32_t bit = 1u << h;
          if (b & bit) continue;
          const double lhs = value[a | bit] - value[a];
          const double rhs = value[b | bit] - value[b];
          if (lhs + kTol < rhs) {
            report.submodular = false;
            report.submodular_witness = {a, b, h, lhs, rhs};
            break;
          }
        }
      }
      if (a == 0) break;
    }
  }
  return report;
}

PropertyReport check_grouped(const SetFunction& f, const std::vector<std::uint32_t>& group_masks) {
  const int m = static_cast<int>(group_masks.size());
  if (m > 10) throw ArgumentError("grouped property check limited to 10 groups");
  auto grouped = [&, f](std::uint32_t group_subset) {
    std::uint32_t atoms = 0;
    for (int g = 0; g < m; ++g) {
      if (group_subset & (1u << g)) atoms |= group_masks[g];
    }
    return f(atoms);
  };
  return check_properties(grouped, m);
}

GreedyRatio greedy_ratio(const SetFunction& f, int n, int budget) {
  if (n < 1 || n > 16) throw ArgumentError("brute-force optimum limited to n <= 16");
  if (budget < 1) throw ArgumentError("budget must be >= 1");
  budget = std::min(budget, n);

  GreedyRatio out;
  std::uint32_t selected = 0;
  double current = f(0);
  for (int step = 0; step < budget; ++step) {
    int best = -1;
    double best_value = 0.0;
    for (int v = 0; v < n; ++v) {
      const std::uint32_t bit = 1u << v;
      if (selected & bit) continue;
      const double val = f(selected | bit);
      if (best == -1 || val > best_value) {  // ascending ids: ties keep the lowest
        best = v;
        best_value = val;
      }
    }
    selected |= 1u << best;
    current = best_value;
    out.greedy_order.push_back(best);
  }
  out.greedy_value = current;

  const std::uint32_t full = (n == 32) ? 0xffffffffu : ((1u << n) - 1);
  double opt = 0.0;
  for (std::uint32_t s = 0; s <= full; ++s) {
    if (std::popcount(s) > budget) continue;
    opt = std::max(opt, f(s));
  }
  out.optimum = opt;
  out.ratio = opt == 0.0 ? 1.0 : out.greedy_value / opt;
  return out;
}

CoverageFunction random_coverage(int regions, int elements, std::uint64_t seed) {
  Rng rng(seed);
  CoverageFunction f;
  f.element_weights.resize(elements);
  for (auto& w : f.element_weights) w = rng.uniform(0.0, 1.0);
  f.covers.resize(regions);
  for (auto& cover : f.covers) {
    for (int e = 0; e < elements; ++e) {
      if (rng.bernoulli(0.35)) cover.push_back(e);
    }
    // empty cover sets are legal but dull; give each region one element
    if (cover.empty()) {
      cover.push_back(static_cast<int>(rng.uniform_int(0, elements - 1)));
    }
  }
  return f;
}

}  // namespace planrisk
