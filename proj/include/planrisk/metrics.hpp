#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace planrisk {

// Mid-ranks with average-rank ties, 1-based.
std::vector<double> mid_ranks(const std::vector<double>& values);

// Pearson correlation of mid-ranks; missing when either vector is constant.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

// Mann-Whitney AUROC: (#concordant + 0.5 #tied) / (#pos #neg); missing when a
// class is absent.
std::optional<double> auroc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct BootstrapResult {
  double point = 0.0;
  double half_width = 0.0;
  int undefined_resamples = 0;
  bool flagged = false;  // metric undefined on more than 20% of resamples
};

// Scene-clustered bootstrap: scenes resampled with replacement (all samples of
// a chosen scene enter, multiplicity respected); half_width is
// (q0.975 - q0.025) / 2 of the resampled metric values. Deterministic by seed.
// `metric` receives the resampled row indices and may return nullopt.
BootstrapResult scene_bootstrap(
    const std::function<std::optional<double>(const std::vector<std::size_t>&)>& metric,
    const std::vector<std::vector<std::size_t>>& scene_rows, int resamples, double confidence,
    std::uint64_t seed);

// 80/20-style scene partitions: train size = round(train_frac * n_scenes),
// deterministic by seed, no scene on both sides.
struct SceneSplit {
  std::vector<std::size_t> train_scenes;
  std::vector<std::size_t> test_scenes;
};
std::vector<SceneSplit> scene_splits(std::size_t n_scenes, double train_frac, int n_splits,
                                     std::uint64_t seed);

// Positives are the ADE-top-10% (boundary ties broken by sample id, ascending);
// selected are the score-top-k%. Counts use ceil.
struct TriageResult {
  double recall = 0.0;
  double precision = 0.0;
  std::size_t positives = 0;
  std::size_t selected = 0;
  bool flagged = false;  // fewer than 10 samples
};
TriageResult triage(const std::vector<double>& scores, const std::vector<double>& ade_values,
                    const std::vector<std::string>& sample_ids, double budget_percent);

// Linear-interpolation quantile of a sorted copy of values, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace planrisk
