#include "planrisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "planrisk/errors.hpp"
#include "planrisk/rng.hpp"

namespace planrisk {

std::vector<double> mid_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // average rank over the tie block, 1-based; k + m/2 stays exact in binary
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ArgumentError("spearman: length mismatch");
  if (a.size() < 2) throw ArgumentError("spearman needs at least two points");
  const std::vector<double> ra = mid_ranks(a);
  const std::vector<double> rb = mid_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;  // constant vector
  return cov / std::sqrt(va * vb);
}

std::optional<double> auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ArgumentError("auroc: length mismatch");
  std::size_t pos = 0, neg = 0;
  for (bool l : labels) (l ? pos : neg)++;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // sweep tie blocks; positives in a block are concordant with all negatives
  // strictly below and tied with negatives in the block
  double concordant = 0.0;
  std::size_t neg_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    std::size_t block_pos = 0, block_neg = 0;
    for (std::size_t k = i; k <= j; ++k) (labels[order[k]] ? block_pos : block_neg)++;
    concordant += static_cast<double>(block_pos) *
                  (static_cast<double>(neg_below) + 0.5 * static_cast<double>(block_neg));
    neg_below += block_neg;
    i = j + 1;
  }
  return concordant / (static_cast<double>(pos) * static_cast<double>(neg));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

BootstrapResult scene_bootstrap(
    const std::function<std::optional<double>(const std::vector<std::size_t>&)>& metric,
    const std::vector<std::vector<std::size_t>>& scene_rows, int resamples, double confidence,
    std::uint64_t seed) {
  if (scene_rows.size() < 2) throw ArgumentError("scene_bootstrap needs at least two scenes");
  if (resamples < 1) throw ArgumentError("scene_bootstrap needs at least one resample");

  BootstrapResult out;
  std::vector<std::size_t> all_rows;
  for (const auto& s : scene_rows) all_rows.insert(all_rows.end(), s.begin(), s.end());
  const auto point = metric(all_rows);
  out.point = point.value_or(std::nan(""));

  const std::size_t n_scenes = scene_rows.size();
  std::vector<double> values;
  values.reserve(resamples);
  for (int b = 0; b < resamples; ++b) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<std::size_t> rows;
    for (std::size_t s = 0; s < n_scenes; ++s) {
      const auto pick = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(n_scenes) - 1));
      rows.insert(rows.end(), scene_rows[pick].begin(), scene_rows[pick].end());
    }
    const auto v = metric(rows);
    if (v) {
      values.push_back(*v);
    } else {
      out.undefined_resamples++;
    }
  }
  out.flagged = out.undefined_resamples > resamples / 5;
  if (values.empty()) {
    out.half_width = std::nan("");
    out.flagged = true;
    return out;
  }
  const double alpha = 1.0 - confidence;
  const double hi = quantile(values, 1.0 - alpha / 2.0);
  const double lo = quantile(values, alpha / 2.0);
  out.half_width = 0.5 * (hi - lo);
  return out;
}

std::vector<SceneSplit> scene_splits(std::size_t n_scenes, double train_frac, int n_splits,
                                     std::uint64_t seed) {
  if (n_scenes < 2) throw ArgumentError("scene_splits needs at least two scenes");
  std::size_t train_n = static_cast<std::size_t>(
      std::lround(train_frac * static_cast<double>(n_scenes)));
  train_n = std::clamp<std::size_t>(train_n, 1, n_scenes - 1);

  std::vector<SceneSplit> out;
  out.reserve(n_splits);
  for (int k = 0; k < n_splits; ++k) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    std::vector<std::size_t> order(n_scenes);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    SceneSplit split;
    split.train_scenes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_n));
    split.test_scenes.assign(order.begin() + static_cast<std::ptrdiff_t>(train_n), order.end());
    std::sort(split.train_scenes.begin(), split.train_scenes.end());
    std::sort(split.test_scenes.begin(), split.test_scenes.end());
    out.push_back(std::move(split));
  }
  return out;
}

TriageResult triage(const std::vector<double>& scores, const std::vector<double>& ade_values,
                    const std::vector<std::string>& sample_ids, double budget_percent) {
  if (!(budget_percent > 0.0 && budget_percent < 100.0)) {
    throw ArgumentError("triage budget must be in (0, 100)");
  }
  const std::size_t n = scores.size();
  if (ade_values.size() != n || sample_ids.size() != n) {
    throw ArgumentError("triage: column length mismatch");
  }

  TriageResult out;
  out.flagged = n < 10;

  auto top_indices = [&](const std::vector<double>& key, double percent) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (key[a] != key[b]) return key[a] > key[b];
      return sample_ids[a] < sample_ids[b];  // boundary ties break by sample id
    });
    const std::size_t count = static_cast<std::size_t>(
        std::ceil(percent / 100.0 * static_cast<double>(n)));
    order.resize(std::max<std::size_t>(1, std::min(count, n)));
    return order;
  };

  const auto positives = top_indices(ade_values, 10.0);
  const auto selected = top_indices(scores, budget_percent);
  out.positives = positives.size();
  out.selected = selected.size();

  std::vector<char> is_pos(n, 0);
  for (auto i : positives) is_pos[i] = 1;
  std::size_t hit = 0;
  for (auto i : selected) hit += is_pos[i];
  out.recall = static_cast<double>(hit) / static_cast<double>(positives.size());
  out.precision = static_cast<double>(hit) / static_cast<double>(selected.size());
  return out;
}

}  // namespace planrisk
