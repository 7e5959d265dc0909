#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "planrisk/controls.hpp"
#include "planrisk/fit.hpp"
#include "planrisk/stats.hpp"
#include "planrisk/types.hpp"

namespace planrisk {

// One per-sample feature row: three attribution statistics (raw, sign
// alignment happens at fit time), the thirteen scene controls, and the two
// risk labels. Statistics are missing when the saliency mass was zero.
struct FeatureRow {
  std::string sample_id;
  std::string scene_id;
  std::optional<double> entropy;
  std::optional<double> sigma_sp2;
  std::optional<double> gini_cam;
  std::int64_t n_obj = 0;
  std::optional<double> d_obj;
  std::optional<double> gini_obj;
  double ego_speed = 0.0;
  std::int64_t barrier_cone_count = 0;
  std::int64_t nearfield_count = 0;
  std::int64_t side_object_count = 0;
  std::optional<double> mean_radar_pts;
  std::optional<double> nearest_veh_speed;
  std::optional<double> mean_speed_20m;
  std::int64_t approach_count = 0;
  std::int64_t approach_veh_count = 0;
  std::optional<double> dyn_ratio;
  double ade = 0.0;
  bool collision = false;
};

// Canonical feature names. Stats features are stored raw in rows and
// sign-aligned (-H, -sigma^2, +Gini) when extracted for fits and univariate
// associations.
extern const std::vector<std::string> kStatFeatures;      // entropy, sigma_sp2, gini_cam
extern const std::vector<std::string> kMatchedControls;   // n_obj, d_obj, gini_obj
extern const std::vector<std::string> kExtendedControls;  // ten appendix controls

// Risk-aligned value of a named feature, missing when the row lacks it.
std::optional<double> aligned_feature(const FeatureRow& row, const std::string& name);

void write_feature_csv(const std::vector<FeatureRow>& rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

struct EvalOptions {
  double ridge_lambda = 1.0;
  double logistic_lambda = 1.0;
  int bootstrap_resamples = 100;
  double confidence = 0.95;
  int n_splits = 20;
  double train_frac = 0.8;
  std::vector<double> triage_budgets{5.0, 10.0, 20.0};
  std::uint64_t seed = 0;
};

// Full statistical protocol: in-domain univariate and joint associations with
// scene-clustered bootstrap half-widths, held-out scene splits, and quantile
// triage. Deterministic given the seed.
nlohmann::json fit_eval(const std::vector<FeatureRow>& rows, const EvalOptions& opts);

// CSV tables mirroring the report (association, held-out, triage).
void write_eval_tables(const nlohmann::json& report, const std::filesystem::path& dir);

}  // namespace planrisk
