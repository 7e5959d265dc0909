#include "planrisk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "planrisk/errors.hpp"
#include "planrisk/metrics.hpp"
#include "planrisk/rng.hpp"

namespace planrisk {

using nlohmann::json;

const std::vector<std::string> kStatFeatures = {"entropy", "sigma_sp2", "gini_cam"};
const std::vector<std::string> kMatchedControls = {"n_obj", "d_obj", "gini_obj"};
const std::vector<std::string> kExtendedControls = {
    "ego_speed",        "barrier_cone_count", "nearfield_count", "side_object_count",
    "mean_radar_pts",   "nearest_veh_speed",  "mean_speed_20m",  "approach_count",
    "approach_veh_count", "dyn_ratio"};

std::optional<double> aligned_feature(const FeatureRow& row, const std::string& name) {
  // lower entropy, lower spatial variance, higher gini all mean higher risk
  if (name == "entropy") return row.entropy ? std::optional<double>(-*row.entropy) : std::nullopt;
  if (name == "sigma_sp2") {
    return row.sigma_sp2 ? std::optional<double>(-*row.sigma_sp2) : std::nullopt;
  }
  if (name == "gini_cam") return row.gini_cam;
  if (name == "n_obj") return static_cast<double>(row.n_obj);
  if (name == "d_obj") return row.d_obj;
  if (name == "gini_obj") return row.gini_obj;
  if (name == "ego_speed") return row.ego_speed;
  if (name == "barrier_cone_count") return static_cast<double>(row.barrier_cone_count);
  if (name == "nearfield_count") return static_cast<double>(row.nearfield_count);
  if (name == "side_object_count") return static_cast<double>(row.side_object_count);
  if (name == "mean_radar_pts") return row.mean_radar_pts;
  if (name == "nearest_veh_speed") return row.nearest_veh_speed;
  if (name == "mean_speed_20m") return row.mean_speed_20m;
  if (name == "approach_count") return static_cast<double>(row.approach_count);
  if (name == "approach_veh_count") return static_cast<double>(row.approach_veh_count);
  if (name == "dyn_ratio") return row.dyn_ratio;
  throw ArgumentError("unknown feature: " + name);
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

void write_feature_csv(const std::vector<FeatureRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write feature csv: " + path.string());
  out << "sample_id,scene_id,entropy,sigma_sp2,gini_cam,n_obj,d_obj,gini_obj,ego_speed,"
         "barrier_cone_count,nearfield_count,side_object_count,mean_radar_pts,"
         "nearest_veh_speed,mean_speed_20m,approach_count,approach_veh_count,dyn_ratio,"
         "ade,collision_any,missing\n";
  for (const auto& r : rows) {
    std::vector<std::string> missing;
    if (!r.entropy) missing.push_back("stats");
    if (!r.d_obj) missing.push_back("d_obj");
    if (!r.gini_obj) missing.push_back("gini_obj");
    if (!r.mean_radar_pts) missing.push_back("mean_radar_pts");
    if (!r.nearest_veh_speed) missing.push_back("nearest_veh_speed");
    if (!r.mean_speed_20m) missing.push_back("mean_speed_20m");
    if (!r.dyn_ratio) missing.push_back("dyn_ratio");
    std::string missing_joined;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i) missing_joined += ';';
      missing_joined += missing[i];
    }
    out << r.sample_id << ',' << r.scene_id << ',' << fmt_opt(r.entropy) << ','
        << fmt_opt(r.sigma_sp2) << ',' << fmt_opt(r.gini_cam) << ',' << r.n_obj << ','
        << fmt_opt(r.d_obj) << ',' << fmt_opt(r.gini_obj) << ',' << fmt_double(r.ego_speed) << ','
        << r.barrier_cone_count << ',' << r.nearfield_count << ',' << r.side_object_count << ','
        << fmt_opt(r.mean_radar_pts) << ',' << fmt_opt(r.nearest_veh_speed) << ','
        << fmt_opt(r.mean_speed_20m) << ',' << r.approach_count << ',' << r.approach_veh_count
        << ',' << fmt_opt(r.dyn_ratio) << ',' << fmt_double(r.ade) << ','
        << (r.collision ? 1 : 0) << ',' << missing_joined << '\n';
  }
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feature csv: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty feature csv: " + path.string());
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 21) {
      throw ValidationError("bad feature csv row (" + std::to_string(f.size()) +
                            " fields): " + path.string());
    }
    FeatureRow r;
    r.sample_id = f[0];
    r.scene_id = f[1];
    r.entropy = parse_opt(f[2]);
    r.sigma_sp2 = parse_opt(f[3]);
    r.gini_cam = parse_opt(f[4]);
    r.n_obj = std::stoll(f[5]);
    r.d_obj = parse_opt(f[6]);
    r.gini_obj = parse_opt(f[7]);
    r.ego_speed = std::stod(f[8]);
    r.barrier_cone_count = std::stoll(f[9]);
    r.nearfield_count = std::stoll(f[10]);
    r.side_object_count = std::stoll(f[11]);
    r.mean_radar_pts = parse_opt(f[12]);
    r.nearest_veh_speed = parse_opt(f[13]);
    r.mean_speed_20m = parse_opt(f[14]);
    r.approach_count = std::stoll(f[15]);
    r.approach_veh_count = std::stoll(f[16]);
    r.dyn_ratio = parse_opt(f[17]);
    r.ade = std::stod(f[18]);
    r.collision = f[19] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

using Rows = std::vector<FeatureRow>;
using Index = std::vector<std::size_t>;

// scene id -> row indices, scene order = first appearance (manifest order)
std::vector<std::vector<std::size_t>> group_by_scene(const Rows& rows,
                                                     std::vector<std::string>* scene_ids) {
  std::vector<std::vector<std::size_t>> out;
  std::map<std::string, std::size_t> seen;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = seen.find(rows[i].scene_id);
    if (it == seen.end()) {
      seen.emplace(rows[i].scene_id, out.size());
      order.push_back(rows[i].scene_id);
      out.push_back({i});
    } else {
      out[it->second].push_back(i);
    }
  }
  if (scene_ids) *scene_ids = order;
  return out;
}

std::optional<double> univariate_rho(const Rows& rows, const Index& idx,
                                     const std::string& feature) {
  std::vector<double> xs, ys;
  for (auto i : idx) {
    const auto v = aligned_feature(rows[i], feature);
    if (!v) continue;
    xs.push_back(*v);
    ys.push_back(rows[i].ade);
  }
  if (xs.size() < 2) return std::nullopt;
  return spearman(xs, ys);
}

std::optional<double> univariate_auroc(const Rows& rows, const Index& idx,
                                       const std::string& feature) {
  std::vector<double> xs;
  std::vector<bool> ys;
  for (auto i : idx) {
    const auto v = aligned_feature(rows[i], feature);
    if (!v) continue;
    xs.push_back(*v);
    ys.push_back(rows[i].collision);
  }
  if (xs.empty()) return std::nullopt;
  return auroc(xs, ys);
}

struct CompleteDesign {
  std::vector<std::vector<double>> x;
  std::vector<double> ade;
  std::vector<bool> collision;
  std::vector<std::string> sample_ids;
  std::size_t dropped = 0;
};

CompleteDesign complete_design(const Rows& rows, const Index& idx,
                               const std::vector<std::string>& features) {
  CompleteDesign out;
  for (auto i : idx) {
    std::vector<double> x;
    x.reserve(features.size());
    bool ok = true;
    for (const auto& f : features) {
      const auto v = aligned_feature(rows[i], f);
      if (!v) {
        ok = false;
        break;
      }
      x.push_back(*v);
    }
    if (!ok) {
      out.dropped++;
      continue;
    }
    out.x.push_back(std::move(x));
    out.ade.push_back(rows[i].ade);
    out.collision.push_back(rows[i].collision);
    out.sample_ids.push_back(rows[i].sample_id);
  }
  return out;
}

struct JointScores {
  std::vector<double> ridge_score;     // linear predictor for ADE
  std::vector<double> logistic_score;  // linear predictor for collision
  bool logistic_ok = false;
  std::size_t dropped = 0;
};

// Fit on train rows, score eval rows. Rows with missing features drop from
// both sides and are counted.
std::optional<JointScores> joint_scores(const Rows& rows, const Index& train, const Index& eval,
                                        const std::vector<std::string>& features,
                                        const EvalOptions& opts, CompleteDesign* eval_out) {
  const CompleteDesign tr = complete_design(rows, train, features);
  CompleteDesign ev = complete_design(rows, eval, features);
  if (tr.x.size() < 2 || ev.x.empty()) return std::nullopt;

  JointScores out;
  out.dropped = tr.dropped + ev.dropped;
  const FitResult ridge = ridge_fit(tr.x, tr.ade, opts.ridge_lambda);
  for (const auto& x : ev.x) out.ridge_score.push_back(ridge.predict(x));

  bool has_pos = false, has_neg = false;
  for (bool c : tr.collision) (c ? has_pos : has_neg) = true;
  if (has_pos && has_neg) {
    const FitResult logit = logistic_fit(tr.x, tr.collision, opts.logistic_lambda);
    for (const auto& x : ev.x) out.logistic_score.push_back(logit.predict(x));
    out.logistic_ok = true;
  }
  if (eval_out) *eval_out = std::move(ev);
  return out;
}

json bootstrap_json(const BootstrapResult& b) {
  json j;
  j["value"] = std::isnan(b.point) ? json() : json(b.point);
  j["half_width"] = std::isnan(b.half_width) ? json() : json(b.half_width);
  if (b.flagged) j["flagged"] = true;
  if (b.undefined_resamples > 0) j["undefined_resamples"] = b.undefined_resamples;
  return j;
}

// point + half-width over a list of per-split values (quantile convention of
// the bootstrap applied to the split distribution)
json split_summary(const std::vector<double>& values, int expected) {
  json j;
  if (values.empty()) {
    j["value"] = json();
    j["half_width"] = json();
    j["splits_used"] = 0;
    return j;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  j["value"] = mean;
  if (values.size() > 1) {
    j["half_width"] = 0.5 * (quantile(values, 0.975) - quantile(values, 0.025));
  } else {
    j["half_width"] = json();
  }
  if (static_cast<int>(values.size()) != expected) j["splits_used"] = values.size();
  return j;
}

const std::vector<std::pair<std::string, std::vector<std::string>>>& joint_models() {
  auto make = [] {
    std::vector<std::string> stats = kStatFeatures;
    std::vector<std::string> controls3 = kMatchedControls;
    std::vector<std::string> controls3_stats = controls3;
    controls3_stats.insert(controls3_stats.end(), stats.begin(), stats.end());
    std::vector<std::string> controls10 = kExtendedControls;
    std::vector<std::string> controls10_stats = controls10;
    controls10_stats.insert(controls10_stats.end(), stats.begin(), stats.end());
    return std::vector<std::pair<std::string, std::vector<std::string>>>{
        {"controls_only", controls3},
        {"stats_only", stats},
        {"controls_plus_stats", controls3_stats},
        {"extended_controls_only", controls10},
        {"extended_controls_plus_stats", controls10_stats},
    };
  };
  static const auto models = make();
  return models;
}

}  // namespace

json fit_eval(const Rows& rows, const EvalOptions& opts) {
  if (rows.size() < 2) throw DataError("fit_eval needs at least two samples");
  std::vector<std::string> scene_ids;
  const auto scene_rows = group_by_scene(rows, &scene_ids);
  if (scene_rows.size() < 2) throw DataError("fit_eval needs at least two scenes");

  Index all;
  for (std::size_t i = 0; i < rows.size(); ++i) all.push_back(i);

  json report;
  report["n_samples"] = rows.size();
  report["n_scenes"] = scene_rows.size();
  report["options"] = {{"ridge_lambda", opts.ridge_lambda},
                       {"logistic_lambda", opts.logistic_lambda},
                       {"bootstrap_resamples", opts.bootstrap_resamples},
                       {"confidence", opts.confidence},
                       {"n_splits", opts.n_splits},
                       {"train_frac", opts.train_frac},
                       {"seed", opts.seed}};

  // ---- in-domain univariate, with scene-clustered bootstrap half-widths
  std::vector<std::string> all_features = kStatFeatures;
  all_features.insert(all_features.end(), kMatchedControls.begin(), kMatchedControls.end());
  all_features.insert(all_features.end(), kExtendedControls.begin(), kExtendedControls.end());

  json univariate;
  std::uint64_t stream = 1;
  for (const auto& f : all_features) {
    json jf;
    const auto rho = scene_bootstrap(
        [&](const Index& idx) { return univariate_rho(rows, idx, f); }, scene_rows,
        opts.bootstrap_resamples, opts.confidence, mix_seed(opts.seed, stream++));
    const auto roc = scene_bootstrap(
        [&](const Index& idx) { return univariate_auroc(rows, idx, f); }, scene_rows,
        opts.bootstrap_resamples, opts.confidence, mix_seed(opts.seed, stream++));
    jf["rho_ade"] = bootstrap_json(rho);
    jf["auroc_coll"] = bootstrap_json(roc);
    univariate[f] = jf;
  }

  // ---- in-domain joint models (fit and evaluate on the resampled pool)
  json joint;
  for (const auto& [name, features] : joint_models()) {
    auto rho_metric = [&](const Index& idx) -> std::optional<double> {
      CompleteDesign ev;
      const auto scores = joint_scores(rows, idx, idx, features, opts, &ev);
      if (!scores || scores->ridge_score.size() < 2) return std::nullopt;
      return spearman(scores->ridge_score, ev.ade);
    };
    auto roc_metric = [&](const Index& idx) -> std::optional<double> {
      CompleteDesign ev;
      const auto scores = joint_scores(rows, idx, idx, features, opts, &ev);
      if (!scores || !scores->logistic_ok) return std::nullopt;
      return auroc(scores->logistic_score, ev.collision);
    };
    json jm;
    jm["rho_ade"] = bootstrap_json(scene_bootstrap(rho_metric, scene_rows,
                                                   opts.bootstrap_resamples, opts.confidence,
                                                   mix_seed(opts.seed, stream++)));
    jm["auroc_coll"] = bootstrap_json(scene_bootstrap(roc_metric, scene_rows,
                                                      opts.bootstrap_resamples, opts.confidence,
                                                      mix_seed(opts.seed, stream++)));
    CompleteDesign full = complete_design(rows, all, features);
    jm["rows_dropped"] = full.dropped;
    joint[name] = jm;
  }
  report["in_domain"] = {{"univariate", univariate}, {"joint", joint}};

  // ---- held-out scene splits
  const auto splits =
      scene_splits(scene_rows.size(), opts.train_frac, opts.n_splits, mix_seed(opts.seed, 0x5117));
  auto rows_of_scenes = [&](const std::vector<std::size_t>& scenes) {
    Index idx;
    for (auto s : scenes) idx.insert(idx.end(), scene_rows[s].begin(), scene_rows[s].end());
    return idx;
  };

  json held_uni;
  for (const auto& f : all_features) {
    std::vector<double> rhos, rocs;
    for (const auto& split : splits) {
      const Index test = rows_of_scenes(split.test_scenes);
      if (const auto r = univariate_rho(rows, test, f)) rhos.push_back(*r);
      if (const auto r = univariate_auroc(rows, test, f)) rocs.push_back(*r);
    }
    held_uni[f] = {{"rho_ade", split_summary(rhos, opts.n_splits)},
                   {"auroc_coll", split_summary(rocs, opts.n_splits)}};
  }

  json held_joint;
  json triage_rows;
  for (const auto& [name, features] : joint_models()) {
    std::vector<double> rhos, rocs;
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> triage_values;
    for (const auto& split : splits) {
      const Index train = rows_of_scenes(split.train_scenes);
      const Index test = rows_of_scenes(split.test_scenes);
      CompleteDesign ev;
      const auto scores = joint_scores(rows, train, test, features, opts, &ev);
      if (!scores) continue;
      if (scores->ridge_score.size() >= 2) {
        if (const auto r = spearman(scores->ridge_score, ev.ade)) rhos.push_back(*r);
        if (name == "stats_only") {
          for (double k : opts.triage_budgets) {
            const TriageResult t = triage(scores->ridge_score, ev.ade, ev.sample_ids, k);
            triage_values[k].first.push_back(t.recall);
            triage_values[k].second.push_back(t.precision);
          }
        }
      }
      if (scores->logistic_ok) {
        if (const auto r = auroc(scores->logistic_score, ev.collision)) rocs.push_back(*r);
      }
    }
    held_joint[name] = {{"rho_ade", split_summary(rhos, opts.n_splits)},
                        {"auroc_coll", split_summary(rocs, opts.n_splits)}};
    if (name == "stats_only") {
      for (const auto& [k, vals] : triage_values) {
        json row;
        row["recall"] = split_summary(vals.first, opts.n_splits);
        row["precision"] = split_summary(vals.second, opts.n_splits);
        triage_rows[fmt_double(k)] = row;
      }
    }
  }
  report["held_out"] = {{"univariate", held_uni}, {"joint", held_joint}};

  // triage: model = held-out stats_only ridge score; random = analytic row
  json triage_random;
  for (double k : opts.triage_budgets) {
    triage_random[fmt_double(k)] = {{"recall", k / 100.0}, {"precision", 0.10}};
  }
  report["triage"] = {{"model", triage_rows}, {"random", triage_random},
                      {"positive_class", "ade_top_10_percent"}};
  return report;
}

namespace {

std::string cell(const json& j) {
  if (j.is_null()) return "";
  if (j.is_number()) return fmt_double(j.get<double>());
  return j.dump();
}

void write_association_table(const json& block, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write table: " + path.string());
  out << "feature,rho_ade,rho_ade_half_width,auroc_coll,auroc_coll_half_width\n";
  auto emit = [&](const std::string& name, const json& jf) {
    out << name << ',' << cell(jf.at("rho_ade").at("value")) << ','
        << cell(jf.at("rho_ade").at("half_width")) << ',' << cell(jf.at("auroc_coll").at("value"))
        << ',' << cell(jf.at("auroc_coll").at("half_width")) << '\n';
  };
  const json& uni = block.at("univariate");
  for (const auto& f : kStatFeatures) emit(f, uni.at(f));
  for (const auto& f : kMatchedControls) emit(f, uni.at(f));
  for (const auto& f : kExtendedControls) emit(f, uni.at(f));
  const json& joint = block.at("joint");
  for (const auto& [name, jf] : joint.items()) emit("joint:" + name, jf);
}

}  // namespace

void write_eval_tables(const json& report, const std::filesystem::path& dir) {
  write_association_table(report.at("in_domain"), dir / "association_in_domain.csv");
  write_association_table(report.at("held_out"), dir / "association_held_out.csv");

  std::ofstream out(dir / "triage.csv");
  if (!out) throw Error("cannot write triage table");
  out << "model,budget_percent,recall,recall_half_width,precision,precision_half_width\n";
  const json& model = report.at("triage").at("model");
  for (const auto& [k, row] : model.items()) {
    out << "stats_joint," << k << ',' << cell(row.at("recall").at("value")) << ','
        << cell(row.at("recall").at("half_width")) << ',' << cell(row.at("precision").at("value"))
        << ',' << cell(row.at("precision").at("half_width")) << '\n';
  }
  const json& random_rows = report.at("triage").at("random");
  for (const auto& [k, row] : random_rows.items()) {
    out << "random," << k << ',' << cell(row.at("recall")) << ",," << cell(row.at("precision"))
        << ",\n";
  }
}

}  // namespace planrisk
