// planrisk: subset-selection attribution for multi-view trajectory planners,
// saliency risk statistics, and the associated evaluation protocol.
//
// Subcommands: synth, partition, attribute, features, fit-eval, faithfulness,
// prop-check, serve-planner. Every command takes --config <json> whose keys
// are long option names; explicit flags override config values. All outputs
// are deterministic given seeds except timing.json (wall-clock diagnostics).

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "planrisk/attribution.hpp"
#include "planrisk/controls.hpp"
#include "planrisk/errors.hpp"
#include "planrisk/faithfulness.hpp"
#include "planrisk/manifest.hpp"
#include "planrisk/metrics.hpp"
#include "planrisk/parallel.hpp"
#include "planrisk/partition.hpp"
#include "planrisk/pipeline.hpp"
#include "planrisk/planner.hpp"
#include "planrisk/risk.hpp"
#include "planrisk/rng.hpp"
#include "planrisk/stats.hpp"
#include "planrisk/submodular.hpp"
#include "planrisk/synth.hpp"
#include "planrisk/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace planrisk;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const json& effective) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(effective.dump())));
  return buf;
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

json read_json(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string("cannot open ") + what + ": " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " parse error: " + e.what());
  }
  return doc;
}

// Rewrites argv so config-file entries precede user flags; with TakeLast
// multi-option policy the command line wins.
std::vector<std::string> overlay_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  if (args.empty()) return out;

  fs::path config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      break;
    }
  }
  if (!config_path.empty()) {
    const json cfg = read_json(config_path, "config file");
    if (!cfg.is_object()) throw ValidationError("config file must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      if (value.is_boolean()) {
        out.push_back("--" + key + "=" + (value.get<bool>() ? "true" : "false"));
      } else if (value.is_string()) {
        out.push_back("--" + key);
        out.push_back(value.get<std::string>());
      } else {
        out.push_back("--" + key);
        out.push_back(value.dump());
      }
    }
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void parse_args(CLI::App& app, const std::vector<std::string>& args) {
  for (auto* opt : app.get_options()) {
    if (opt->get_name() != "--help") {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }
  // CLI11 wants reversed argv without the program name
  std::vector<std::string> overlaid = overlay_config(args);
  std::reverse(overlaid.begin(), overlaid.end());
  try {
    app.parse(overlaid);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    std::exit(0);
  }
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t comma = s.find(',', pos);
    out.push_back(std::stod(s.substr(pos, comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// planner backends

struct PlannerFactory {
  // synthetic:<planner-set.json> | external:<host>:<port>
  std::optional<PlannerSpecSet> specs;
  std::shared_ptr<Planner> remote;
  int max_in_flight = 1;

  static PlannerFactory make(const std::string& uri, int horizon_hint, int max_in_flight) {
    PlannerFactory f;
    f.max_in_flight = std::max(1, max_in_flight);
    if (uri.rfind("synthetic:", 0) == 0) {
      f.specs = load_planner_set(uri.substr(10));
    } else if (uri.rfind("external:", 0) == 0) {
      const std::string rest = uri.substr(9);
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos) {
        throw ArgumentError("external planner uri must be external:<host>:<port>");
      }
      f.remote = make_remote_planner(rest.substr(0, colon), std::stoi(rest.substr(colon + 1)),
                                     horizon_hint);
    } else {
      throw ArgumentError("planner uri must start with synthetic: or external:");
    }
    return f;
  }

  PlannerHandle for_sample(const std::string& sample_id) const {
    if (specs) {
      return PlannerHandle(make_synthetic_planner(specs->for_sample(sample_id)), max_in_flight);
    }
    return PlannerHandle(remote, max_in_flight);
  }

  std::optional<std::pair<int, int>> default_grid() const {
    if (specs && specs->common.detect_grid) return specs->common.detect_grid;
    return std::nullopt;
  }
};

// flattened manifest view
struct SampleRef {
  const SampleRecord* rec;
  std::size_t index;
};

std::vector<SampleRef> all_samples(const SceneManifest& m) {
  std::vector<SampleRef> out;
  std::size_t i = 0;
  for (const auto& scene : m.scenes) {
    for (const auto& rec : scene.samples) out.push_back({&rec, i++});
  }
  return out;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const std::vector<std::string>& args) {
  CLI::App app{"generate a seeded synthetic dataset"};
  std::string out_dir;
  std::string profile = "concentrated";
  std::string config;
  SynthSpec spec;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--scenes", spec.scenes, "scene count");
  app.add_option("--samples-per-scene", spec.samples_per_scene, "samples per scene");
  app.add_option("--cameras", spec.cameras, "camera count");
  app.add_option("--channels", spec.channels, "channels per camera");
  app.add_option("--height", spec.height, "image height");
  app.add_option("--width", spec.width, "image width");
  app.add_option("--regions-per-camera", spec.regions_per_camera, "grid regions per camera");
  app.add_option("--profile", profile, "concentrated|diffuse|single-camera|mixed");
  app.add_option("--offset-scale", spec.offset_scale, "planted offset magnitude");
  app.add_option("--obstacle-density", spec.obstacle_density, "background boxes per step");
  app.add_option("--noise-scale", spec.noise_scale, "gt trajectory noise (m)");
  app.add_option("--horizon", spec.horizon, "trajectory horizon T");
  app.add_option("--seed", spec.seed, "generator seed");
  parse_args(app, args);
  spec.profile = profile_from_string(profile);

  const SynthResult result = generate(spec);
  fs::create_directories(out_dir);
  write_synth(result, out_dir);

  json echo{{"command", "synth"},
            {"scenes", spec.scenes},
            {"samples_per_scene", spec.samples_per_scene},
            {"cameras", spec.cameras},
            {"channels", spec.channels},
            {"height", spec.height},
            {"width", spec.width},
            {"regions_per_camera", spec.regions_per_camera},
            {"profile", profile},
            {"offset_scale", spec.offset_scale},
            {"obstacle_density", spec.obstacle_density},
            {"noise_scale", spec.noise_scale},
            {"horizon", spec.horizon},
            {"seed", spec.seed},
            {"toolkit_version", kVersion}};
  echo["config_hash"] = config_hash(echo);
  write_json(echo, fs::path(out_dir) / "synth_config.json");

  std::cout << "synth: " << result.manifest.sample_count() << " samples in "
            << result.manifest.scenes.size() << " scenes, " << result.collision_count
            << " planted collisions, grid " << result.grid_rows << "x" << result.grid_cols
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// partition

int cmd_partition(const std::vector<std::string>& args) {
  CLI::App app{"compute per-sample region partitions"};
  std::string manifest_path, out_dir, mode = "grid", config;
  int grid_rows = 8, grid_cols = 8;
  int slic_regions = 64, slic_iters = 10;
  double slic_compactness = 10.0;
  int jobs = 0;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--manifest", manifest_path, "manifest path")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--mode", mode, "grid|slic");
  app.add_option("--grid-rows", grid_rows, "grid rows per camera");
  app.add_option("--grid-cols", grid_cols, "grid cols per camera");
  app.add_option("--slic-regions", slic_regions, "target superpixels per camera");
  app.add_option("--slic-compactness", slic_compactness, "initial compactness");
  app.add_option("--slic-iters", slic_iters, "k-means iterations");
  app.add_option("--jobs", jobs, "parallel sample workers (0 = auto)");
  parse_args(app, args);

  const SceneManifest manifest = load_manifest(manifest_path);
  const auto samples = all_samples(manifest);
  fs::create_directories(out_dir);

  if (mode == "grid") {
    // the grid depends only on the shared dims; one partition serves all
    const RegionPartition p =
        grid_partition(manifest.cameras, manifest.height, manifest.width, grid_rows, grid_cols);
    for (const auto& s : samples) {
      save_partition(p, fs::path(out_dir) / (s.rec->sample_id + ".labels.mvtn"),
                     fs::path(out_dir) / (s.rec->sample_id + ".regions.json"));
    }
  } else if (mode == "slic") {
    parallel_for(samples.size(), resolve_jobs(jobs), [&](std::size_t i) {
      const ViewTensor x = read_view_tensor(manifest.tensor_file(*samples[i].rec));
      const RegionPartition p = slic_partition(x, slic_regions, slic_compactness, slic_iters);
      save_partition(p, fs::path(out_dir) / (samples[i].rec->sample_id + ".labels.mvtn"),
                     fs::path(out_dir) / (samples[i].rec->sample_id + ".regions.json"));
    });
  } else {
    throw ArgumentError("unknown partition mode: " + mode);
  }

  json echo{{"command", "partition"},
            {"mode", mode},
            {"grid_rows", grid_rows},
            {"grid_cols", grid_cols},
            {"slic_regions", slic_regions},
            {"slic_compactness", slic_compactness},
            {"slic_iters", slic_iters},
            {"toolkit_version", kVersion}};
  echo["config_hash"] = config_hash(echo);
  write_json(echo, fs::path(out_dir) / "partition_config.json");
  std::cout << "partition: " << samples.size() << " samples (" << mode << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// attribute

int cmd_attribute(const std::vector<std::string>& args) {
  CLI::App app{"run attribution over every manifest sample"};
  std::string manifest_path, planner_uri, out_dir, method = "hier", config;
  std::string partitions_dir;
  int grid_rows = 0, grid_cols = 0;  // 0: planner's keyed grid, else 8x8
  int group_rows = 4, group_cols = 4;
  ObjectiveConfig obj;
  SearchConfig search;
  int rise_masks = 512;
  double rise_keep = 0.5;
  int jobs = 0;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--manifest", manifest_path, "manifest path")->required();
  app.add_option("--planner", planner_uri, "synthetic:<specs.json> | external:<host>:<port>")
      ->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--method", method, "exact|hier|rise");
  app.add_option("--partitions", partitions_dir, "load partitions from this directory");
  app.add_option("--grid-rows", grid_rows, "grid rows per camera (0 = planner default)");
  app.add_option("--grid-cols", grid_cols, "grid cols per camera (0 = planner default)");
  app.add_option("--group-rows", group_rows, "coarse group grid rows");
  app.add_option("--group-cols", group_cols, "coarse group grid cols");
  app.add_option("--lambda-suf", obj.lambda_suf, "sufficiency weight");
  app.add_option("--lambda-nec", obj.lambda_nec, "necessity weight");
  app.add_option("--baseline", obj.baseline, "masking baseline value");
  app.add_option("--budget", search.budget, "max regions selected (-1 = all)");
  app.add_option("--coarse-budget", search.coarse_budget, "max groups ranked (-1 = all)");
  app.add_option("--refine-budget", search.refine_budget, "max members per group (-1 = all)");
  app.add_flag("--early-stop-negative", search.early_stop_negative,
               "stop when the best marginal gain is negative");
  app.add_flag("--area-normalize", search.area_normalize, "divide saliency by region area");
  app.add_option("--seed", search.seed, "search seed");
  app.add_option("--rise-masks", rise_masks, "RISE mask count");
  app.add_option("--rise-keep", rise_keep, "RISE keep probability");
  app.add_option("--jobs", jobs, "parallel sample workers (0 = auto)");
  parse_args(app, args);

  if (method != "exact" && method != "hier" && method != "rise") {
    throw ArgumentError("unknown attribution method: " + method);
  }

  const SceneManifest manifest = load_manifest(manifest_path);
  const auto samples = all_samples(manifest);
  const PlannerFactory planners = PlannerFactory::make(planner_uri, /*horizon_hint=*/0, 1);

  if (grid_rows <= 0 || grid_cols <= 0) {
    if (const auto g = planners.default_grid()) {
      grid_rows = g->first;
      grid_cols = g->second;
    } else {
      grid_rows = grid_rows <= 0 ? 8 : grid_rows;
      grid_cols = grid_cols <= 0 ? 8 : grid_cols;
    }
  }

  fs::create_directories(out_dir);
  std::optional<RegionPartition> shared_partition;
  if (partitions_dir.empty()) {
    shared_partition =
        grid_partition(manifest.cameras, manifest.height, manifest.width, grid_rows, grid_cols);
  }

  std::vector<double> seconds(samples.size(), 0.0);
  parallel_for(samples.size(), resolve_jobs(jobs), [&](std::size_t i) {
    const SampleRecord& rec = *samples[i].rec;
    const ViewTensor x = read_view_tensor(manifest.tensor_file(rec));
    RegionPartition local;
    const RegionPartition* partition = nullptr;
    if (shared_partition) {
      partition = &*shared_partition;
    } else {
      local = load_partition(fs::path(partitions_dir) / (rec.sample_id + ".labels.mvtn"),
                             fs::path(partitions_dir) / (rec.sample_id + ".regions.json"));
      partition = &local;
    }
    const PlannerHandle handle = planners.for_sample(rec.sample_id);

    AttributionResult result;
    SearchConfig local_search = search;
    local_search.jobs = 1;  // sample-level parallelism already saturates
    if (method == "exact") {
      result = exact_attribute(handle, x, *partition, obj, local_search);
    } else if (method == "hier") {
      const GroupAssignment groups = group_regions(*partition, group_rows, group_cols);
      result = hierarchical_attribute(handle, x, *partition, groups, obj, local_search);
    } else {
      result = rise_attribute(handle, x, *partition, rise_masks, rise_keep, search.seed, obj, 1);
    }
    save_attribution(result, fs::path(out_dir) / (rec.sample_id + ".saliency.mvtn"),
                     fs::path(out_dir) / (rec.sample_id + ".attribution.json"), obj, local_search);
    seconds[i] = result.wall_seconds;
  });

  json echo{{"command", "attribute"},
            {"method", method},
            {"planner", planner_uri},
            {"grid_rows", grid_rows},
            {"grid_cols", grid_cols},
            {"group_rows", group_rows},
            {"group_cols", group_cols},
            {"lambda_suf", obj.lambda_suf},
            {"lambda_nec", obj.lambda_nec},
            {"baseline", obj.baseline},
            {"budget", search.budget},
            {"coarse_budget", search.coarse_budget},
            {"refine_budget", search.refine_budget},
            {"early_stop_negative", search.early_stop_negative},
            {"area_normalize", search.area_normalize},
            {"seed", search.seed},
            {"rise_masks", rise_masks},
            {"rise_keep", rise_keep},
            {"toolkit_version", kVersion}};
  echo["config_hash"] = config_hash(echo);
  write_json(echo, fs::path(out_dir) / "attribute_config.json");

  // wall-clock diagnostics; the only non-reproducible output of this command
  json timing;
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    timing["per_sample"][samples[i].rec->sample_id] = seconds[i];
    total += seconds[i];
  }
  timing["total_seconds"] = total;
  timing["mean_seconds"] = samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
  timing["method"] = method;
  write_json(timing, fs::path(out_dir) / "timing.json");

  std::cout << "attribute: " << samples.size() << " samples (" << method << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// features

int cmd_features(const std::vector<std::string>& args) {
  CLI::App app{"compute attribution statistics, scene controls and risk labels"};
  std::string manifest_path, attributions_dir, planner_uri, out_dir, config;
  int jobs = 0;
  bool normalized_coords = false;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--manifest", manifest_path, "manifest path")->required();
  app.add_option("--attributions", attributions_dir, "attribution output directory")->required();
  app.add_option("--planner", planner_uri, "planner uri for risk labels")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_flag("--normalized-coords", normalized_coords,
               "divide pixel coordinates by (H, W) in the spatial variance");
  app.add_option("--jobs", jobs, "parallel sample workers (0 = auto)");
  parse_args(app, args);

  const SceneManifest manifest = load_manifest(manifest_path);
  const auto samples = all_samples(manifest);
  const PlannerFactory planners = PlannerFactory::make(planner_uri, 0, 1);

  std::vector<FeatureRow> rows(samples.size());
  parallel_for(samples.size(), resolve_jobs(jobs), [&](std::size_t i) {
    const SampleRecord& rec = *samples[i].rec;
    FeatureRow row;
    row.sample_id = rec.sample_id;
    row.scene_id = rec.scene_id;

    const SaliencyTensor saliency =
        read_saliency_tensor(fs::path(attributions_dir) / (rec.sample_id + ".saliency.mvtn"));
    try {
      const AttributionStats stats = attribution_stats(saliency, normalized_coords);
      row.entropy = stats.entropy;
      row.sigma_sp2 = stats.spatial_variance;
      row.gini_cam = stats.gini_cam;
    } catch (const ZeroMassError&) {
      // flagged sample: statistics stay missing, labels and controls remain
    }

    const MatchedControls mc = matched_controls(rec, manifest.height, manifest.width);
    row.n_obj = mc.n_obj;
    row.d_obj = mc.d_obj;
    row.gini_obj = mc.gini_obj;
    const ExtendedControls ec = extended_controls(rec);
    row.ego_speed = ec.ego_speed;
    row.barrier_cone_count = ec.barrier_cone_count;
    row.nearfield_count = ec.nearfield_count;
    row.side_object_count = ec.side_object_count;
    row.mean_radar_pts = ec.mean_radar_pts;
    row.nearest_veh_speed = ec.nearest_veh_speed;
    row.mean_speed_20m = ec.mean_speed_20m;
    row.approach_count = ec.approach_count;
    row.approach_veh_count = ec.approach_veh_count;
    row.dyn_ratio = ec.dyn_ratio;

    const PlannerHandle handle = planners.for_sample(rec.sample_id);
    const ViewTensor x = read_view_tensor(manifest.tensor_file(rec));
    const Trajectory pred = handle.plan(x, nullptr);
    const RiskLabels labels = risk_labels(pred, rec);
    row.ade = labels.ade;
    row.collision = labels.collision_any;
    rows[i] = std::move(row);
  });

  fs::create_directories(out_dir);
  write_feature_csv(rows, fs::path(out_dir) / "features.csv");

  json echo{{"command", "features"},
            {"planner", planner_uri},
            {"normalized_coords", normalized_coords},
            {"toolkit_version", kVersion}};
  echo["config_hash"] = config_hash(echo);
  write_json(echo, fs::path(out_dir) / "features_config.json");
  std::cout << "features: " << rows.size() << " rows -> features.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit-eval

int cmd_fit_eval(const std::vector<std::string>& args) {
  CLI::App app{"fit risk models and run the evaluation protocol"};
  std::string features_path, out_dir, config;
  EvalOptions opts;
  std::string budgets = "5,10,20";
  app.add_option("--config", config, "JSON config file");
  app.add_option("--features", features_path, "features.csv path")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--ridge-lambda", opts.ridge_lambda, "ridge regularization");
  app.add_option("--logistic-lambda", opts.logistic_lambda, "logistic regularization");
  app.add_option("--bootstrap", opts.bootstrap_resamples, "bootstrap resamples");
  app.add_option("--confidence", opts.confidence, "bootstrap confidence level");
  app.add_option("--splits", opts.n_splits, "random scene splits");
  app.add_option("--train-frac", opts.train_frac, "train fraction of scenes");
  app.add_option("--budgets", budgets, "triage budgets, comma-separated percents");
  app.add_option("--seed", opts.seed, "evaluation seed");
  parse_args(app, args);

  opts.triage_budgets = parse_double_list(budgets);

  const auto rows = read_feature_csv(features_path);
  json report = fit_eval(rows, opts);
  json meta{{"command", "fit-eval"},
            {"toolkit_version", kVersion},
            {"budgets", opts.triage_budgets},
            {"seed", opts.seed},
            {"ridge_lambda", opts.ridge_lambda},
            {"logistic_lambda", opts.logistic_lambda}};
  meta["config_hash"] = config_hash(meta);
  report["metadata"] = meta;

  fs::create_directories(out_dir);
  write_json(report, fs::path(out_dir) / "eval_report.json");
  write_eval_tables(report, out_dir);
  std::cout << "fit-eval: " << rows.size() << " rows -> eval_report.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// faithfulness

int cmd_faithfulness(const std::vector<std::string>& args) {
  CLI::App app{"insertion/deletion faithfulness for attribution directories"};
  std::string manifest_path, planner_uri, out_dir, config;
  std::vector<std::string> attribution_dirs;
  ObjectiveConfig obj;
  int jobs = 0;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--manifest", manifest_path, "manifest path")->required();
  app.add_option("--planner", planner_uri, "planner uri")->required();
  app.add_option("--attributions", attribution_dirs, "attribution directory (repeatable)")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--baseline", obj.baseline, "masking baseline value");
  app.add_option("--jobs", jobs, "parallel sample workers (0 = auto)");
  {
    // keep TakeAll on the repeatable option, TakeLast elsewhere
    for (auto* opt : app.get_options()) {
      if (opt->get_name() != "--attributions" && opt->get_name() != "--help") {
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
    }
    std::vector<std::string> overlaid = overlay_config(args);
    std::reverse(overlaid.begin(), overlaid.end());
    try {
      app.parse(overlaid);
    } catch (const CLI::CallForHelp&) {
      std::cout << app.help();
      std::exit(0);
    }
  }

  const SceneManifest manifest = load_manifest(manifest_path);
  const auto samples = all_samples(manifest);
  const PlannerFactory planners = PlannerFactory::make(planner_uri, 0, 1);

  json methods = json::object();
  json per_sample = json::object();
  json time_table = json::object();
  for (const auto& dir : attribution_dirs) {
    const json cfg = read_json(fs::path(dir) / "attribute_config.json", "attribute config");
    const std::string method = cfg.at("method").get<std::string>();
    const int grid_rows = cfg.at("grid_rows").get<int>();
    const int grid_cols = cfg.at("grid_cols").get<int>();
    const RegionPartition partition =
        grid_partition(manifest.cameras, manifest.height, manifest.width, grid_rows, grid_cols);

    std::vector<double> ins(samples.size()), del(samples.size()), sh(samples.size());
    parallel_for(samples.size(), resolve_jobs(jobs), [&](std::size_t i) {
      const SampleRecord& rec = *samples[i].rec;
      const AttributionResult attribution =
          load_attribution(fs::path(dir) / (rec.sample_id + ".saliency.mvtn"),
                           fs::path(dir) / (rec.sample_id + ".attribution.json"));
      const ViewTensor x = read_view_tensor(manifest.tensor_file(rec));
      const PlannerHandle handle = planners.for_sample(rec.sample_id);
      const FaithfulnessResult f =
          insertion_deletion(handle, x, partition, attribution.selection.ids, obj, 1);
      ins[i] = f.insertion_auc;
      del[i] = f.deletion_auc;
      sh[i] = f.s_high;
    });

    auto summarize = [&](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      json j{{"mean", mean}};
      if (v.size() > 1) {
        j["half_width"] = 0.5 * (quantile(v, 0.975) - quantile(v, 0.025));
      }
      return j;
    };
    methods[method] = {{"insertion_auc", summarize(ins)},
                       {"deletion_auc", summarize(del)},
                       {"s_high", summarize(sh)},
                       {"samples", samples.size()}};
    for (std::size_t i = 0; i < samples.size(); ++i) {
      per_sample[samples[i].rec->sample_id][method] = {
          {"insertion_auc", ins[i]}, {"deletion_auc", del[i]}, {"s_high", sh[i]}};
    }
    // mean wall-clock from the attribution run's timing diagnostics
    const fs::path timing_path = fs::path(dir) / "timing.json";
    if (fs::exists(timing_path)) {
      const json timing = read_json(timing_path, "timing");
      time_table[method] = timing.at("mean_seconds");
    }
  }

  fs::create_directories(out_dir);
  json report{{"methods", methods},
              {"per_sample", per_sample},
              {"score_normalization", "s = max(0, 1 - L2/D0), D0 = L2(y(empty), y)"},
              {"metadata", {{"command", "faithfulness"}, {"toolkit_version", kVersion}}}};
  write_json(report, fs::path(out_dir) / "faithfulness.json");

  {
    std::ofstream out(fs::path(out_dir) / "faithfulness.csv");
    out << "method,insertion_auc,insertion_half_width,deletion_auc,deletion_half_width,"
           "s_high,s_high_half_width\n";
    auto hw = [](const json& j) {
      return j.contains("half_width") ? std::to_string(j.at("half_width").get<double>())
                                      : std::string();
    };
    for (const auto& [method, j] : methods.items()) {
      out << method << ',' << j.at("insertion_auc").at("mean").get<double>() << ','
          << hw(j.at("insertion_auc")) << ',' << j.at("deletion_auc").at("mean").get<double>()
          << ',' << hw(j.at("deletion_auc")) << ',' << j.at("s_high").at("mean").get<double>()
          << ',' << hw(j.at("s_high")) << '\n';
    }
  }
  {
    // per-method table with the wall-clock column; excluded from byte-identity
    std::ofstream out(fs::path(out_dir) / "faithfulness_with_time.csv");
    out << "method,insertion_auc,deletion_auc,s_high,mean_seconds\n";
    for (const auto& [method, j] : methods.items()) {
      out << method << ',' << j.at("insertion_auc").at("mean").get<double>() << ','
          << j.at("deletion_auc").at("mean").get<double>() << ','
          << j.at("s_high").at("mean").get<double>() << ',';
      if (time_table.contains(method)) out << time_table.at(method).get<double>();
      out << '\n';
    }
  }
  std::cout << "faithfulness: " << attribution_dirs.size() << " method(s) -> faithfulness.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// prop-check

int cmd_prop_check(const std::vector<std::string>& args) {
  CLI::App app{"verify normalization/monotonicity/submodularity and the greedy bound"};
  std::string out_path, budgets = "2,3,4", config;
  int instances = 200, max_regions = 16, grouped_groups = 5;
  std::uint64_t seed = 7;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--instances", instances, "random coverage instances");
  app.add_option("--max-regions", max_regions, "max |V| for the ratio check (<= 16)");
  app.add_option("--grouped-groups", grouped_groups, "group count for grouped checks (<= 10)");
  app.add_option("--budgets", budgets, "greedy budgets, comma-separated");
  app.add_option("--seed", seed, "instance seed");
  app.add_option("--out", out_path, "write the JSON report here (default stdout)");
  parse_args(app, args);

  std::vector<int> budget_list;
  for (double b : parse_double_list(budgets)) budget_list.push_back(static_cast<int>(b));

  const double bound = 1.0 - 1.0 / std::exp(1.0);
  double min_ratio = 1.0;
  bool ratio_ok = true, properties_ok = true, grouped_ok = true;
  json failures = json::array();

  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    const int n = 4 + static_cast<int>(rng.uniform_int(0, max_regions - 4));
    const int elements = 2 * n;
    const CoverageFunction cov = random_coverage(n, elements, rng.next_u64());
    const SetFunction f = coverage_as_set_function(cov);

    for (int b : budget_list) {
      const GreedyRatio gr = greedy_ratio(f, n, std::min(b, n));
      min_ratio = std::min(min_ratio, gr.ratio);
      if (gr.ratio < bound - 1e-12) {
        ratio_ok = false;
        failures.push_back({{"instance", i}, {"budget", b}, {"ratio", gr.ratio}});
      }
    }

    if (n <= 12) {
      const PropertyReport pr = check_properties(f, n);
      if (!pr.all()) {
        properties_ok = false;
        failures.push_back({{"instance", i}, {"property_check", false}});
      }
      // random partition into groups, the grouped domain must inherit all three
      const int m = std::min(grouped_groups, n);
      std::vector<std::uint32_t> masks(m, 0);
      for (int v = 0; v < n; ++v) {
        masks[rng.uniform_int(0, m - 1)] |= 1u << v;
      }
      std::vector<std::uint32_t> nonempty;
      for (auto msk : masks) {
        if (msk) nonempty.push_back(msk);
      }
      const PropertyReport gp = check_grouped(f, nonempty);
      if (!gp.all()) {
        grouped_ok = false;
        failures.push_back({{"instance", i}, {"grouped_check", false}});
      }
    }
  }

  // supermodular counterexample: |S|^2 must fail with a concrete witness
  const SetFunction square = [](std::uint32_t mask) {
    const double k = static_cast<double>(std::popcount(mask));
    return k * k;
  };
  const PropertyReport square_report = check_properties(square, 4);
  json witness;
  if (square_report.submodular_witness) {
    const auto& w = *square_report.submodular_witness;
    witness = {{"a_mask", w.a}, {"b_mask", w.b}, {"h", w.h}, {"lhs", w.lhs}, {"rhs", w.rhs}};
  }

  json report{{"instances", instances},
              {"budgets", budget_list},
              {"bound", bound},
              {"min_ratio", min_ratio},
              {"ratio_ok", ratio_ok},
              {"properties_ok", properties_ok},
              {"grouped_ok", grouped_ok},
              {"supermodular_detected", !square_report.submodular},
              {"supermodular_witness", witness},
              {"failures", failures},
              {"pass", ratio_ok && properties_ok && grouped_ok && !square_report.submodular},
              {"seed", seed},
              {"toolkit_version", kVersion}};
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_json(report, out_path);
    std::cout << "prop-check: " << (report["pass"].get<bool>() ? "pass" : "FAIL") << " -> "
              << out_path << "\n";
  }
  return report["pass"].get<bool>() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// serve-planner

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop.store(true); }

int cmd_serve_planner(const std::vector<std::string>& args) {
  CLI::App app{"serve a synthetic planner over the wire protocol"};
  std::string spec_path, sample_id, host = "127.0.0.1", config;
  int port = 7471, workers = 4;
  app.add_option("--config", config, "JSON config file");
  app.add_option("--spec", spec_path, "planner spec or planner set JSON")->required();
  app.add_option("--sample", sample_id, "sample id when the spec file is a set");
  app.add_option("--host", host, "bind address");
  app.add_option("--port", port, "bind port (0 = ephemeral)");
  app.add_option("--workers", workers, "per-connection worker threads");
  parse_args(app, args);

  SyntheticPlannerSpec spec;
  const json doc = read_json(spec_path, "planner spec");
  if (doc.contains("samples")) {
    const PlannerSpecSet set = load_planner_set(spec_path);
    if (sample_id.empty()) {
      throw ArgumentError("spec file is a set; pick an entry with --sample");
    }
    spec = set.for_sample(sample_id);
  } else {
    spec = load_planner_spec(spec_path);
  }

  PlannerServer server(make_synthetic_planner(spec), host, port, workers);
  std::cout << "serving planner on " << host << ":" << server.port() << "\n" << std::flush;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    std::cout << "planrisk " << kVersion
              << "\nusage: planrisk <command> [options]\n\n"
                 "commands:\n"
                 "  synth          generate a seeded synthetic dataset\n"
                 "  partition      compute per-sample region partitions\n"
                 "  attribute      run attribution (exact | hier | rise)\n"
                 "  features       attribution statistics + scene controls + risk labels\n"
                 "  fit-eval       fit ridge/logistic models and evaluate\n"
                 "  faithfulness   insertion/deletion curves per method\n"
                 "  prop-check     submodularity and greedy-bound verification\n"
                 "  serve-planner  expose a synthetic planner over the wire protocol\n\n"
                 "run 'planrisk <command> --help' for options; every command accepts\n"
                 "--config <file.json> with long option names as keys.\n";
    return args.empty() ? 2 : 0;
  }

  const std::string cmd = args[0];
  try {
    if (cmd == "synth") return cmd_synth(args);
    if (cmd == "partition") return cmd_partition(args);
    if (cmd == "attribute") return cmd_attribute(args);
    if (cmd == "features") return cmd_features(args);
    if (cmd == "fit-eval") return cmd_fit_eval(args);
    if (cmd == "faithfulness") return cmd_faithfulness(args);
    if (cmd == "prop-check") return cmd_prop_check(args);
    if (cmd == "serve-planner") return cmd_serve_planner(args);
    std::cerr << "unknown command: " << cmd << " (run 'planrisk --help')\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "argument error: " << e.what() << "\nrun 'planrisk " << cmd << " --help'\n";
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
