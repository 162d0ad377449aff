#include "tagalign/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>

#include <json.hpp>

#include "tagalign/alignment.hpp"
#include "tagalign/io_util.hpp"
#include "tagalign/synth.hpp"
#include "tagalign/tag_localization.hpp"
#include "tagalign/toml_lite.hpp"

namespace tagalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool log_enabled() {
  const char* env = std::getenv("TAGALIGN_LOG");
  if (!env) return true;
  const std::string v(env);
  return !(v == "quiet" || v == "off" || v == "0");
}

void log_event(const std::string& event, json fields = json::object()) {
  if (!log_enabled()) return;
  fields["event"] = event;
  std::cerr << fields.dump() << "\n";
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

struct PipelineConfig {
  std::string base_dir;
  std::string slam_map, reconstruction, tracks, features_dir, tags_dir, merge_ply;
  std::string output_dir;
  std::vector<std::string> tag_ids;
  RatioTestConfig binary_cfg, float_cfg;
  double slam_epsilon = 0.0, sfm_epsilon = 0.0;  // 0 = auto
  int slam_min_support = 4, sfm_min_support = 4;
  std::string method = "dlt";
  std::string direction = "slam-to-sfm";
  TomlTable raw;
};

PipelineConfig load_pipeline_config(const PipelineOptions& opts) {
  PipelineConfig cfg;
  cfg.raw = TomlTable::parse(read_file_text(opts.config_path));
  const TomlTable& t = cfg.raw;
  cfg.base_dir = fs::path(opts.config_path).parent_path().string();

  cfg.slam_map = resolve(t.get_string("paths.slam_map", ""), cfg.base_dir);
  cfg.reconstruction = resolve(t.get_string("paths.reconstruction", ""), cfg.base_dir);
  cfg.tracks = resolve(t.get_string("paths.tracks", ""), cfg.base_dir);
  cfg.features_dir = resolve(t.get_string("paths.features_dir", ""), cfg.base_dir);
  cfg.tags_dir = resolve(t.get_string("paths.tags_dir", ""), cfg.base_dir);
  cfg.merge_ply = resolve(t.get_string("paths.merge_ply", ""), cfg.base_dir);
  cfg.output_dir = resolve(t.get_string("paths.output_dir", "out"), cfg.base_dir);
  if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;

  if (t.has("tags.ids")) cfg.tag_ids = t.get_string_array("tags.ids");

  cfg.binary_cfg.ratio_max = t.get_double("matching.binary.ratio_max", 0.7);
  cfg.binary_cfg.abs_max_binary = t.get_double("matching.binary.abs_max", 0.35);
  cfg.float_cfg.ratio_max = t.get_double("matching.float.ratio_max", 0.7);
  cfg.float_cfg.abs_max_float = t.get_double("matching.float.abs_max", 1.0);

  cfg.slam_epsilon = t.get_double("clustering.slam.epsilon", 0.0);
  cfg.slam_min_support = static_cast<int>(t.get_int("clustering.slam.min_support", 4));
  cfg.sfm_epsilon = t.get_double("clustering.sfm.epsilon", 0.0);
  cfg.sfm_min_support = static_cast<int>(t.get_int("clustering.sfm.min_support", 4));

  cfg.method = t.get_string("alignment.method", "dlt");
  cfg.direction = t.get_string("alignment.direction", "slam-to-sfm");
  if (!opts.method.empty()) cfg.method = opts.method;
  if (!opts.direction.empty()) cfg.direction = opts.direction;
  if (cfg.method != "dlt" && cfg.method != "similarity") {
    throw ConfigInvalid("alignment.method must be 'dlt' or 'similarity'");
  }
  if (cfg.direction != "slam-to-sfm" && cfg.direction != "sfm-to-slam") {
    throw ConfigInvalid("alignment.direction must be 'slam-to-sfm' or 'sfm-to-slam'");
  }
  return cfg;
}

DescribedCloud load_slam_cloud(const PipelineConfig& cfg) {
  return parse_slam_export(read_file_text(cfg.slam_map)).to_described_cloud();
}

DescribedCloud load_sfm_cloud(const PipelineConfig& cfg, JoinReport* report) {
  const SfmReconstruction rec =
      parse_reconstruction(read_file_text(cfg.reconstruction));
  const TrackTable tracks = parse_tracks(read_file_text(cfg.tracks));
  FeatureArchive feats;
  std::set<std::string> images;
  for (const auto& row : tracks.rows) images.insert(row.image_name);
  for (const std::string& image : images) {
    const std::string path = (fs::path(cfg.features_dir) / (image + ".feat")).string();
    if (!fs::exists(path)) continue;  // counted by the join as a missing image
    feats.images[image] = parse_feature_archive(read_file_bytes(path));
  }
  return join_descriptors_to_points(rec, tracks, feats, report);
}

std::vector<TagFeatureSet> load_tag_sets(const PipelineConfig& cfg,
                                         DescriptorKind kind) {
  std::vector<TagFeatureSet> sets;
  for (const std::string& id : cfg.tag_ids) {
    TagFeatureSet set;
    set.tag_id = id;
    set.kind = kind;
    if (kind == DescriptorKind::kBinary) {
      const std::string path = (fs::path(cfg.tags_dir) / (id + ".maptxt")).string();
      for (const auto& pt : parse_slam_export(read_file_text(path)).points) {
        set.binary.push_back(pt.descriptor);
      }
    } else {
      const std::string path = (fs::path(cfg.tags_dir) / (id + ".feat")).string();
      set.floats = parse_feature_archive(read_file_bytes(path));
    }
    if (set.size() == 0) throw ConfigInvalid("tag archive for '" + id + "' is empty");
    sets.push_back(std::move(set));
  }
  return sets;
}

json location_to_json(const TagLocation& loc) {
  return json{{"tag_id", loc.tag_id},
              {"cloud", loc.cloud_label},
              {"coordinate", {loc.coordinate.x, loc.coordinate.y, loc.coordinate.z}},
              {"support", loc.support}};
}

void write_tag_report(const std::string& path, const std::string& cloud_label,
                      const LocalizationResult& result, double epsilon) {
  json doc;
  doc["cloud"] = cloud_label;
  doc["epsilon"] = epsilon;
  doc["tags"] = json::array();
  for (const auto& loc : result.locations) doc["tags"].push_back(location_to_json(loc));
  doc["misses"] = result.misses;
  doc["coincident"] = json::array();
  for (const auto& [a, b] : result.coincident) {
    doc["coincident"].push_back({a, b});
  }
  write_file_atomic(path, doc.dump(2));
}

struct TagReport {
  std::string cloud;
  std::vector<TagLocation> locations;
};

TagReport read_tag_report(const std::string& path) {
  TagReport report;
  json doc;
  try {
    doc = json::parse(read_file_text(path));
    report.cloud = doc.at("cloud").get<std::string>();
    for (const auto& entry : doc.at("tags")) {
      TagLocation loc;
      loc.tag_id = entry.at("tag_id").get<std::string>();
      const auto& c = entry.at("coordinate");
      loc.coordinate = {c.at(0).get<double>(), c.at(1).get<double>(),
                        c.at(2).get<double>()};
      loc.support = entry.at("support").get<int>();
      loc.cloud_label = report.cloud;
      report.locations.push_back(loc);
    }
  } catch (const json::exception& e) {
    throw MalformedJson(std::string("tag report ") + path + ": " + e.what());
  }
  return report;
}

LocalizationResult localize_cloud(const PipelineConfig& cfg,
                                  const DescribedCloud& cloud,
                                  const std::vector<TagFeatureSet>& tags,
                                  double epsilon_override, int min_support,
                                  double* epsilon_used) {
  ClusterConfig cluster;
  cluster.epsilon = epsilon_override > 0.0 ? epsilon_override : default_epsilon(cloud);
  cluster.min_support = min_support;
  *epsilon_used = cluster.epsilon;
  const RatioTestConfig& match_cfg =
      cloud.kind == DescriptorKind::kBinary ? cfg.binary_cfg : cfg.float_cfg;
  return localize_all_tags(tags, cloud, match_cfg, cluster);
}

}  // namespace

int cmd_localize(const PipelineOptions& opts) {
  try {
    const PipelineConfig cfg = load_pipeline_config(opts);
    if (cfg.tag_ids.size() < 4) {
      throw ConfigInvalid("at least 4 tag archives must be listed");
    }
    fs::create_directories(cfg.output_dir);

    const DescribedCloud slam = load_slam_cloud(cfg);
    JoinReport join_report;
    const DescribedCloud sfm = load_sfm_cloud(cfg, &join_report);
    log_event("sfm_join", {{"rows_joined", join_report.rows_joined},
                           {"rows_missing_track", join_report.rows_missing_track},
                           {"rows_missing_image", join_report.rows_missing_image},
                           {"rows_feature_out_of_range",
                            join_report.rows_feature_out_of_range},
                           {"points_excluded", join_report.points_excluded}});

    const auto slam_tags = load_tag_sets(cfg, DescriptorKind::kBinary);
    const auto sfm_tags = load_tag_sets(cfg, DescriptorKind::kFloat);

    double eps_slam = 0.0, eps_sfm = 0.0;
    const LocalizationResult slam_result = localize_cloud(
        cfg, slam, slam_tags, cfg.slam_epsilon, cfg.slam_min_support, &eps_slam);
    const LocalizationResult sfm_result = localize_cloud(
        cfg, sfm, sfm_tags, cfg.sfm_epsilon, cfg.sfm_min_support, &eps_sfm);

    write_tag_report(cfg.output_dir + "/tags_slam.json", "slam", slam_result, eps_slam);
    write_tag_report(cfg.output_dir + "/tags_sfm.json", "sfm", sfm_result, eps_sfm);
    log_event("localize_done",
              {{"slam_found", slam_result.locations.size()},
               {"sfm_found", sfm_result.locations.size()},
               {"slam_missed", slam_result.misses.size()},
               {"sfm_missed", sfm_result.misses.size()}});

    const bool enough = slam_result.locations.size() >= 4 &&
                        sfm_result.locations.size() >= 4;
    return enough ? kExitOk : kExitInsufficientTags;
  } catch (const Error& e) {
    std::cerr << "localize: " << e.what() << "\n";
    return kExitIoOrParse;
  }
}

int cmd_align(const PipelineOptions& opts) {
  try {
    const PipelineConfig cfg = load_pipeline_config(opts);
    const TagReport slam_report = read_tag_report(cfg.output_dir + "/tags_slam.json");
    const TagReport sfm_report = read_tag_report(cfg.output_dir + "/tags_sfm.json");

    const bool slam_is_source = cfg.direction == "slam-to-sfm";
    const TagReport& src_report = slam_is_source ? slam_report : sfm_report;
    const TagReport& dst_report = slam_is_source ? sfm_report : slam_report;

    CorrespondenceSet corr;
    for (const TagLocation& src : src_report.locations) {
      for (const TagLocation& dst : dst_report.locations) {
        if (src.tag_id == dst.tag_id) {
          corr.pairs.push_back({src.tag_id, src.coordinate, dst.coordinate});
          break;
        }
      }
    }
    if (corr.pairs.size() < 4) {
      std::cerr << "align: only " << corr.pairs.size()
                << " common tags between the two reports\n";
      return kExitInsufficientTags;
    }

    HomogeneousTransform transform;
    std::vector<double> singular_values(13, 0.0);
    try {
      if (cfg.method == "dlt") {
        DltSolution sol = solve_dlt(corr);
        transform = sol.transform;
        singular_values = sol.singular_values;
      } else {
        transform = similarity_to_homogeneous(estimate_similarity(corr));
      }
    } catch (const TooFewCorrespondences& e) {
      std::cerr << "align: " << e.what() << "\n";
      return kExitInsufficientTags;
    } catch (const DegenerateConfiguration& e) {
      std::cerr << "align: " << e.what() << "\n";
      return kExitDegenerate;
    }
    const ResidualReport residuals = alignment_residuals(transform, corr);

    // merged cloud: transformed source + target with original colors
    PointCloud source_cloud, target_cloud;
    if (slam_is_source) {
      source_cloud = parse_slam_export(read_file_text(cfg.slam_map)).to_point_cloud();
      target_cloud = parse_ply(read_file_bytes(cfg.merge_ply));
    } else {
      source_cloud = parse_ply(read_file_bytes(cfg.merge_ply));
      target_cloud = parse_slam_export(read_file_text(cfg.slam_map)).to_point_cloud();
    }
    PointCloud moved = transform_cloud(source_cloud, transform);
    if (!moved.colors) {
      moved.colors.emplace(moved.points.size(), Rgb{255, 0, 0});
    }
    if (!target_cloud.colors) {
      target_cloud.colors.emplace(target_cloud.points.size(), Rgb{255, 255, 255});
    }
    PointCloud merged = std::move(moved);
    merged.points.insert(merged.points.end(), target_cloud.points.begin(),
                         target_cloud.points.end());
    merged.colors->insert(merged.colors->end(), target_cloud.colors->begin(),
                          target_cloud.colors->end());

    fs::create_directories(cfg.output_dir);
    json report;
    report["method"] = cfg.method;
    report["direction"] = cfg.direction;
    json mat = json::array();
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) mat.push_back(transform.matrix()(r, c));
    }
    report["matrix"] = mat;
    report["per_tag_residuals"] = residuals.per_tag;
    report["rmse"] = residuals.rmse;
    report["singular_values"] = singular_values;
    write_file_atomic(cfg.output_dir + "/alignment.json", report.dump(2));
    write_file_atomic(cfg.output_dir + "/merged.ply",
                      std::span<const std::uint8_t>(write_ply(merged)));
    log_event("align_done", {{"method", cfg.method},
                             {"tags_used", corr.pairs.size()},
                             {"rmse", residuals.rmse}});
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "align: " << e.what() << "\n";
    return kExitIoOrParse;
  }
}

int cmd_synth(const PipelineOptions& opts) {
  try {
    const TomlTable t = TomlTable::parse(read_file_text(opts.config_path));
    const std::string base_dir = fs::path(opts.config_path).parent_path().string();

    SceneConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(t.get_int("scene.seed", 1));
    if (opts.seed) cfg.seed = *opts.seed;
    cfg.n_background_points =
        static_cast<int>(t.get_int("scene.n_background_points", 10000));
    cfg.n_tags = static_cast<int>(t.get_int("scene.n_tags", 6));
    cfg.points_per_tag = static_cast<int>(t.get_int("scene.points_per_tag", 8));
    cfg.tag_spatial_sigma = t.get_double("scene.tag_spatial_sigma", 0.05);
    cfg.extent = t.get_double("scene.extent", 5.0);
    cfg.coord_noise_sigma = t.get_double("scene.coord_noise_sigma", 0.0);
    cfg.descriptor_flip_bits =
        static_cast<int>(t.get_int("scene.descriptor_flip_bits", 0));
    cfg.descriptor_noise_sigma = t.get_double("scene.descriptor_noise_sigma", 0.0);
    cfg.distractor_fraction = t.get_double("scene.distractor_fraction", 0.0);
    cfg.float_dim = static_cast<int>(t.get_int("scene.float_dim", 128));
    if (t.has("transform.scale")) {
      SimilarityTransform truth;
      truth.scale = t.get_double("transform.scale", 1.0);
      const auto axis = t.get_double_array("transform.axis");
      if (axis.size() != 3) throw ConfigInvalid("transform.axis needs 3 entries");
      const double angle = t.get_double("transform.angle_rad", 0.0);
      Eigen::Vector3d a(axis[0], axis[1], axis[2]);
      if (a.norm() == 0.0) throw ConfigInvalid("transform.axis must be nonzero");
      truth.rotation = Eigen::AngleAxisd(angle, a.normalized()).toRotationMatrix();
      const auto tr = t.get_double_array("transform.translation");
      if (tr.size() != 3) throw ConfigInvalid("transform.translation needs 3 entries");
      truth.translation = {tr[0], tr[1], tr[2]};
      cfg.true_transform = truth;
    }

    std::string out_dir = resolve(t.get_string("scene.output_dir", "scene"), base_dir);
    if (!opts.out_dir.empty()) out_dir = opts.out_dir;

    const Scene scene = generate_scene(cfg);
    export_scene(scene, out_dir);
    log_event("synth_done", {{"seed", cfg.seed},
                             {"points", scene.slam_cloud.entries.size()},
                             {"tags", cfg.n_tags},
                             {"out_dir", out_dir}});
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "synth: " << e.what() << "\n";
    return kExitIoOrParse;
  }
}

int cmd_eval(const PipelineOptions& opts) {
  try {
    const TomlTable t = TomlTable::parse(read_file_text(opts.config_path));
    const std::string base_dir = fs::path(opts.config_path).parent_path().string();

    const std::string manifest_path =
        resolve(t.get_string("eval.truth_manifest"), base_dir);
    const std::string report_path =
        resolve(t.get_string("eval.alignment_report"), base_dir);
    std::string out_dir = resolve(t.get_string("eval.output_dir", "."), base_dir);
    if (!opts.out_dir.empty()) out_dir = opts.out_dir;

    json manifest, report;
    try {
      manifest = json::parse(read_file_text(manifest_path));
      report = json::parse(read_file_text(report_path));
    } catch (const json::exception& e) {
      throw MalformedJson(e.what());
    }

    SimilarityTransform truth;
    HomogeneousTransform recovered;
    int tags_expected = 0;
    int tags_recovered = 0;
    double rmse = 0.0;
    try {
      truth.scale = manifest.at("scale").get<double>();
      const auto& rot = manifest.at("rotation");
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) truth.rotation(r, c) = rot.at(3 * r + c).get<double>();
      }
      const auto& tr = manifest.at("translation");
      truth.translation = {tr.at(0).get<double>(), tr.at(1).get<double>(),
                           tr.at(2).get<double>()};
      tags_expected = manifest.at("tags_expected").get<int>();

      Eigen::Matrix4d m;
      const auto& mat = report.at("matrix");
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = mat.at(4 * r + c).get<double>();
      }
      recovered = HomogeneousTransform(m);
      tags_recovered = static_cast<int>(report.at("per_tag_residuals").size());
      rmse = report.at("rmse").get<double>();
    } catch (const json::exception& e) {
      throw MalformedJson(e.what());
    }

    EvalMetrics metrics = evaluate(recovered, truth, CorrespondenceSet{}, tags_expected);
    metrics.tags_recovered = tags_recovered;
    metrics.tag_centroid_rmse = rmse;

    const double rot_gate = t.get_double("eval.rotation_gate_rad", 1e-2);
    const double scale_gate = t.get_double("eval.scale_gate", 1e-2);
    const double trans_gate = t.get_double("eval.translation_gate", 5e-2);
    const double rmse_gate = t.get_double("eval.rmse_gate", 5e-2);
    const int min_tags = static_cast<int>(
        t.get_int("eval.min_tags_recovered", tags_expected));

    json out;
    out["rotation_error_rad"] = metrics.rotation_error_rad;
    out["scale_error_rel"] = metrics.scale_error_rel;
    out["translation_error"] = metrics.translation_error;
    out["tag_centroid_rmse"] = metrics.tag_centroid_rmse;
    out["tags_recovered"] = metrics.tags_recovered;
    out["tags_expected"] = metrics.tags_expected;
    out["similarity_valid"] = metrics.similarity_valid;
    if (!metrics.similarity_valid) {
      out["affine_max_entry_error"] = metrics.affine_max_entry_error;
    }
    fs::create_directories(out_dir);
    write_file_atomic(out_dir + "/metrics.json", out.dump(2));

    const bool gate_failed =
        !metrics.similarity_valid || metrics.rotation_error_rad > rot_gate ||
        metrics.scale_error_rel > scale_gate ||
        metrics.translation_error > trans_gate ||
        metrics.tag_centroid_rmse > rmse_gate || metrics.tags_recovered < min_tags;

    std::cout << "tags recovered: " << metrics.tags_recovered << "/"
              << metrics.tags_expected << "\n"
              << "rotation error (rad): " << metrics.rotation_error_rad << "\n"
              << "scale error (rel):    " << metrics.scale_error_rel << "\n"
              << "translation error:    " << metrics.translation_error << "\n"
              << "tag centroid rmse:    " << metrics.tag_centroid_rmse << "\n"
              << "verdict: " << (gate_failed ? "FAIL" : "PASS") << "\n";
    return gate_failed ? kExitEvalGate : kExitOk;
  } catch (const Error& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return kExitIoOrParse;
  }
}

}  // namespace tagalign
