#include "tagalign/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <limits>

#include <json.hpp>

#include "tagalign/io_util.hpp"

namespace tagalign {

namespace {

constexpr int kMinTagHamming = 100;    // bits between any two planted descriptors
constexpr double kMinTagL2Factor = 3.0;  // times the float absolute threshold
constexpr double kFloatAbsMax = 1.0;

Eigen::Matrix3d random_rotation(Rng& rng) {
  // uniform axis on the sphere, uniform angle in [0, pi)
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Eigen::Vector3d axis(r * std::cos(phi), r * std::sin(phi), z);
  const double angle = rng.uniform(0.0, M_PI);
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

BinaryDescriptor random_binary(Rng& rng) {
  std::array<std::uint8_t, 32> octets;
  for (auto& o : octets) o = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  return BinaryDescriptor(octets);
}

BinaryDescriptor flip_bits(const BinaryDescriptor& d, int n_bits, Rng& rng) {
  auto octets = d.octets();
  std::vector<int> positions(256);
  for (int i = 0; i < 256; ++i) positions[i] = i;
  for (int k = 0; k < n_bits; ++k) {
    const std::size_t pick = k + rng.below(256 - k);
    std::swap(positions[k], positions[pick]);
    octets[positions[k] / 8] ^= static_cast<std::uint8_t>(1u << (positions[k] % 8));
  }
  return BinaryDescriptor(octets);
}

// volatile keeps gcc from folding the double->float->double narrowing away
double quantize_f32(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

// float32-quantized so FEAT1 round-trips reproduce values exactly
FloatDescriptor random_float_desc(Rng& rng, int dim) {
  std::vector<double> vals(dim);
  for (auto& v : vals) v = quantize_f32(rng.uniform());
  return FloatDescriptor(std::move(vals));
}

FloatDescriptor perturb(const FloatDescriptor& d, double sigma, Rng& rng) {
  std::vector<double> vals = d.values();
  for (auto& v : vals) v = quantize_f32(v + rng.normal(0.0, sigma));
  return FloatDescriptor(std::move(vals));
}

bool far_from_all_binary(const BinaryDescriptor& d,
                         const std::vector<BinaryDescriptor>& others) {
  for (const auto& o : others) {
    if (hamming_distance(d, o) < kMinTagHamming) return false;
  }
  return true;
}

bool far_from_all_float(const FloatDescriptor& d,
                        const std::vector<FloatDescriptor>& others) {
  for (const auto& o : others) {
    if (l2_distance(d, o) < kMinTagL2Factor * kFloatAbsMax) return false;
  }
  return true;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string tag_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "tag_%03d", i);
  return buf;
}

}  // namespace

void SceneConfig::validate() const {
  if (n_tags < 4) throw ConfigInvalid("n_tags must be at least 4");
  if (points_per_tag < 4) throw ConfigInvalid("points_per_tag must be at least 4");
  if (n_background_points < 0) throw ConfigInvalid("n_background_points negative");
  if (!(extent > 0.0)) throw ConfigInvalid("extent must be positive");
  if (tag_spatial_sigma < 0.0 || coord_noise_sigma < 0.0 ||
      descriptor_noise_sigma < 0.0) {
    throw ConfigInvalid("sigmas must be nonnegative");
  }
  if (descriptor_flip_bits < 0 || descriptor_flip_bits > 256) {
    throw ConfigInvalid("descriptor_flip_bits outside [0, 256]");
  }
  if (distractor_fraction < 0.0 || distractor_fraction >= 1.0) {
    throw ConfigInvalid("distractor_fraction outside [0, 1)");
  }
  if (float_dim < 1) throw ConfigInvalid("float_dim must be at least 1");
  if (true_transform && !(true_transform->scale > 0.0)) {
    throw ConfigInvalid("true transform scale must be positive");
  }
}

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.config = cfg;

  Rng truth_rng = Rng(cfg.seed).fork(0);
  if (cfg.true_transform) {
    scene.truth = *cfg.true_transform;
  } else {
    scene.truth.scale = truth_rng.uniform(0.8, 1.25);
    scene.truth.rotation = random_rotation(truth_rng);
    scene.truth.translation = {truth_rng.uniform(-1.0, 1.0),
                               truth_rng.uniform(-1.0, 1.0),
                               truth_rng.uniform(-1.0, 1.0)};
  }

  // --- geometry in cloud A -------------------------------------------------
  Rng geo = Rng(cfg.seed).fork(1);
  const double min_sep =
      std::max(0.1 * cfg.extent, 20.0 * cfg.tag_spatial_sigma);

  std::vector<Point3> tag_centers;
  while (static_cast<int>(tag_centers.size()) < cfg.n_tags) {
    const Point3 c{geo.uniform(0.15 * cfg.extent, 0.85 * cfg.extent),
                   geo.uniform(0.15 * cfg.extent, 0.85 * cfg.extent),
                   geo.uniform(0.15 * cfg.extent, 0.85 * cfg.extent)};
    const bool ok = std::all_of(tag_centers.begin(), tag_centers.end(),
                                [&](const Point3& o) { return distance(c, o) >= min_sep; });
    if (ok) tag_centers.push_back(c);
  }

  const int n_distractors_per_tag =
      static_cast<int>(cfg.distractor_fraction * cfg.points_per_tag);

  std::vector<Point3> coords_a;
  for (int i = 0; i < cfg.n_background_points; ++i) {
    coords_a.push_back({geo.uniform(0.0, cfg.extent), geo.uniform(0.0, cfg.extent),
                        geo.uniform(0.0, cfg.extent)});
  }
  for (int t = 0; t < cfg.n_tags; ++t) {
    scene.tag_point_indices.emplace_back();
    for (int k = 0; k < cfg.points_per_tag; ++k) {
      scene.tag_point_indices.back().push_back(coords_a.size());
      coords_a.push_back({tag_centers[t].x + geo.normal(0.0, cfg.tag_spatial_sigma),
                          tag_centers[t].y + geo.normal(0.0, cfg.tag_spatial_sigma),
                          tag_centers[t].z + geo.normal(0.0, cfg.tag_spatial_sigma)});
    }
  }
  // distractor points: isolated, far from every tag and from each other
  std::vector<std::vector<std::size_t>> distractor_indices(cfg.n_tags);
  std::vector<Point3> placed_distractors;
  for (int t = 0; t < cfg.n_tags; ++t) {
    for (int k = 0; k < n_distractors_per_tag; ++k) {
      while (true) {
        const Point3 c{geo.uniform(0.0, cfg.extent), geo.uniform(0.0, cfg.extent),
                       geo.uniform(0.0, cfg.extent)};
        const bool clear_of_tags =
            std::all_of(tag_centers.begin(), tag_centers.end(),
                        [&](const Point3& o) { return distance(c, o) >= min_sep; });
        const bool clear_of_peers = std::all_of(
            placed_distractors.begin(), placed_distractors.end(),
            [&](const Point3& o) { return distance(c, o) >= min_sep; });
        if (clear_of_tags && clear_of_peers) {
          distractor_indices[t].push_back(coords_a.size());
          coords_a.push_back(c);
          placed_distractors.push_back(c);
          break;
        }
      }
    }
  }

  // --- cloud B geometry: truth-mapped + optional noise ---------------------
  Rng noise = Rng(cfg.seed).fork(2);
  const HomogeneousTransform truth_h = similarity_to_homogeneous(scene.truth);
  std::vector<Point3> coords_b;
  coords_b.reserve(coords_a.size());
  for (const Point3& p : coords_a) {
    Point3 q = apply_transform(truth_h, p);
    if (cfg.coord_noise_sigma > 0.0) {
      q.x += noise.normal(0.0, cfg.coord_noise_sigma);
      q.y += noise.normal(0.0, cfg.coord_noise_sigma);
      q.z += noise.normal(0.0, cfg.coord_noise_sigma);
    }
    coords_b.push_back(q);
  }

  // --- descriptors ----------------------------------------------------------
  Rng desc_bin = Rng(cfg.seed).fork(3);
  Rng desc_float = Rng(cfg.seed).fork(4);

  const std::size_t n_planted =
      static_cast<std::size_t>(cfg.n_tags) *
      static_cast<std::size_t>(cfg.points_per_tag + n_distractors_per_tag);
  std::vector<BinaryDescriptor> planted_bin;
  std::vector<FloatDescriptor> planted_float;
  while (planted_bin.size() < n_planted) {
    const BinaryDescriptor d = random_binary(desc_bin);
    if (far_from_all_binary(d, planted_bin)) planted_bin.push_back(d);
  }
  while (planted_float.size() < n_planted) {
    const FloatDescriptor d = random_float_desc(desc_float, cfg.float_dim);
    if (far_from_all_float(d, planted_float)) planted_float.push_back(d);
  }

  std::vector<BinaryDescriptor> background_bin;
  std::vector<FloatDescriptor> background_float;
  background_bin.reserve(cfg.n_background_points);
  background_float.reserve(cfg.n_background_points);
  while (static_cast<int>(background_bin.size()) < cfg.n_background_points) {
    const BinaryDescriptor d = random_binary(desc_bin);
    if (far_from_all_binary(d, planted_bin)) background_bin.push_back(d);
  }
  while (static_cast<int>(background_float.size()) < cfg.n_background_points) {
    const FloatDescriptor d = random_float_desc(desc_float, cfg.float_dim);
    if (far_from_all_float(d, planted_float)) background_float.push_back(d);
  }

  // --- assemble clouds -------------------------------------------------------
  scene.slam_cloud.kind = DescriptorKind::kBinary;
  scene.slam_cloud.source = "slam";
  scene.sfm_cloud.kind = DescriptorKind::kFloat;
  scene.sfm_cloud.source = "sfm";

  Rng color_rng = Rng(cfg.seed).fork(5);
  std::size_t planted_cursor = 0;  // consumed in point order below
  std::vector<std::size_t> planted_index_of_point(coords_a.size(),
                                                  std::numeric_limits<std::size_t>::max());
  for (int t = 0; t < cfg.n_tags; ++t) {
    for (std::size_t idx : scene.tag_point_indices[t]) {
      planted_index_of_point[idx] = planted_cursor++;
    }
    for (std::size_t idx : distractor_indices[t]) {
      planted_index_of_point[idx] = planted_cursor++;
    }
  }

  std::size_t background_cursor = 0;
  for (std::size_t i = 0; i < coords_a.size(); ++i) {
    const std::size_t planted = planted_index_of_point[i];
    const bool is_planted = planted != std::numeric_limits<std::size_t>::max();
    const BinaryDescriptor& bd =
        is_planted ? planted_bin[planted] : background_bin[background_cursor];
    const FloatDescriptor& fd =
        is_planted ? planted_float[planted] : background_float[background_cursor];
    if (!is_planted) ++background_cursor;
    scene.slam_cloud.entries.push_back({coords_a[i], {bd}, {}});
    scene.sfm_cloud.entries.push_back({coords_b[i], {}, {fd}});
    scene.sfm_point_colors.push_back(
        {static_cast<std::uint8_t>(color_rng.below(256)),
         static_cast<std::uint8_t>(color_rng.below(256)),
         static_cast<std::uint8_t>(color_rng.below(256))});
  }

  // --- tag query sets (optionally corrupted copies of planted descriptors) --
  Rng corrupt = Rng(cfg.seed).fork(6);
  for (int t = 0; t < cfg.n_tags; ++t) {
    TagFeatureSet bin_set, float_set;
    bin_set.tag_id = float_set.tag_id = tag_name(t);
    bin_set.kind = DescriptorKind::kBinary;
    float_set.kind = DescriptorKind::kFloat;
    auto add_query = [&](std::size_t point_idx) {
      const std::size_t planted = planted_index_of_point[point_idx];
      bin_set.binary.push_back(
          flip_bits(planted_bin[planted], cfg.descriptor_flip_bits, corrupt));
      float_set.floats.push_back(
          perturb(planted_float[planted], cfg.descriptor_noise_sigma, corrupt));
    };
    for (std::size_t idx : scene.tag_point_indices[t]) add_query(idx);
    for (std::size_t idx : distractor_indices[t]) add_query(idx);
    scene.slam_tags.push_back(std::move(bin_set));
    scene.sfm_tags.push_back(std::move(float_set));
  }

  // --- ground-truth centroids ------------------------------------------------
  for (int t = 0; t < cfg.n_tags; ++t) {
    std::vector<Point3> pts_a, pts_b;
    for (std::size_t idx : scene.tag_point_indices[t]) {
      pts_a.push_back(coords_a[idx]);
      pts_b.push_back(coords_b[idx]);
    }
    scene.tag_centroids_slam.push_back(centroid(pts_a));
    scene.tag_centroids_sfm.push_back(centroid(pts_b));
  }
  return scene;
}

PointCloud Scene::slam_geometry() const {
  PointCloud cloud;
  for (const auto& e : slam_cloud.entries) cloud.points.push_back(e.coord);
  return cloud;
}

PointCloud Scene::sfm_geometry() const {
  PointCloud cloud;
  cloud.colors.emplace();
  for (std::size_t i = 0; i < sfm_cloud.entries.size(); ++i) {
    cloud.points.push_back(sfm_cloud.entries[i].coord);
    cloud.colors->push_back(sfm_point_colors[i]);
  }
  return cloud;
}

SimilarityTransform decompose_similarity(const HomogeneousTransform& h, double tol) {
  const Eigen::Matrix3d m = h.linear();
  const double det = m.determinant();
  if (!(det > 0.0)) {
    throw NotASimilarity("linear block has non-positive determinant");
  }
  SimilarityTransform st;
  st.scale = std::cbrt(det);
  st.rotation = m / st.scale;
  const double orth_err =
      (st.rotation.transpose() * st.rotation - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (orth_err > tol) {
    throw NotASimilarity("linear block is not a scaled rotation (error " +
                         std::to_string(orth_err) + ")");
  }
  st.translation = h.translation();
  return st;
}

EvalMetrics evaluate(const HomogeneousTransform& recovered,
                     const SimilarityTransform& truth,
                     const CorrespondenceSet& tag_locations, int tags_expected) {
  EvalMetrics m;
  m.tags_expected = tags_expected;
  m.tags_recovered = static_cast<int>(tag_locations.pairs.size());
  m.tag_centroid_rmse = alignment_residuals(recovered, tag_locations).rmse;

  try {
    const SimilarityTransform rec = decompose_similarity(recovered);
    const Eigen::Matrix3d rel = rec.rotation * truth.rotation.transpose();
    m.rotation_error_rad = rotation_angle(rel);
    m.scale_error_rel = std::abs(rec.scale / truth.scale - 1.0);
    m.translation_error = (rec.translation - truth.translation).norm();
  } catch (const NotASimilarity&) {
    m.similarity_valid = false;
    const Eigen::Matrix4d diff =
        recovered.matrix() - similarity_to_homogeneous(truth).matrix();
    m.affine_max_entry_error = diff.cwiseAbs().maxCoeff();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fixture export in the ingest formats

void export_scene(const Scene& scene, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  fs::create_directories(directory + "/features");
  fs::create_directories(directory + "/tags");

  // MAPTXT for the slam cloud
  SlamMapExport map;
  for (std::size_t i = 0; i < scene.slam_cloud.entries.size(); ++i) {
    map.points.push_back({static_cast<std::int64_t>(i),
                          scene.slam_cloud.entries[i].coord,
                          scene.slam_cloud.entries[i].binary[0]});
  }
  write_file_atomic(directory + "/map.txt", write_slam_export(map));

  // reconstruction.json + tracks + FEAT1 for the sfm cloud (single image)
  const std::string image_name = "image_000.jpg";
  nlohmann::json points = nlohmann::json::object();
  std::string tracks = "OPENSFM_TRACKS_VERSION 2\n";
  std::vector<FloatDescriptor> image_feats;
  for (std::size_t i = 0; i < scene.sfm_cloud.entries.size(); ++i) {
    const auto& e = scene.sfm_cloud.entries[i];
    const Rgb& c = scene.sfm_point_colors[i];
    const std::string track_id = std::to_string(i);
    points[track_id] = {
        {"coordinates", {e.coord.x, e.coord.y, e.coord.z}},
        {"color", {c[0], c[1], c[2]}},
    };
    tracks += image_name + "\t" + track_id + "\t" + std::to_string(i) + "\n";
    image_feats.push_back(e.floats[0]);
  }
  nlohmann::json reconstruction = nlohmann::json::array({{{"points", points}}});
  write_file_atomic(directory + "/reconstruction.json", reconstruction.dump(2));
  write_file_atomic(directory + "/tracks.csv", tracks);
  write_file_atomic(directory + "/features/" + image_name + ".feat",
                    std::span<const std::uint8_t>(write_feature_archive(image_feats)));

  write_file_atomic(directory + "/merge.ply",
                    std::span<const std::uint8_t>(write_ply(scene.sfm_geometry())));

  // per-tag query archives: MAPTXT (binary) and FEAT1 (float)
  for (std::size_t t = 0; t < scene.slam_tags.size(); ++t) {
    const auto& bin_set = scene.slam_tags[t];
    SlamMapExport tag_map;
    for (std::size_t k = 0; k < bin_set.binary.size(); ++k) {
      tag_map.points.push_back(
          {static_cast<std::int64_t>(k), Point3{}, bin_set.binary[k]});
    }
    write_file_atomic(directory + "/tags/" + bin_set.tag_id + ".maptxt",
                      write_slam_export(tag_map));
    write_file_atomic(
        directory + "/tags/" + scene.sfm_tags[t].tag_id + ".feat",
        std::span<const std::uint8_t>(write_feature_archive(scene.sfm_tags[t].floats)));
  }

  // truth manifest
  const Eigen::Matrix4d h = similarity_to_homogeneous(scene.truth).matrix();
  nlohmann::json manifest;
  manifest["seed"] = scene.config.seed;
  manifest["scale"] = scene.truth.scale;
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) rot.push_back(scene.truth.rotation(r, col));
  manifest["rotation"] = rot;
  manifest["translation"] = {scene.truth.translation.x(),
                             scene.truth.translation.y(),
                             scene.truth.translation.z()};
  nlohmann::json mat = nlohmann::json::array();
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) mat.push_back(h(r, col));
  manifest["matrix"] = mat;
  manifest["tags_expected"] = scene.config.n_tags;
  nlohmann::json tags = nlohmann::json::object();
  for (std::size_t t = 0; t < scene.slam_tags.size(); ++t) {
    const Point3& a = scene.tag_centroids_slam[t];
    const Point3& b = scene.tag_centroids_sfm[t];
    tags[scene.slam_tags[t].tag_id] = {
        {"slam", {a.x, a.y, a.z}},
        {"sfm", {b.x, b.y, b.z}},
    };
  }
  manifest["tags"] = tags;
  write_file_atomic(directory + "/manifest.json", manifest.dump(2));
}

}  // namespace tagalign
