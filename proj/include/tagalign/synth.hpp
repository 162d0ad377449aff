#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tagalign/alignment.hpp"
#include "tagalign/ingest.hpp"
#include "tagalign/rng.hpp"

namespace tagalign {

/// Parameters of a synthetic two-cloud scene with planted tags.
struct SceneConfig {
  std::uint64_t seed = 1;
  int n_background_points = 10000;
  int n_tags = 6;            // >= 4
  int points_per_tag = 8;    // >= 4
  double tag_spatial_sigma = 0.05;
  double extent = 5.0;       // background points fill [0, extent]^3
  double coord_noise_sigma = 0.0;     // applied to cloud B only
  int descriptor_flip_bits = 0;       // corruption of binary tag queries
  double descriptor_noise_sigma = 0.0;  // corruption of float tag queries
  double distractor_fraction = 0.0;   // extra far-away matches per tag
  int float_dim = 128;

  // when unset, the transform is drawn deterministically from the seed
  std::optional<SimilarityTransform> true_transform;

  void validate() const;
};

struct Scene {
  SceneConfig config;
  SimilarityTransform truth;  // maps cloud A (slam) into cloud B (sfm)

  DescribedCloud slam_cloud;  // binary descriptors
  DescribedCloud sfm_cloud;   // float descriptors
  std::vector<TagFeatureSet> slam_tags;
  std::vector<TagFeatureSet> sfm_tags;

  std::vector<Rgb> sfm_point_colors;  // parallel to sfm_cloud.entries

  // ground truth for evaluation: per-tag point indices and exact centroids
  std::vector<std::vector<std::size_t>> tag_point_indices;  // same in both clouds
  std::vector<Point3> tag_centroids_slam;
  std::vector<Point3> tag_centroids_sfm;

  PointCloud slam_geometry() const;
  PointCloud sfm_geometry() const;  // carries colors
};

Scene generate_scene(const SceneConfig& cfg);

struct EvalMetrics {
  double rotation_error_rad = 0.0;
  double scale_error_rel = 0.0;
  double translation_error = 0.0;
  double tag_centroid_rmse = 0.0;
  int tags_recovered = 0;
  int tags_expected = 0;
  bool similarity_valid = true;   // false when recovered H is not s*R | t
  double affine_max_entry_error = 0.0;  // reported when !similarity_valid
};

/// Extracts (scale, rotation) from H's linear block; throws NotASimilarity
/// when the block is not a positive-scaled rotation within tol.
SimilarityTransform decompose_similarity(const HomogeneousTransform& h,
                                         double tol = 1e-6);

EvalMetrics evaluate(const HomogeneousTransform& recovered,
                     const SimilarityTransform& truth,
                     const CorrespondenceSet& tag_locations, int tags_expected);

/// On-disk fixture in the exact ingest formats, plus a truth manifest.
void export_scene(const Scene& scene, const std::string& directory);

}  // namespace tagalign
