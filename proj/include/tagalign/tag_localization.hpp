#pragma once

#include <string>
#include <vector>

#include "tagalign/matching.hpp"

namespace tagalign {

struct ClusterConfig {
  double epsilon = 0.0;    // linkage radius in scene units; must be > 0 when used
  int min_support = 4;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigInvalid("cluster epsilon must be positive");
    if (min_support < 4) throw ConfigInvalid("min_support must be at least 4");
  }
};

/// Default linkage radius: 2% of the cloud's bounding-box diagonal.
double default_epsilon(const DescribedCloud& cloud);
double default_epsilon(std::span<const Point3> points);

struct TagLocation {
  std::string tag_id;
  Point3 coordinate;
  int support = 0;
  std::string cloud_label;  // "slam" | "sfm"
};

/// Single-linkage partition: connected components of the graph whose edges
/// join points at distance <= epsilon. Clusters are ordered by their lowest
/// member index; members keep input order.
std::vector<std::vector<std::size_t>> cluster_points(std::span<const Point3> points,
                                                     double epsilon);

TagLocation localize_tag(const std::string& tag_id,
                         std::span<const Point3> potential_matches,
                         const ClusterConfig& cfg, const std::string& cloud_label);

struct LocalizationResult {
  std::vector<TagLocation> locations;
  std::vector<std::string> misses;  // tag ids without a qualifying cluster
  // pairs of tag ids whose estimated coordinates coincide within epsilon
  std::vector<std::pair<std::string, std::string>> coincident;
};

LocalizationResult localize_all_tags(std::span<const TagFeatureSet> tags,
                                     const DescribedCloud& cloud,
                                     const RatioTestConfig& match_cfg,
                                     const ClusterConfig& cluster_cfg);

}  // namespace tagalign
