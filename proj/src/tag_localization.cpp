#include "tagalign/tag_localization.hpp"

#include <algorithm>
#include <limits>

namespace tagalign {

namespace {

double bbox_diagonal(std::span<const Point3> points) {
  if (points.empty()) return 0.0;
  Point3 lo = points[0], hi = points[0];
  for (const Point3& p : points) {
    lo.x = std::min(lo.x, p.x); hi.x = std::max(hi.x, p.x);
    lo.y = std::min(lo.y, p.y); hi.y = std::max(hi.y, p.y);
    lo.z = std::min(lo.z, p.z); hi.z = std::max(hi.z, p.z);
  }
  return distance(lo, hi);
}

double mean_pairwise_distance(std::span<const Point3> points,
                              const std::vector<std::size_t>& members) {
  if (members.size() < 2) return 0.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      sum += distance(points[members[i]], points[members[j]]);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

double default_epsilon(std::span<const Point3> points) {
  return 0.02 * bbox_diagonal(points);
}

double default_epsilon(const DescribedCloud& cloud) {
  std::vector<Point3> pts;
  pts.reserve(cloud.entries.size());
  for (const auto& e : cloud.entries) pts.push_back(e.coord);
  return default_epsilon(pts);
}

std::vector<std::vector<std::size_t>> cluster_points(std::span<const Point3> points,
                                                     double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigInvalid("cluster epsilon must be positive");
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<bool> visited(n, false);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (visited[seed]) continue;
    std::vector<std::size_t> members;
    visited[seed] = true;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      members.push_back(i);
      for (std::size_t j = 0; j < n; ++j) {
        if (!visited[j] && distance(points[i], points[j]) <= epsilon) {
          visited[j] = true;
          stack.push_back(j);
        }
      }
    }
    std::sort(members.begin(), members.end());
    clusters.push_back(std::move(members));
  }
  return clusters;
}

TagLocation localize_tag(const std::string& tag_id,
                         std::span<const Point3> potential_matches,
                         const ClusterConfig& cfg, const std::string& cloud_label) {
  cfg.validate();
  const auto clusters = cluster_points(potential_matches, cfg.epsilon);

  const std::vector<std::size_t>* winner = nullptr;
  double winner_mpd = std::numeric_limits<double>::infinity();
  for (const auto& cluster : clusters) {
    if (cluster.size() < static_cast<std::size_t>(cfg.min_support)) continue;
    if (!winner || cluster.size() > winner->size()) {
      winner = &cluster;
      winner_mpd = mean_pairwise_distance(potential_matches, cluster);
      continue;
    }
    if (cluster.size() == winner->size()) {
      // ties: tighter cluster first, then lowest leading index (input order
      // already guarantees the latter since clusters are scanned in order)
      const double mpd = mean_pairwise_distance(potential_matches, cluster);
      if (mpd < winner_mpd) {
        winner = &cluster;
        winner_mpd = mpd;
      }
    }
  }
  if (!winner) {
    throw InsufficientSupport("tag '" + tag_id + "': no cluster with " +
                              std::to_string(cfg.min_support) + " or more points");
  }

  std::vector<Point3> members;
  members.reserve(winner->size());
  for (std::size_t i : *winner) members.push_back(potential_matches[i]);
  return TagLocation{tag_id, centroid(members), static_cast<int>(winner->size()),
                     cloud_label};
}

LocalizationResult localize_all_tags(std::span<const TagFeatureSet> tags,
                                     const DescribedCloud& cloud,
                                     const RatioTestConfig& match_cfg,
                                     const ClusterConfig& cluster_cfg) {
  LocalizationResult result;
  for (const TagFeatureSet& tag : tags) {
    const std::vector<Point3> matches = match_tag_to_cloud(tag, cloud, match_cfg);
    try {
      result.locations.push_back(
          localize_tag(tag.tag_id, matches, cluster_cfg, cloud.source));
    } catch (const InsufficientSupport&) {
      result.misses.push_back(tag.tag_id);
    }
  }
  for (std::size_t i = 0; i < result.locations.size(); ++i) {
    for (std::size_t j = i + 1; j < result.locations.size(); ++j) {
      if (distance(result.locations[i].coordinate,
                   result.locations[j].coordinate) <= cluster_cfg.epsilon) {
        result.coincident.emplace_back(result.locations[i].tag_id,
                                       result.locations[j].tag_id);
      }
    }
  }
  return result;
}

}  // namespace tagalign
