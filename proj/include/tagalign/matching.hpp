#pragma once

#include <limits>
#include <vector>

#include "tagalign/ingest.hpp"

namespace tagalign {

/// Thresholds of the two-nearest-neighbor ratio test.
struct RatioTestConfig {
  double ratio_max = 0.7;        // best/second must be strictly below this
  double abs_max_binary = 0.35;  // normalized Hamming cap for binary descriptors
  double abs_max_float = 1.0;    // L2 cap for float descriptors

  void validate() const {
    if (!(ratio_max > 0.0 && ratio_max < 1.0)) {
      throw ConfigInvalid("ratio_max must be in (0, 1)");
    }
    if (!(abs_max_binary > 0.0 && abs_max_binary <= 1.0)) {
      throw ConfigInvalid("abs_max_binary must be in (0, 1]");
    }
    if (!(abs_max_float > 0.0)) {
      throw ConfigInvalid("abs_max_float must be positive");
    }
  }
};

struct MatchCandidate {
  std::size_t query_index = 0;
  std::size_t target_index = 0;  // cloud entry index (point identity)
  double best_dist = 0.0;
  double second_dist = 0.0;
  Point3 matched_point;
};

struct Knn2Result {
  std::size_t best_index = 0;
  double best_dist = 0.0;
  double second_dist = std::numeric_limits<double>::infinity();
};

/// Two nearest neighbors by exhaustive scan; ties resolved to the lowest
/// index. With a single target second_dist stays +infinity.
template <typename Descriptor, typename Metric>
Knn2Result knn2(const Descriptor& query, std::span<const Descriptor> targets,
                Metric&& dist) {
  if (targets.empty()) throw EmptyTargets("knn2 with no targets");
  Knn2Result r;
  r.best_dist = dist(query, targets[0]);
  for (std::size_t i = 1; i < targets.size(); ++i) {
    const double d = dist(query, targets[i]);
    if (d < r.best_dist) {
      r.second_dist = r.best_dist;
      r.best_dist = d;
      r.best_index = i;
    } else if (d < r.second_dist) {
      r.second_dist = d;
    }
  }
  return r;
}

std::vector<MatchCandidate> ratio_test_match(const TagFeatureSet& queries,
                                             const DescribedCloud& cloud,
                                             const RatioTestConfig& cfg);

/// Potential match points for one tag, order-stable by query index.
std::vector<Point3> match_tag_to_cloud(const TagFeatureSet& tag,
                                       const DescribedCloud& cloud,
                                       const RatioTestConfig& cfg);

}  // namespace tagalign
