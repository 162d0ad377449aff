#include "tagalign/matching.hpp"

#include <algorithm>
#include <map>

namespace tagalign {

namespace {

// Flattened targets with back-pointers to the owning cloud entry.
template <typename Descriptor>
struct Flattened {
  std::vector<Descriptor> descriptors;
  std::vector<std::size_t> entry_of;
};

template <typename Descriptor>
Flattened<Descriptor> flatten(const DescribedCloud& cloud,
                              const std::vector<Descriptor> DescribedCloud::Entry::* member) {
  Flattened<Descriptor> flat;
  for (std::size_t e = 0; e < cloud.entries.size(); ++e) {
    for (const Descriptor& d : cloud.entries[e].*member) {
      flat.descriptors.push_back(d);
      flat.entry_of.push_back(e);
    }
  }
  return flat;
}

bool accept(const Knn2Result& r, double ratio_max, double abs_max) {
  if (!(r.best_dist < abs_max)) return false;
  if (r.second_dist == 0.0) return false;  // indistinguishable pair, ambiguous
  if (std::isinf(r.second_dist)) return true;  // lone target, ratio treated as 0
  return r.best_dist / r.second_dist < ratio_max;
}

template <typename Descriptor, typename Metric>
std::vector<MatchCandidate> run_match(std::span<const Descriptor> queries,
                                      const Flattened<Descriptor>& flat,
                                      const DescribedCloud& cloud, Metric&& dist,
                                      double ratio_max, double abs_max) {
  // best candidate per cloud entry; lowest best_dist wins, first query on ties
  std::map<std::size_t, MatchCandidate> per_entry;
  if (flat.descriptors.empty()) return {};
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Knn2Result r =
        knn2<Descriptor>(queries[q], flat.descriptors, dist);
    if (!accept(r, ratio_max, abs_max)) continue;
    const std::size_t entry = flat.entry_of[r.best_index];
    MatchCandidate cand{q, entry, r.best_dist, r.second_dist,
                        cloud.entries[entry].coord};
    auto [it, inserted] = per_entry.try_emplace(entry, cand);
    if (!inserted && cand.best_dist < it->second.best_dist) it->second = cand;
  }
  std::vector<MatchCandidate> out;
  out.reserve(per_entry.size());
  for (auto& [entry, cand] : per_entry) out.push_back(cand);
  std::sort(out.begin(), out.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
    return a.query_index < b.query_index;
  });
  return out;
}

}  // namespace

std::vector<MatchCandidate> ratio_test_match(const TagFeatureSet& queries,
                                             const DescribedCloud& cloud,
                                             const RatioTestConfig& cfg) {
  cfg.validate();
  if (queries.kind != cloud.kind) {
    throw KindMismatch(std::string("query kind ") + to_string(queries.kind) +
                       " vs cloud kind " + to_string(cloud.kind));
  }
  if (cloud.kind == DescriptorKind::kBinary) {
    const auto flat = flatten<BinaryDescriptor>(cloud, &DescribedCloud::Entry::binary);
    return run_match<BinaryDescriptor>(queries.binary, flat, cloud,
                                       normalized_hamming, cfg.ratio_max,
                                       cfg.abs_max_binary);
  }
  const auto flat = flatten<FloatDescriptor>(cloud, &DescribedCloud::Entry::floats);
  return run_match<FloatDescriptor>(queries.floats, flat, cloud, l2_distance,
                                    cfg.ratio_max, cfg.abs_max_float);
}

std::vector<Point3> match_tag_to_cloud(const TagFeatureSet& tag,
                                       const DescribedCloud& cloud,
                                       const RatioTestConfig& cfg) {
  std::vector<Point3> points;
  for (const MatchCandidate& cand : ratio_test_match(tag, cloud, cfg)) {
    points.push_back(cand.matched_point);
  }
  return points;
}

}  // namespace tagalign
