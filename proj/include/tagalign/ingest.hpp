#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tagalign/geometry.hpp"

namespace tagalign {

enum class DescriptorKind { kBinary, kFloat };

inline const char* to_string(DescriptorKind k) {
  return k == DescriptorKind::kBinary ? "binary" : "float";
}

/// 3D points with their descriptors attached; the matching target.
/// Descriptor kind is uniform across one cloud.
struct DescribedCloud {
  struct Entry {
    Point3 coord;
    std::vector<BinaryDescriptor> binary;  // used when kind == kBinary
    std::vector<FloatDescriptor> floats;   // used when kind == kFloat
  };

  DescriptorKind kind = DescriptorKind::kBinary;
  std::string source;  // "slam" | "sfm"
  std::vector<Entry> entries;
};

/// A tag's query descriptors, matching the target cloud's kind.
struct TagFeatureSet {
  std::string tag_id;
  DescriptorKind kind = DescriptorKind::kBinary;
  std::vector<BinaryDescriptor> binary;
  std::vector<FloatDescriptor> floats;

  std::size_t size() const {
    return kind == DescriptorKind::kBinary ? binary.size() : floats.size();
  }
};

struct SlamMapExport {
  struct MapPoint {
    std::int64_t point_id;
    Point3 coord;
    BinaryDescriptor descriptor;
  };
  std::vector<MapPoint> points;

  DescribedCloud to_described_cloud() const;
  PointCloud to_point_cloud() const;
};

struct SfmPoint {
  Point3 coord;
  Rgb color{255, 255, 255};
};

struct SfmReconstruction {
  // insertion-ordered; first occurrence wins on duplicate track ids
  std::vector<std::pair<std::string, SfmPoint>> points;
};

struct TrackRow {
  std::string image_name;
  std::string track_id;
  std::int64_t feature_id;
};

struct TrackTable {
  std::vector<TrackRow> rows;
};

/// Per-image float descriptor lists, indexed by feature id.
struct FeatureArchive {
  std::map<std::string, std::vector<FloatDescriptor>> images;
};

struct JoinReport {
  std::size_t rows_joined = 0;
  std::size_t rows_missing_track = 0;    // track_id absent from reconstruction
  std::size_t rows_missing_image = 0;    // image absent from the archive
  std::size_t rows_feature_out_of_range = 0;
  std::size_t points_excluded = 0;       // reconstruction points never tracked
};

/// Reinterprets 32 signed/unsigned byte values as descriptor octets
/// (two's complement for negatives).
BinaryDescriptor decode_orb_descriptor(std::span<const int> values);

PointCloud parse_ply(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ply(const PointCloud& cloud);

SlamMapExport parse_slam_export(std::string_view text);
std::string write_slam_export(const SlamMapExport& map);

SfmReconstruction parse_reconstruction(std::string_view json_text);

TrackTable parse_tracks(std::string_view text);

/// Parses one image's FEAT1 archive.
std::vector<FloatDescriptor> parse_feature_archive(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_feature_archive(const std::vector<FloatDescriptor>& descs);

DescribedCloud join_descriptors_to_points(const SfmReconstruction& rec,
                                          const TrackTable& tracks,
                                          const FeatureArchive& feats,
                                          JoinReport* report = nullptr);

}  // namespace tagalign
