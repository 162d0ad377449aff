#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tagalign/errors.hpp"

namespace tagalign {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static Point3 from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

  bool operator==(const Point3&) const = default;
};

inline double distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

using Rgb = std::array<std::uint8_t, 3>;

/// 256-bit ORB-style binary descriptor stored as 32 octets.
class BinaryDescriptor {
 public:
  static constexpr std::size_t kBits = 256;
  static constexpr std::size_t kOctets = 32;

  BinaryDescriptor() : octets_{} {}
  explicit BinaryDescriptor(const std::array<std::uint8_t, kOctets>& octets)
      : octets_(octets) {}

  const std::array<std::uint8_t, kOctets>& octets() const { return octets_; }

  bool bit(std::size_t i) const {
    return (octets_[i / 8] >> (i % 8)) & 1u;
  }

  bool operator==(const BinaryDescriptor&) const = default;

 private:
  std::array<std::uint8_t, kOctets> octets_;
};

/// Fixed-dimension real descriptor (HaHOG/SIFT-style), compared by L2.
class FloatDescriptor {
 public:
  FloatDescriptor() = default;
  explicit FloatDescriptor(std::vector<double> values) : values_(std::move(values)) {}

  const std::vector<double>& values() const { return values_; }
  std::size_t dim() const { return values_.size(); }

  bool operator==(const FloatDescriptor&) const = default;

 private:
  std::vector<double> values_;
};

/// 4x4 transform whose last row is pinned to [0 0 0 1].
class HomogeneousTransform {
 public:
  HomogeneousTransform() : m_(Eigen::Matrix4d::Identity()) {}

  /// Accepts any 4x4; the last row is overwritten with [0,0,0,1].
  explicit HomogeneousTransform(const Eigen::Matrix4d& m) : m_(m) {
    m_.row(3) << 0.0, 0.0, 0.0, 1.0;
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d linear() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }

  HomogeneousTransform inverse() const {
    return HomogeneousTransform(m_.inverse().eval());
  }

 private:
  Eigen::Matrix4d m_;
};

/// 7-DOF similarity: positive scale, proper rotation, translation.
struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<Rgb>> colors;  // parallel to points when present
};

int hamming_distance(const BinaryDescriptor& a, const BinaryDescriptor& b);

inline double normalized_hamming(const BinaryDescriptor& a, const BinaryDescriptor& b) {
  return hamming_distance(a, b) / static_cast<double>(BinaryDescriptor::kBits);
}

double l2_distance(const FloatDescriptor& a, const FloatDescriptor& b);

Point3 apply_transform(const HomogeneousTransform& h, const Point3& p);

Point3 centroid(std::span<const Point3> points);

HomogeneousTransform similarity_to_homogeneous(const SimilarityTransform& st);

// angle of a rotation matrix, stable near the identity (atan2, not acos)
double rotation_angle(const Eigen::Matrix3d& r);

inline HomogeneousTransform compose(const HomogeneousTransform& a,
                                    const HomogeneousTransform& b) {
  return HomogeneousTransform((a.matrix() * b.matrix()).eval());
}

}  // namespace tagalign
