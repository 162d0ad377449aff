#include "tagalign/geometry.hpp"

#include <cmath>

namespace tagalign {

int hamming_distance(const BinaryDescriptor& a, const BinaryDescriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < BinaryDescriptor::kOctets; ++i) {
    d += std::popcount(static_cast<unsigned>(a.octets()[i] ^ b.octets()[i]));
  }
  return d;
}

double l2_distance(const FloatDescriptor& a, const FloatDescriptor& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("l2_distance: dimensions " + std::to_string(a.dim()) +
                            " vs " + std::to_string(b.dim()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

Point3 apply_transform(const HomogeneousTransform& h, const Point3& p) {
  const Eigen::Vector3d q =
      h.linear() * p.vec() + h.translation();
  return Point3::from(q);
}

Point3 centroid(std::span<const Point3> points) {
  if (points.empty()) {
    throw EmptyInput("centroid of empty point set");
  }
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (const Point3& p : points) acc += p.vec();
  return Point3::from(acc / static_cast<double>(points.size()));
}

HomogeneousTransform similarity_to_homogeneous(const SimilarityTransform& st) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = st.scale * st.rotation;
  m.topRightCorner<3, 1>() = st.translation;
  return HomogeneousTransform(m);
}

double rotation_angle(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0),
                             r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0));
}

}  // namespace tagalign
