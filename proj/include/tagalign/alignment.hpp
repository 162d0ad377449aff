#pragma once

#include <map>
#include <string>
#include <vector>

#include "tagalign/geometry.hpp"

namespace tagalign {

struct Correspondence {
  std::string tag_id;
  Point3 source;  // cloud A (SLAM by convention)
  Point3 target;  // cloud B (SfM by convention)
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
};

struct DltSolution {
  HomogeneousTransform transform;
  std::vector<double> singular_values;  // 13 values, descending, zero-padded
  std::map<std::string, double> per_tag_residuals;
  double rmse = 0.0;
};

struct ResidualReport {
  std::map<std::string, double> per_tag;
  double rmse = 0.0;
};

/// Stacks three homogeneous rows per correspondence. The 13-entry unknown is
/// the 12 affine entries of H (row-major) followed by a homogeneous slack
/// fixed to 1, so A * [vec(H); 1] = 0 exactly when target = H * source
/// for every pair.
Eigen::MatrixXd build_dlt_system(const CorrespondenceSet& c);

/// Least-squares H from the smallest right-singular vector, with isotropic
/// coordinate normalization (centroid to origin, RMS radius sqrt(3)) applied
/// to both clouds and undone afterwards.
DltSolution solve_dlt(const CorrespondenceSet& c);

/// Closed-form least-squares similarity (scale, rotation, translation)
/// minimizing sum ||s R x_i + t - y_i||^2, with det(R) = +1 enforced.
SimilarityTransform estimate_similarity(const CorrespondenceSet& c);

ResidualReport alignment_residuals(const HomogeneousTransform& h,
                                   const CorrespondenceSet& c);

PointCloud transform_cloud(const PointCloud& cloud, const HomogeneousTransform& h);

}  // namespace tagalign
