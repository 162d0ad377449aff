#include "tagalign/alignment.hpp"

#include <algorithm>

#include <Eigen/SVD>

namespace tagalign {

namespace {

constexpr double kGapTolerance = 1e-9;

Eigen::MatrixXd dlt_rows(const std::vector<Eigen::Vector3d>& src,
                         const std::vector<Eigen::Vector3d>& dst) {
  const std::size_t n = src.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * n, 13);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d xh(src[i].x(), src[i].y(), src[i].z(), 1.0);
    for (int r = 0; r < 3; ++r) {
      a.block<1, 4>(3 * i + r, 4 * r) = xh.transpose();
      a(3 * i + r, 12) = -dst[i](r);
    }
  }
  return a;
}

/// Centroid-to-origin, RMS-radius-to-sqrt(3) normalizer as a 4x4 matrix.
Eigen::Matrix4d normalizer(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double rms = 0.0;
  for (const auto& p : pts) rms += (p - mean).squaredNorm();
  rms = std::sqrt(rms / static_cast<double>(pts.size()));
  const double scale = rms > 0.0 ? std::sqrt(3.0) / rms : 1.0;
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() *= scale;
  t.topRightCorner<3, 1>() = -scale * mean;
  return t;
}

std::pair<std::vector<Eigen::Vector3d>, std::vector<Eigen::Vector3d>> split_pairs(
    const CorrespondenceSet& c) {
  std::vector<Eigen::Vector3d> src, dst;
  src.reserve(c.pairs.size());
  dst.reserve(c.pairs.size());
  for (const auto& p : c.pairs) {
    src.push_back(p.source.vec());
    dst.push_back(p.target.vec());
  }
  return {std::move(src), std::move(dst)};
}

}  // namespace

Eigen::MatrixXd build_dlt_system(const CorrespondenceSet& c) {
  if (c.pairs.size() < 4) {
    throw TooFewCorrespondences("DLT needs at least 4 tag pairs, got " +
                                std::to_string(c.pairs.size()));
  }
  auto [src, dst] = split_pairs(c);
  return dlt_rows(src, dst);
}

DltSolution solve_dlt(const CorrespondenceSet& c) {
  if (c.pairs.size() < 4) {
    throw TooFewCorrespondences("DLT needs at least 4 tag pairs, got " +
                                std::to_string(c.pairs.size()));
  }
  auto [src, dst] = split_pairs(c);

  const Eigen::Matrix4d t_src = normalizer(src);
  const Eigen::Matrix4d t_dst = normalizer(dst);
  std::vector<Eigen::Vector3d> src_n(src.size()), dst_n(dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_n[i] = t_src.topLeftCorner<3, 3>() * src[i] + t_src.topRightCorner<3, 1>();
    dst_n[i] = t_dst.topLeftCorner<3, 3>() * dst[i] + t_dst.topRightCorner<3, 1>();
  }

  const Eigen::MatrixXd a = dlt_rows(src_n, dst_n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);

  DltSolution sol;
  sol.singular_values.assign(13, 0.0);
  for (int i = 0; i < svd.singularValues().size() && i < 13; ++i) {
    sol.singular_values[i] = svd.singularValues()(i);
  }

  const double largest = std::max(sol.singular_values[0], 1e-300);
  if ((sol.singular_values[11] - sol.singular_values[12]) / largest < kGapTolerance) {
    throw DegenerateConfiguration(
        "null space of the DLT system is not unique (coplanar or repeated tags)");
  }

  Eigen::VectorXd h = svd.matrixV().col(12);
  if (std::abs(h(12)) < kGapTolerance) {
    throw DegenerateConfiguration("homogeneous slack vanishes; solution at infinity");
  }
  h /= h(12);

  Eigen::Matrix4d hn = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 4; ++col) hn(r, col) = h(4 * r + col);
  }
  const Eigen::Matrix4d m = t_dst.inverse() * hn * t_src;
  sol.transform = HomogeneousTransform(m);

  const ResidualReport res = alignment_residuals(sol.transform, c);
  sol.per_tag_residuals = res.per_tag;
  sol.rmse = res.rmse;
  return sol;
}

SimilarityTransform estimate_similarity(const CorrespondenceSet& c) {
  const std::size_t n = c.pairs.size();
  if (n < 3) {
    throw TooFewCorrespondences("similarity needs at least 3 tag pairs, got " +
                                std::to_string(n));
  }
  auto [src, dst] = split_pairs(c);

  Eigen::Vector3d mean_src = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_dst = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  mean_src /= static_cast<double>(n);
  mean_dst /= static_cast<double>(n);

  double var_src = 0.0;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3Xd demeaned(3, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d dx = src[i] - mean_src;
    const Eigen::Vector3d dy = dst[i] - mean_dst;
    var_src += dx.squaredNorm();
    cov += dy * dx.transpose();
    demeaned.col(i) = dx;
  }
  var_src /= static_cast<double>(n);
  cov /= static_cast<double>(n);

  // collinear or coincident sources leave the rotation underdetermined
  Eigen::JacobiSVD<Eigen::Matrix3Xd> shape(demeaned);
  const double spread = shape.singularValues()(0);
  if (spread < 1e-12 || shape.singularValues()(1) / spread < kGapTolerance) {
    throw DegenerateConfiguration("source tags are collinear or coincident");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d signs = Eigen::Vector3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    signs(2) = -1.0;
  }

  SimilarityTransform st;
  st.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  st.scale = svd.singularValues().dot(signs) / var_src;
  if (!(st.scale > 0.0)) {
    throw DegenerateConfiguration("recovered scale is not positive");
  }
  st.translation = mean_dst - st.scale * st.rotation * mean_src;
  return st;
}

ResidualReport alignment_residuals(const HomogeneousTransform& h,
                                   const CorrespondenceSet& c) {
  ResidualReport report;
  double sq = 0.0;
  for (const auto& pair : c.pairs) {
    const double r = distance(apply_transform(h, pair.source), pair.target);
    report.per_tag[pair.tag_id] = r;
    sq += r * r;
  }
  report.rmse = c.pairs.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(c.pairs.size()));
  return report;
}

PointCloud transform_cloud(const PointCloud& cloud, const HomogeneousTransform& h) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Point3& p : cloud.points) out.points.push_back(apply_transform(h, p));
  out.colors = cloud.colors;
  return out;
}

}  // namespace tagalign
