#include <doctest.h>

#include "tagalign/alignment.hpp"
#include "tagalign/rng.hpp"
#include "tagalign/synth.hpp"

using namespace tagalign;

namespace {

Eigen::Matrix3d random_rotation(Rng& rng) {
  const Eigen::Vector3d axis =
      Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
          .normalized();
  return Eigen::AngleAxisd(rng.uniform(0, M_PI), axis).toRotationMatrix();
}

HomogeneousTransform random_affine(Rng& rng) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  do {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) m(r, c) = rng.uniform(-2.0, 2.0);
    }
  } while (std::abs(m.topLeftCorner<3, 3>().determinant()) < 0.1);
  return HomogeneousTransform(m);
}

CorrespondenceSet pairs_under(const HomogeneousTransform& h, Rng& rng, int n) {
  CorrespondenceSet c;
  for (int i = 0; i < n; ++i) {
    const Point3 x{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    c.pairs.push_back({"tag" + std::to_string(i), x, apply_transform(h, x)});
  }
  return c;
}

CorrespondenceSet identity_pairs(int n) {
  Rng rng(99);
  return pairs_under(HomogeneousTransform{}, rng, n);
}

}  // namespace

TEST_CASE("build_dlt_system") {
  Rng rng(51);

  SUBCASE("shape is 3n x 13") {
    const Eigen::MatrixXd a = build_dlt_system(identity_pairs(4));
    CHECK(a.rows() == 12);
    CHECK(a.cols() == 13);
  }

  SUBCASE("fewer than 4 pairs rejected") {
    CorrespondenceSet c = identity_pairs(3);
    CHECK_THROWS_AS(build_dlt_system(c), TooFewCorrespondences);
  }

  SUBCASE("identity correspondences annihilate vec(I)") {
    const Eigen::MatrixXd a = build_dlt_system(identity_pairs(5));
    Eigen::VectorXd h = Eigen::VectorXd::Zero(13);
    h(0) = h(5) = h(10) = h(12) = 1.0;
    CHECK((a * h).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("generate-and-substitute: A [vec(H*); 1] = 0") {
    for (int trial = 0; trial < 100; ++trial) {
      const HomogeneousTransform star = random_affine(rng);
      const CorrespondenceSet c = pairs_under(star, rng, 4 + static_cast<int>(rng.below(6)));
      const Eigen::MatrixXd a = build_dlt_system(c);
      Eigen::VectorXd h(13);
      for (int r = 0; r < 3; ++r) {
        for (int col = 0; col < 4; ++col) h(4 * r + col) = star.matrix()(r, col);
      }
      h(12) = 1.0;
      REQUIRE((a * h).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("solve_dlt") {
  Rng rng(52);

  SUBCASE("identity pairs give the identity") {
    const DltSolution sol = solve_dlt(identity_pairs(5));
    CHECK((sol.transform.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() <
          1e-9);
    CHECK(sol.rmse < 1e-12);
    CHECK(sol.singular_values.size() == 13);
    CHECK(std::is_sorted(sol.singular_values.rbegin(), sol.singular_values.rend()));
  }

  SUBCASE("recovers a random affine exactly") {
    for (int trial = 0; trial < 100; ++trial) {
      const HomogeneousTransform star = random_affine(rng);
      const CorrespondenceSet c = pairs_under(star, rng, 6);
      const DltSolution sol = solve_dlt(c);
      REQUIRE((sol.transform.matrix() - star.matrix()).cwiseAbs().maxCoeff() < 1e-9);
      REQUIRE(sol.rmse < 1e-9);
      REQUIRE(sol.transform.matrix().row(3) == Eigen::RowVector4d(0, 0, 0, 1));
      for (const auto& [tag, r] : sol.per_tag_residuals) REQUIRE(r < 1e-9);
    }
  }

  SUBCASE("coplanar tags are degenerate") {
    CorrespondenceSet c;
    Rng local(53);
    for (int i = 0; i < 4; ++i) {
      const Point3 x{local.uniform(-2, 2), local.uniform(-2, 2), 0.0};  // z = 0 plane
      c.pairs.push_back({"tag" + std::to_string(i), x, x});
    }
    CHECK_THROWS_AS(solve_dlt(c), DegenerateConfiguration);
  }

  SUBCASE("residuals equivariant under a common rigid motion") {
    const HomogeneousTransform star = random_affine(rng);
    CorrespondenceSet noisy = pairs_under(star, rng, 8);
    for (auto& p : noisy.pairs) {
      p.target.x += rng.uniform(-0.05, 0.05);
      p.target.y += rng.uniform(-0.05, 0.05);
      p.target.z += rng.uniform(-0.05, 0.05);
    }
    const double rmse_before = solve_dlt(noisy).rmse;

    SimilarityTransform rigid;
    rigid.rotation = random_rotation(rng);
    rigid.translation = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const HomogeneousTransform motion = similarity_to_homogeneous(rigid);
    CorrespondenceSet moved = noisy;
    for (auto& p : moved.pairs) {
      p.source = apply_transform(motion, p.source);
      p.target = apply_transform(motion, p.target);
    }
    CHECK(solve_dlt(moved).rmse == doctest::Approx(rmse_before).epsilon(1e-9));
  }
}

TEST_CASE("estimate_similarity") {
  Rng rng(54);

  SUBCASE("identity") {
    const SimilarityTransform st = estimate_similarity(identity_pairs(4));
    CHECK(std::abs(st.scale - 1.0) < 1e-12);
    CHECK((st.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(st.translation.norm() < 1e-12);
  }

  SUBCASE("recovers scale, rotation, translation to 1e-9") {
    for (int trial = 0; trial < 100; ++trial) {
      SimilarityTransform truth;
      truth.scale = rng.uniform(0.1, 10.0);
      truth.rotation = random_rotation(rng);
      truth.translation = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
      const CorrespondenceSet c =
          pairs_under(similarity_to_homogeneous(truth), rng,
                      3 + static_cast<int>(rng.below(6)));
      const SimilarityTransform est = estimate_similarity(c);
      const Eigen::Matrix3d rel = est.rotation * truth.rotation.transpose();
      const double angle = rotation_angle(rel);
      REQUIRE(angle < 1e-9);
      REQUIRE(std::abs(est.scale / truth.scale - 1.0) < 1e-9);
      REQUIRE((est.translation - truth.translation).norm() < 1e-9);
      REQUIRE(std::abs(est.rotation.determinant() - 1.0) < 1e-9);
    }
  }

  SUBCASE("fixed parameters from the handbook case") {
    SimilarityTransform truth;
    truth.scale = 2.3;
    truth.rotation = random_rotation(rng);
    truth.translation = {1.0, -2.0, 0.5};
    const CorrespondenceSet c = pairs_under(similarity_to_homogeneous(truth), rng, 6);
    const SimilarityTransform est = estimate_similarity(c);
    CHECK(std::abs(est.scale - 2.3) < 1e-9);
    CHECK((est.translation - truth.translation).norm() < 1e-9);
  }

  SUBCASE("mirrored targets still give det +1 and nonzero residual") {
    CorrespondenceSet c;
    Rng local(55);
    for (int i = 0; i < 6; ++i) {
      const Point3 x{local.uniform(-2, 2), local.uniform(-2, 2), local.uniform(-2, 2)};
      c.pairs.push_back({"tag" + std::to_string(i), x, {x.x, x.y, -x.z}});
    }
    const SimilarityTransform est = estimate_similarity(c);
    CHECK(std::abs(est.rotation.determinant() - 1.0) < 1e-9);
    const ResidualReport res =
        alignment_residuals(similarity_to_homogeneous(est), c);
    CHECK(res.rmse > 0.01);
  }

  SUBCASE("degenerate and undersized inputs") {
    CorrespondenceSet two = identity_pairs(2);
    CHECK_THROWS_AS(estimate_similarity(two), TooFewCorrespondences);

    CorrespondenceSet collinear;
    for (int i = 0; i < 5; ++i) {
      const Point3 x{static_cast<double>(i), 0, 0};
      collinear.pairs.push_back({"tag" + std::to_string(i), x, x});
    }
    CHECK_THROWS_AS(estimate_similarity(collinear), DegenerateConfiguration);

    CorrespondenceSet coincident;
    for (int i = 0; i < 5; ++i) {
      coincident.pairs.push_back({"tag" + std::to_string(i), {1, 1, 1}, {2, 2, 2}});
    }
    CHECK_THROWS_AS(estimate_similarity(coincident), DegenerateConfiguration);
  }
}

TEST_CASE("dlt and similarity agree when the truth is a similarity") {
  Rng rng(56);
  for (int trial = 0; trial < 20; ++trial) {
    SimilarityTransform truth;
    truth.scale = rng.uniform(0.5, 2.0);
    truth.rotation = random_rotation(rng);
    truth.translation = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const CorrespondenceSet c = pairs_under(similarity_to_homogeneous(truth), rng, 6);
    const Eigen::Matrix4d via_dlt = solve_dlt(c).transform.matrix();
    const Eigen::Matrix4d via_sim =
        similarity_to_homogeneous(estimate_similarity(c)).matrix();
    REQUIRE((via_dlt - via_sim).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("alignment_residuals") {
  const CorrespondenceSet exact = identity_pairs(5);
  const ResidualReport zero = alignment_residuals(HomogeneousTransform{}, exact);
  CHECK(zero.rmse == 0.0);
  for (const auto& [tag, r] : zero.per_tag) CHECK(r == 0.0);

  CorrespondenceSet offset = exact;
  for (auto& p : offset.pairs) p.target.x += 1.0;
  const ResidualReport ones = alignment_residuals(HomogeneousTransform{}, offset);
  CHECK(ones.rmse == doctest::Approx(1.0));
  for (const auto& [tag, r] : ones.per_tag) CHECK(r == doctest::Approx(1.0));

  // noisy fixture matches direct recomputation
  Rng rng(57);
  const HomogeneousTransform h = HomogeneousTransform{};
  CorrespondenceSet noisy = identity_pairs(6);
  for (auto& p : noisy.pairs) p.target.y += rng.uniform(-1, 1);
  const ResidualReport rep = alignment_residuals(h, noisy);
  double sq = 0.0;
  for (const auto& p : noisy.pairs) {
    const double r = distance(p.source, p.target);
    CHECK(rep.per_tag.at(p.tag_id) == doctest::Approx(r).epsilon(1e-12));
    sq += r * r;
  }
  CHECK(rep.rmse == doctest::Approx(std::sqrt(sq / 6.0)).epsilon(1e-12));
}

TEST_CASE("transform_cloud") {
  PointCloud cloud;
  cloud.points = {{1, 2, 3}, {-1, 0, 4}};
  cloud.colors = std::vector<Rgb>{{1, 2, 3}, {4, 5, 6}};

  const PointCloud same = transform_cloud(cloud, HomogeneousTransform{});
  CHECK(same.points == cloud.points);
  CHECK(*same.colors == *cloud.colors);

  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(1, 3) = 2.0;
  const PointCloud shifted = transform_cloud(cloud, HomogeneousTransform(m));
  CHECK(shifted.points[0] == Point3{1, 4, 3});
  CHECK(shifted.points[1] == Point3{-1, 2, 4});

  Rng rng(58);
  const HomogeneousTransform h = [&] {
    Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) a(r, c) = rng.uniform(-2, 2);
    }
    return HomogeneousTransform(a);
  }();
  const PointCloud back = transform_cloud(transform_cloud(cloud, h), h.inverse());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    CHECK(distance(back.points[i], cloud.points[i]) < 1e-9);
  }
}
