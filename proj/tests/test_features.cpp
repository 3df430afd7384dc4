#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "test_support.hpp"
#include "treegraph/features.hpp"
#include "treegraph/preprocess.hpp"

using namespace treegraph;

namespace {

VoxelGrid grid_of(const PointCloud& c, double cell = 0.1) {
  std::vector<PointId> ids(c.size());
  std::iota(ids.begin(), ids.end(), 0);
  return voxelize(c, ids, cell);
}

// 3x3 covariance of a point set, straight from the definition.
std::array<double, 9> covariance(const std::vector<Vec3>& pts) {
  Vec3 mean;
  for (const auto& p : pts) mean += p;
  mean = mean / static_cast<double>(pts.size());
  std::array<double, 9> c{};
  for (const auto& p : pts) {
    const Vec3 d = p - mean;
    const double row[3] = {d.x, d.y, d.z};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) c[static_cast<std::size_t>(i * 3 + j)] += row[i] * row[j];
    }
  }
  for (double& v : c) v /= static_cast<double>(pts.size());
  return c;
}

Vec3 rotate(const Vec3& p, const std::array<double, 9>& r) {
  return {r[0] * p.x + r[1] * p.y + r[2] * p.z, r[3] * p.x + r[4] * p.y + r[5] * p.z,
          r[6] * p.x + r[7] * p.y + r[8] * p.z};
}

// Rotation matrix from a unit quaternion drawn uniformly.
std::array<double, 9> random_rotation(std::mt19937_64& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4] = {n(g), n(g), n(g), n(g)};
  const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& v : q) v /= norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
          2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
}

}  // namespace

TEST_CASE("collinear support gives pure linearity") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) {
    const double t = static_cast<double>(i) / 49.0;
    pts.push_back({0.01 + 0.3 * t, 0.02 + 0.1 * t, 0.03 + 0.2 * t});
  }
  const PointCloud c = testutil::cloud_from(pts);
  const VoxelGrid grid = grid_of(c);
  const FeatureSet fs = compute_features(c, grid, 2.0);  // support = whole segment
  for (const auto& f : fs.per_node) {
    CHECK(f.linearity == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f.planarity == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(f.sphericity == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  }
}

TEST_CASE("planar support gives pure planarity with a perpendicular normal") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      pts.push_back({0.05 * i, 0.05 * j, 0.25});  // symmetric grid: l1 == l2
    }
  }
  const PointCloud c = testutil::cloud_from(pts);
  const VoxelGrid grid = grid_of(c);
  const FeatureSet fs = compute_features(c, grid, 2.0);
  for (const auto& f : fs.per_node) {
    CHECK(f.planarity == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f.sphericity == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(std::abs(f.eigenvectors[2].z) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("fewer than three support points or vanishing spread degenerate to the neutral vector") {
  // Two isolated points: one per far-apart cell, no neighbors in range.
  const PointCloud two = testutil::cloud_from({{0, 0, 0}, {5, 5, 5}});
  const FeatureSet fs = compute_features(two, grid_of(two), 0.3);
  for (const auto& f : fs.per_node) {
    CHECK(f.degenerate);
    CHECK(f.linearity == 0.0);
    CHECK(f.planarity == 0.0);
    CHECK(f.sphericity == 1.0);
  }
  // Many coincident points: covariance is exactly zero.
  const PointCloud stack = testutil::cloud_from({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  const FeatureSet fs2 = compute_features(stack, grid_of(stack), 0.3);
  REQUIRE(fs2.per_node.size() == 1);
  CHECK(fs2.per_node[0].degenerate);
  CHECK(fs2.per_node[0].sphericity == 1.0);
}

TEST_CASE("eigen decomposition satisfies the defining identities") {
  auto g = testutil::rng(123);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) {
    pts.push_back({testutil::uniform(g, 0, 0.09), testutil::uniform(g, 0, 0.09),
                   testutil::uniform(g, 0, 0.09)});
  }
  const PointCloud c = testutil::cloud_from(pts);
  const VoxelGrid grid = grid_of(c);
  const FeatureSet fs = compute_features(c, grid, 0.5);
  const auto cov = covariance(pts);
  for (const auto& f : fs.per_node) {
    const auto& l = f.eigenvalues;
    CHECK(l[0] >= l[1]);
    CHECK(l[1] >= l[2]);
    CHECK(l[2] >= 0.0);
    // Trace and eigenvector residuals against the directly computed covariance.
    CHECK(l[0] + l[1] + l[2] == doctest::Approx(cov[0] + cov[4] + cov[8]).epsilon(1e-9));
    for (int i = 0; i < 3; ++i) {
      const Vec3 v = f.eigenvectors[static_cast<std::size_t>(i)];
      const Vec3 cv = {cov[0] * v.x + cov[1] * v.y + cov[2] * v.z,
                       cov[3] * v.x + cov[4] * v.y + cov[5] * v.z,
                       cov[6] * v.x + cov[7] * v.y + cov[8] * v.z};
      CHECK(distance(cv, v * l[static_cast<std::size_t>(i)]) <= 1e-10);
      CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Orthogonality.
    CHECK(std::abs(f.eigenvectors[0].dot(f.eigenvectors[1])) <= 1e-10);
    CHECK(std::abs(f.eigenvectors[0].dot(f.eigenvectors[2])) <= 1e-10);
    CHECK(std::abs(f.eigenvectors[1].dot(f.eigenvectors[2])) <= 1e-10);
  }
}

TEST_CASE("shape fractions follow their formulas and sum to one exactly") {
  auto g = testutil::rng(5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 120; ++i) {
    pts.push_back({testutil::uniform(g, 0, 0.3), testutil::uniform(g, 0, 0.2),
                   testutil::uniform(g, 0, 0.1)});
  }
  const PointCloud c = testutil::cloud_from(pts);
  const VoxelGrid grid = grid_of(c);
  const FeatureSet fs = compute_features(c, grid, 1.0);
  for (const auto& f : fs.per_node) {
    REQUIRE_FALSE(f.degenerate);
    const double l1 = f.eigenvalues[0], l2 = f.eigenvalues[1], l3 = f.eigenvalues[2];
    const double sum = l1 + l2 + l3;
    CHECK(f.anisotropy == doctest::Approx((l1 - l3) / l1).epsilon(1e-12));
    CHECK(f.linearity == doctest::Approx((l1 - l2) / l1).epsilon(1e-12));
    CHECK(f.planarity == doctest::Approx((l2 - l3) / l1).epsilon(1e-9));
    CHECK(f.sphericity == doctest::Approx(l3 / l1).epsilon(1e-12));
    CHECK(f.omnivariance == doctest::Approx(std::cbrt(l1 * l2 * l3) / sum).epsilon(1e-9));
    CHECK(f.surface_variation == doctest::Approx(l3 / sum).epsilon(1e-12));
    double entropy = 0.0;
    for (const double l : {l1, l2, l3}) {
      const double e = l / sum;
      if (e > 0.0) entropy -= e * std::log(e);
    }
    CHECK(f.eigen_entropy == doctest::Approx(entropy).epsilon(1e-12));
    // The sum identity holds exactly, not just approximately.
    CHECK(f.planarity + (f.linearity + f.sphericity) == 1.0);
  }
}

TEST_CASE("eigenvalue-derived descriptors are rotation invariant") {
  auto g = testutil::rng(31);
  std::vector<Vec3> blob;
  for (int i = 0; i < 150; ++i) {
    blob.push_back({testutil::uniform(g, -0.04, 0.04), testutil::uniform(g, -0.03, 0.03),
                    testutil::uniform(g, -0.02, 0.02)});
  }
  const PointCloud base = testutil::cloud_from(blob);
  const FeatureSet fs = compute_features(base, grid_of(base), 0.5);
  const FeatureVector& f0 = fs.per_node[0];  // support covers the whole blob

  for (int trial = 0; trial < 10; ++trial) {
    const auto r = random_rotation(g);
    std::vector<Vec3> rotated;
    rotated.reserve(blob.size());
    for (const auto& p : blob) rotated.push_back(rotate(p, r));
    const PointCloud rc = testutil::cloud_from(rotated);
    const FeatureSet rfs = compute_features(rc, grid_of(rc), 0.5);
    const FeatureVector& f1 = rfs.per_node[0];
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(f1.eigenvalues[static_cast<std::size_t>(i)] -
                     f0.eigenvalues[static_cast<std::size_t>(i)]) <= 1e-6);
    }
    CHECK(std::abs(f1.anisotropy - f0.anisotropy) <= 1e-6);
    CHECK(std::abs(f1.eigen_entropy - f0.eigen_entropy) <= 1e-6);
    CHECK(std::abs(f1.linearity - f0.linearity) <= 1e-6);
    CHECK(std::abs(f1.omnivariance - f0.omnivariance) <= 1e-6);
    CHECK(std::abs(f1.planarity - f0.planarity) <= 1e-6);
    CHECK(std::abs(f1.sphericity - f0.sphericity) <= 1e-6);
    CHECK(std::abs(f1.surface_variation - f0.surface_variation) <= 1e-6);
  }
}

TEST_CASE("per-cell statistics: mean, variance, areas, volume, density") {
  // Four corners of a 0.06 x 0.08 rectangle at z = 0.05 inside one cell.
  const PointCloud c = testutil::cloud_from(
      {{0.01, 0.01, 0.05}, {0.07, 0.01, 0.05}, {0.01, 0.09, 0.05}, {0.07, 0.09, 0.05}});
  const VoxelGrid grid = grid_of(c);
  REQUIRE(grid.node_count() == 1);
  const FeatureSet fs = compute_features(c, grid, 0.5);
  const FeatureVector& f = fs.per_node[0];
  CHECK(f.mean.x == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(f.mean.y == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(f.mean.z == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(f.variance.x == doctest::Approx(0.0009).epsilon(1e-12));  // (0.03)^2
  CHECK(f.variance.y == doctest::Approx(0.0016).epsilon(1e-12));  // (0.04)^2
  CHECK(f.variance.z == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(f.area_vertical == doctest::Approx(0.06 * 0.08).epsilon(1e-12));
  CHECK(f.point_count == 4);
  // Four distinct subcells of a 4x4x4 split: volume = 4 * (0.025)^3.
  CHECK(f.occupied_volume == doctest::Approx(4 * 0.025 * 0.025 * 0.025).epsilon(1e-12));
  CHECK(f.density == doctest::Approx(4.0 / 0.001).epsilon(1e-12));
}

TEST_CASE("normal-plane projected area equals the vertical one for a flat patch") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) pts.push_back({0.02 * i, 0.02 * j, 0.03});
  }
  const PointCloud c = testutil::cloud_from(pts);
  const VoxelGrid grid = grid_of(c);
  const FeatureSet fs = compute_features(c, grid, 0.5);
  const FeatureVector& f = fs.per_node[0];
  CHECK(f.area_normal == doctest::Approx(f.area_vertical).epsilon(1e-9));
  CHECK(f.area_vertical == doctest::Approx(0.08 * 0.06).epsilon(1e-12));
}

TEST_CASE("connectivity counts face, vertical and diagonal neighbors") {
  SUBCASE("isolated cell") {
    const PointCloud c = testutil::cloud_from({{0.05, 0.05, 0.05}});
    const FeatureSet fs = compute_features(c, grid_of(c), 0.3);
    CHECK(fs.per_node[0].conn_horizontal == 0);
    CHECK(fs.per_node[0].conn_vertical == 0);
    CHECK(fs.per_node[0].conn_diagonal == 0);
  }
  SUBCASE("horizontal face pair") {
    const PointCloud c = testutil::cloud_from({{0.05, 0.05, 0.05}, {0.15, 0.05, 0.05}});
    const FeatureSet fs = compute_features(c, grid_of(c), 0.3);
    for (const auto& f : fs.per_node) {
      CHECK(f.conn_horizontal == 1);
      CHECK(f.conn_vertical == 0);
      CHECK(f.conn_diagonal == 0);
    }
  }
  SUBCASE("vertical stack") {
    const PointCloud c = testutil::cloud_from({{0.05, 0.05, 0.05}, {0.05, 0.05, 0.15}});
    const FeatureSet fs = compute_features(c, grid_of(c), 0.3);
    for (const auto& f : fs.per_node) {
      CHECK(f.conn_vertical == 1);
      CHECK(f.conn_horizontal == 0);
    }
  }
  SUBCASE("diagonal pair") {
    const PointCloud c = testutil::cloud_from({{0.05, 0.05, 0.05}, {0.15, 0.15, 0.05}});
    const FeatureSet fs = compute_features(c, grid_of(c), 0.3);
    for (const auto& f : fs.per_node) {
      CHECK(f.conn_diagonal == 1);
      CHECK(f.conn_horizontal == 0);
    }
  }
  SUBCASE("fully surrounded cell hits the caps") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) pts.push_back({0.05 + 0.1 * i, 0.05 + 0.1 * j, 0.05 + 0.1 * k});
      }
    }
    const PointCloud c = testutil::cloud_from(pts);
    const VoxelGrid grid = grid_of(c);
    const FeatureSet fs = compute_features(c, grid, 0.3);
    const std::int32_t center = grid.node_of(CellIndex{1, 1, 1});
    REQUIRE(center >= 0);
    const FeatureVector& f = fs.per_node[static_cast<std::size_t>(center)];
    CHECK(f.conn_horizontal == 4);
    CHECK(f.conn_vertical == 2);
    CHECK(f.conn_diagonal == 20);
  }
}

TEST_CASE("cosine similarity matches the dot-product formula") {
  const std::vector<double> a = {1.0, 0.0};
  const std::vector<double> b = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(a, {std::vector<double>{0.0, 1.0}}) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  // Scale invariance of the similarity itself.
  CHECK(cosine_similarity({std::vector<double>{2.0, 0.0}}, b) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  // Zero-norm input is neutral.
  CHECK(cosine_similarity({std::vector<double>{0.0, 0.0}}, a) == 0.0);
}

TEST_CASE("density weight is the absolute count contrast over the maximum") {
  FeatureVector a;
  FeatureVector b;
  a.point_count = 10;
  b.point_count = 40;
  CHECK(density_weight(a, b, 100) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(density_weight(a, a, 100) == 0.0);
  b.point_count = 100;
  a.point_count = 0;
  CHECK(density_weight(a, b, 100) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(density_weight(a, b, 0), Error);
}

TEST_CASE("feature scaling maps the observed range to the unit interval") {
  PointCloud c = testutil::cloud_from({{0.05, 0.05, 0.05}, {0.15, 0.05, 0.05},
                                       {0.16, 0.05, 0.05}, {0.17, 0.06, 0.04}});
  const VoxelGrid grid = grid_of(c);
  const FeatureSet fs = compute_features(c, grid, 0.3);
  const FeatureScaling scaling = FeatureScaling::fit(fs);
  for (const auto& f : fs.per_node) {
    const auto scaled = scaling.apply(f.flatten());
    for (const double v : scaled) {
      CHECK(v >= -1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}
