#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "foodmet/core/kdtree.hpp"
#include "foodmet/metrics/metrics.hpp"
#include "synthetic.hpp"

using namespace foodmet;
using namespace foodmet::metrics;

namespace {

// O(|X||Y|) reference, accumulated in input order.
double brute_directed(const PointCloud& from, const PointCloud& to) {
  double sum = 0.0;
  for (const Vec3& p : from.points) {
    double best = INFINITY;
    for (const Vec3& q : to.points) best = std::min(best, squared_distance(p, q));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

PointCloud cloud(std::initializer_list<Vec3> pts) { return PointCloud{std::vector<Vec3>(pts)}; }

}  // namespace

TEST(MeshVolume, UnitCubeExact) {
  const VolumeResult v = mesh_volume(fixtures::cube(1.0, Vec3(3, -2, 7)));
  EXPECT_EQ(v.volume_cm3, 1e6);
  EXPECT_TRUE(v.watertight);
  EXPECT_EQ(v.boundary_edge_count, 0u);
}

TEST(MeshVolume, HalfCubeIsEighth) {
  EXPECT_DOUBLE_EQ(mesh_volume(fixtures::cube(0.5)).volume_cm3, 0.125e6);
}

TEST(MeshVolume, IcosphereLevelFour) {
  const double r = 0.1;
  const double exact = 4.0 / 3.0 * std::numbers::pi * r * r * r * kCubicMetersToCm3;
  const double v = mesh_volume(fixtures::icosphere(4, r)).volume_cm3;
  EXPECT_LT(v, exact);
  EXPECT_LT((exact - v) / exact, 0.005);
}

TEST(MeshVolume, OpenMeshFlagged) {
  const VolumeResult v = mesh_volume(fixtures::open_box(1.0, Vec3::Zero()));
  EXPECT_FALSE(v.watertight);
  EXPECT_EQ(v.boundary_edge_count, 4u);
  EXPECT_GE(v.volume_cm3, 0.0);
}

TEST(MeshVolume, InvertedMeshStillPositive) {
  TriangleMesh m = fixtures::cube(1.0);
  for (Face& f : m.faces) std::swap(f[1], f[2]);
  EXPECT_EQ(mesh_volume(m).volume_cm3, 1e6);
  EXPECT_EQ(signed_volume(m), -1.0);
}

TEST(MeshVolume, InconsistentOrientationThrows) {
  TriangleMesh m = fixtures::cube(1.0);
  std::swap(m.faces[3][1], m.faces[3][2]);
  EXPECT_THROW(mesh_volume(m), OrientationError);
}

TEST(MeshVolume, RigidInvariantAndCubic) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const TriangleMesh m = fixtures::random_blob(rng);
    const double v = mesh_volume(m).volume_cm3;
    const RigidTransform t = fixtures::random_rigid(rng, 3.0, 1.0);
    EXPECT_NEAR(mesh_volume(apply_transform(m, t)).volume_cm3, v, 1e-12 * v);
    for (double s : {0.5, 2.0}) {
      EXPECT_EQ(mesh_volume(apply_transform(m, SimilarityTransform::uniform_scale(s))).volume_cm3,
                s * s * s * v);
    }
    const double s = 1.37;
    EXPECT_NEAR(mesh_volume(apply_transform(m, SimilarityTransform::uniform_scale(s))).volume_cm3,
                s * s * s * v, 1e-12 * s * s * s * v);
  }
}

TEST(Mape, Examples) {
  const std::vector<double> a = {1, 2, 3};
  EXPECT_EQ(mape(a, a), 0.0);
  const std::vector<double> p = {44.51};
  const std::vector<double> g = {38.53};
  EXPECT_NEAR(mape(p, g), 15.52, 0.005);
}

TEST(Mape, Errors) {
  const std::vector<double> a = {1, 2};
  const std::vector<double> b = {1};
  EXPECT_THROW(mape(a, b), ParameterError);
  EXPECT_THROW(mape(std::vector<double>{}, std::vector<double>{}), ParameterError);
  const std::vector<double> zero = {1, 0};
  EXPECT_THROW(mape(a, zero), ParameterError);
}

TEST(Mape, ScaleInvariant) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(1, 500);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(10), g(10);
    for (std::size_t i = 0; i < 10; ++i) {
      p[i] = u(rng);
      g[i] = u(rng);
    }
    const double m = mape(p, g);
    for (double alpha : {0.001, 3.5, 1e4}) {
      std::vector<double> pa = p, ga = g;
      for (std::size_t i = 0; i < 10; ++i) {
        pa[i] *= alpha;
        ga[i] *= alpha;
      }
      EXPECT_NEAR(mape(pa, ga), m, 1e-12 * m);
    }
  }
}

TEST(Chamfer, HandExamples) {
  const PointCloud x = cloud({Vec3(0, 0, 0)});
  EXPECT_EQ(chamfer(x, x).value, 0.0);
  EXPECT_EQ(chamfer(x, cloud({Vec3(1, 0, 0)})).value, 2.0);
  const ChamferResult r = chamfer(cloud({Vec3(0, 0, 0), Vec3(2, 0, 0)}), cloud({Vec3(1, 0, 0)}));
  EXPECT_EQ(r.value, 2.0);
  EXPECT_EQ(r.forward_mean, 1.0);
  EXPECT_EQ(r.backward_mean, 1.0);
  EXPECT_EQ(r.n_x, 2u);
  EXPECT_EQ(r.n_y, 1u);
  EXPECT_THROW(chamfer(PointCloud{}, x), ParameterError);
}

TEST(Chamfer, EqualsBruteForce) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const PointCloud x = fixtures::random_cloud(rng, 1 + rng() % 200);
    const PointCloud y = fixtures::random_cloud(rng, 1 + rng() % 200);
    const ChamferResult r = chamfer(x, y);
    const double f = brute_directed(x, y);
    const double b = brute_directed(y, x);
    EXPECT_EQ(r.forward_mean, f);
    EXPECT_EQ(r.backward_mean, b);
    EXPECT_EQ(r.value, f + b);
  }
}

TEST(Chamfer, SymmetricAndRigidInvariant) {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 50; ++trial) {
    const PointCloud x = fixtures::random_cloud(rng, 150);
    const PointCloud y = fixtures::random_cloud(rng, 120);
    const double v = chamfer(x, y).value;
    EXPECT_NEAR(chamfer(y, x).value, v, 1e-12);
    const RigidTransform t = fixtures::random_rigid(rng, 3.0, 5.0);
    EXPECT_NEAR(chamfer(apply_transform(x, t), apply_transform(y, t)).value, v, 1e-9 * v);
  }
}

TEST(Chamfer, PrebuiltTreesAgree) {
  std::mt19937_64 rng(7);
  const PointCloud x = fixtures::random_cloud(rng, 500);
  const PointCloud y = fixtures::random_cloud(rng, 400);
  const KdTree tx(x.points), ty(y.points);
  EXPECT_EQ(chamfer(x, tx, y, ty).value, chamfer(x, y).value);
}

TEST(ChamferMeshes, SelfDistanceShrinksWithSamples) {
  const TriangleMesh m = fixtures::icosphere(2, 0.1);
  const double small = chamfer_meshes(m, m, 1000, 3).value;
  const double large = chamfer_meshes(m, m, 20000, 3).value;
  EXPECT_GT(small, 0.0);
  EXPECT_GT(large, 0.0);
  EXPECT_LT(large, small);
}

TEST(ChamferMeshes, UsesSeedAndSeedPlusOne) {
  const TriangleMesh a = fixtures::icosphere(1, 0.1);
  const TriangleMesh b = fixtures::cube(0.15);
  const double direct =
      chamfer(sample_surface(a, 3000, 11), sample_surface(b, 3000, 12)).value;
  EXPECT_EQ(chamfer_meshes(a, b, 3000, 11).value, direct);
}

TEST(ChamferMeshes, TranslatedPlate) {
  TriangleMesh plate;
  plate.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  plate.faces = {{0, 1, 2}, {0, 2, 3}};
  const Vec3 t(0, 0, 0.05);
  const TriangleMesh moved = apply_transform(plate, RigidTransform::from_translation(t));
  const double v = chamfer_meshes(plate, moved, 100000, 5).value;
  EXPECT_NEAR(v, 2 * t.squaredNorm(), 0.02 * 2 * t.squaredNorm());
}

TEST(ChamferMeshes, SlightScaleCloserThanSphere) {
  const TriangleMesh cube = fixtures::cube(0.1);
  const TriangleMesh grown = apply_transform(cube, SimilarityTransform::uniform_scale(1.01));
  const TriangleMesh sphere = fixtures::icosphere(3, 0.062);
  EXPECT_LT(chamfer_meshes(cube, grown, 20000, 1).value,
            chamfer_meshes(cube, sphere, 20000, 1).value);
}
