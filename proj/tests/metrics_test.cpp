#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "renovor/metrics.hpp"
#include "renovor/morphology.hpp"
#include "test_util.hpp"

using namespace renovor;

namespace {

LabelVolume voxels(const VolumeGeometry &g, const std::vector<Index3> &pts)
{
  LabelVolume m(g);
  for (const auto &p : pts) m.at(p) = 1;
  return m;
}

/// Copy of m shifted by d inside a larger grid g.
LabelVolume shifted(const LabelVolume &m, const VolumeGeometry &g, const Index3 &d)
{
  LabelVolume out(g);
  const auto &src = m.geometry();
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.at(src.index(i) + d) = 1;
  return out;
}

double brute_hausdorff(const LabelVolume &a, const LabelVolume &b)
{
  const auto &g = a.geometry();
  const auto pa = mask_voxels(a), pb = mask_voxels(b);
  const auto directed = [&](const std::vector<Index3> &x, const std::vector<Index3> &y) {
    double worst = 0;
    for (const auto &p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto &q : y) best = std::min(best, squared_distance_mm(p, q, g.spacing));
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

/// Random blob: a few overlapping balls.
LabelVolume blob(const VolumeGeometry &g, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> c(5, static_cast<double>(g.dims[0]) - 5), r(1.5, 4);
  LabelVolume m(g);
  for (int k = 0; k < 3; ++k) {
    const Vec3 center{c(rng), c(rng), c(rng)};
    const double rad = r(rng);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Index3 p = g.index(i);
      const double dx = p.x - center[0], dy = p.y - center[1], dz = p.z - center[2];
      if (dx * dx + dy * dy + dz * dz <= rad * rad) m[i] = 1;
    }
  }
  return m;
}

} // namespace

TEST(Dice, Examples)
{
  const VolumeGeometry g = test::cube(6);
  const LabelVolume a = voxels(g, {{1, 1, 1}, {2, 2, 2}});
  EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dice(a, voxels(g, {{4, 4, 4}})), 0.0);
  EXPECT_DOUBLE_EQ(dice(voxels(g, {{1, 1, 1}}), a), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(dice(LabelVolume(g), LabelVolume(g)), 1.0);
  EXPECT_THROW(dice(a, LabelVolume(test::cube(5))), DataError);
}

TEST(Dice, SetArithmeticOracleAndSymmetry)
{
  std::mt19937_64 rng(42);
  const VolumeGeometry g = test::cube(10);
  for (int trial = 0; trial < 20; ++trial) {
    const LabelVolume a = test::random_mask(g, 0.3, rng), b = test::random_mask(g, 0.4, rng);
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      na += a[i] != 0;
      nb += b[i] != 0;
      both += a[i] && b[i];
    }
    EXPECT_DOUBLE_EQ(dice(a, b), 2.0 * static_cast<double>(both) / static_cast<double>(na + nb));
    EXPECT_DOUBLE_EQ(dice(a, b), dice(b, a));
    const auto c = confusion(a, b);
    EXPECT_EQ(c.tp + c.fp + c.tn + c.fn, a.size());
  }
}

TEST(Sensitivity, Examples)
{
  const VolumeGeometry g = test::cube(6);
  const LabelVolume gt = voxels(g, {{1, 1, 1}, {2, 2, 2}});
  EXPECT_DOUBLE_EQ(sensitivity(gt, voxels(g, {{1, 1, 1}, {2, 2, 2}, {3, 3, 3}})), 1.0);
  EXPECT_DOUBLE_EQ(sensitivity(gt, voxels(g, {{4, 4, 4}})), 0.0);
  EXPECT_DOUBLE_EQ(sensitivity(gt, voxels(g, {{1, 1, 1}})), 0.5);
  EXPECT_THROW(sensitivity(LabelVolume(g), gt), DataError);
}

TEST(Hausdorff, Examples)
{
  const VolumeGeometry g = test::cube(8);
  const LabelVolume a = voxels(g, {{1, 1, 1}});
  EXPECT_DOUBLE_EQ(hausdorff(a, a), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff(a, voxels(g, {{4, 1, 1}})), 3.0);
  EXPECT_THROW(hausdorff(a, LabelVolume(g)), DataError);
}

TEST(Hausdorff, UsesWorldSpacing)
{
  const VolumeGeometry g{{8, 8, 8}, {0.5, 2, 1}, {0, 0, 0}};
  EXPECT_DOUBLE_EQ(hausdorff(voxels(g, {{1, 1, 1}}), voxels(g, {{1, 4, 1}})), 6.0);
  EXPECT_DOUBLE_EQ(hausdorff(voxels(g, {{1, 1, 1}}), voxels(g, {{5, 1, 1}})), 2.0);
}

TEST(Hausdorff, MatchesBruteForceOnBlobs)
{
  std::mt19937_64 rng(7);
  const VolumeGeometry g{{20, 20, 20}, {0.8, 1.0, 1.3}, {0, 0, 0}};
  for (int trial = 0; trial < 5; ++trial) {
    const LabelVolume a = blob(g, rng), b = blob(g, rng);
    const LabelVolume sa = surface_mask(a), sb = surface_mask(b);
    const double hd = hausdorff(sa, sb);
    EXPECT_DOUBLE_EQ(hd, brute_hausdorff(sa, sb));
    EXPECT_DOUBLE_EQ(hd, hausdorff(sb, sa));
    EXPECT_DOUBLE_EQ(hd, surface_hausdorff(a, b));
    const auto pa = mask_voxels(sa), pb = mask_voxels(sb);
    EXPECT_GE(hd, directed_hausdorff(pa, pb, g.spacing));
    EXPECT_GE(hd, directed_hausdorff(pb, pa, g.spacing));
  }
}

TEST(SurfaceMask, InteriorRemoved)
{
  const VolumeGeometry g = test::cube(7);
  LabelVolume cube(g);
  for (long z = 1; z <= 5; ++z)
    for (long y = 1; y <= 5; ++y)
      for (long x = 1; x <= 5; ++x) cube.at(x, y, z) = 1;
  const LabelVolume s = surface_mask(cube);
  EXPECT_EQ(count_nonzero(s), 125u - 27u);
  EXPECT_EQ(s.at(3, 3, 3), 0);
  EXPECT_EQ(s.at(1, 3, 3), 1);
}

TEST(SurfaceMask, VolumeBorderCountsAsOutside)
{
  const VolumeGeometry g = test::cube(3);
  EXPECT_EQ(count_nonzero(surface_mask(LabelVolume(g, 1))), 26u);
}

TEST(CenterlineOverlap, Examples)
{
  const VolumeGeometry g{{12, 3, 3}, {1, 1, 1}, {0, 0, 0}};
  std::vector<Index3> line, half;
  for (long x = 0; x < 10; ++x) line.push_back({x, 1, 1});
  for (long x = 0; x < 5; ++x) half.push_back({x, 1, 1});
  const LabelVolume gt = voxels(g, line);
  EXPECT_DOUBLE_EQ(centerline_overlap(gt, gt), 1.0);
  EXPECT_NEAR(centerline_overlap(gt, voxels(g, half)), 2.0 * 5 / 15, 1e-12);
  EXPECT_THROW(centerline_overlap(LabelVolume(g), LabelVolume(g)), DataError);
}

TEST(CenterlineOverlap, TubeIsChebyshevRadiusOne)
{
  const VolumeGeometry g = test::cube(7);
  const LabelVolume gt = voxels(g, {{3, 3, 3}});
  EXPECT_DOUBLE_EQ(centerline_overlap(gt, voxels(g, {{4, 4, 4}})), 1.0);
  EXPECT_DOUBLE_EQ(centerline_overlap(gt, voxels(g, {{5, 3, 3}})), 0.0);
  EXPECT_EQ(count_nonzero(chebyshev_tube(gt)), 27u);
}

TEST(CenterlineOverlap, SymmetricVariantBoundedAndSymmetric)
{
  std::mt19937_64 rng(3);
  const VolumeGeometry g = test::cube(12);
  for (int trial = 0; trial < 10; ++trial) {
    const LabelVolume a = test::random_mask(g, 0.02, rng), b = test::random_mask(g, 0.05, rng);
    const double s = centerline_overlap_symmetric(a, b);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_DOUBLE_EQ(s, centerline_overlap_symmetric(b, a));
  }
  const LabelVolume a = test::random_mask(g, 0.05, rng);
  EXPECT_DOUBLE_EQ(centerline_overlap_symmetric(a, a), 1.0);
}

TEST(CenterlineOverlap, LongerOutputInsideTubeExceedsOne)
{
  // the caption formula counts only output voxels against the gt tube, so a
  // thick output hugging a thin gt scores above 1
  const VolumeGeometry g{{12, 3, 3}, {1, 1, 1}, {0, 0, 0}};
  LabelVolume gt(g), out(g);
  for (long x = 1; x < 11; ++x) {
    gt.at(x, 1, 1) = 1;
    out.at(x, 1, 1) = out.at(x, 0, 1) = out.at(x, 2, 1) = 1;
  }
  EXPECT_DOUBLE_EQ(centerline_overlap(gt, out), 2.0 * 30 / 40);
}

TEST(Metrics, TranslationInvariant)
{
  std::mt19937_64 rng(11);
  const VolumeGeometry small = test::cube(14);
  const VolumeGeometry big{{20, 20, 20}, {1, 1, 1}, {0, 0, 0}};
  const Index3 d{3, 2, 5};
  for (int trial = 0; trial < 3; ++trial) {
    const LabelVolume a = blob(small, rng), b = blob(small, rng);
    const LabelVolume a0 = shifted(a, big, {0, 0, 0}), b0 = shifted(b, big, {0, 0, 0});
    const LabelVolume a1 = shifted(a, big, d), b1 = shifted(b, big, d);
    EXPECT_DOUBLE_EQ(dice(a0, b0), dice(a1, b1));
    EXPECT_DOUBLE_EQ(sensitivity(a0, b0), sensitivity(a1, b1));
    EXPECT_DOUBLE_EQ(surface_hausdorff(a0, b0), surface_hausdorff(a1, b1));
    EXPECT_DOUBLE_EQ(centerline_overlap(a0, b0), centerline_overlap(a1, b1));
  }
}
