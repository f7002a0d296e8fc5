#include <random>

#include <gtest/gtest.h>

#include "renovor/metrics.hpp"
#include "renovor/phantom.hpp"
#include "renovor/skeleton.hpp"
#include "renovor/vesseltree.hpp"
#include "test_util.hpp"

using namespace renovor;

namespace {

Segment seg(Vec3 a, Vec3 b) { return Segment{a, b, 1.0, -1, 1}; }

LabelVolume curve(const VolumeGeometry &g, const std::vector<Segment> &segs) { return rasterize_centerlines(g, segs); }

/// Trunk bifurcating outside the kidney; both children enter it and
/// bifurcate once more inside.
struct Fig5 {
  VolumeGeometry g = test::cube(40);
  std::vector<Segment> segs{seg({20, 20, 2}, {20, 20, 10}),   seg({20, 20, 10}, {12, 20, 20}),
                            seg({20, 20, 10}, {28, 20, 20}),  seg({12, 20, 20}, {9, 15, 28}),
                            seg({12, 20, 20}, {9, 25, 28}),   seg({28, 20, 20}, {31, 15, 28}),
                            seg({28, 20, 20}, {31, 25, 28})};
  LabelVolume kidney = ellipsoid_mask(g, {20, 20, 24}, {16, 12, 8});
  VesselTree bare = build_tree(curve(g, segs), {20, 20, 2});
  VesselTree tree = mark_entries(bare, kidney);
};

std::size_t components(const LabelVolume &m)
{
  std::vector<std::uint32_t> labels;
  return label_components(m, 26, labels).size();
}

} // namespace

// ------------------------------------------------------------------ skeleton

TEST(Skeleton, SingleVoxel)
{
  LabelVolume m(test::cube(5));
  m.at(2, 2, 2) = 1;
  EXPECT_EQ(skeletonize(m), m);
}

TEST(Skeleton, EmptyMask)
{
  const LabelVolume m(test::cube(5));
  EXPECT_EQ(count_nonzero(skeletonize(m)), 0u);
}

TEST(Skeleton, ThinCurveUnchanged)
{
  const VolumeGeometry g = test::cube(20);
  const LabelVolume c = curve(g, {seg({2, 3, 4}, {10, 12, 8}), seg({10, 12, 8}, {16, 5, 15})});
  EXPECT_EQ(skeletonize(c), c);
}

TEST(Skeleton, TubeAxis)
{
  const VolumeGeometry g = test::cube(24);
  const LabelVolume tube = rasterize_capsules(g, {Segment{{12, 12, -5}, {12, 12, 30}, 2.0, -1, 1}});
  const LabelVolume s = skeletonize(tube);
  for (long z = 0; z < 24; ++z) {
    std::size_t n = 0;
    for (long y = 0; y < 24; ++y)
      for (long x = 0; x < 24; ++x)
        if (s.at(x, y, z)) {
          ++n;
          EXPECT_LE(std::abs(x - 12), 1);
          EXPECT_LE(std::abs(y - 12), 1);
        }
    // thinning peels the open ends where the tube meets the volume border
    if (z > 0 && z < 23) {
      EXPECT_GE(n, 1u) << "slice " << z;
    }
  }
}

TEST(Skeleton, OneVoxelWide)
{
  const VolumeGeometry g = test::cube(32);
  const LabelVolume s = skeletonize(rasterize_capsules(
      g, {Segment{{16, 16, 2}, {16, 16, 14}, 2.5, -1, 1}, Segment{{16, 16, 14}, {8, 10, 28}, 2.0, 0, 2},
          Segment{{16, 16, 14}, {24, 22, 28}, 2.0, 0, 2}}));
  // no 2x2x2 block is fully set
  for (long z = 0; z + 1 < 32; ++z)
    for (long y = 0; y + 1 < 32; ++y)
      for (long x = 0; x + 1 < 32; ++x) {
        int n = 0;
        for (int k = 0; k < 8; ++k) n += s.at(x + (k & 1), y + ((k >> 1) & 1), z + (k >> 2)) != 0;
        EXPECT_LT(n, 8);
      }
  const VesselTree t = build_tree(s, {16, 16, 2});
  EXPECT_EQ(t.branches.size(), 3u);
}

TEST(Skeleton, PreservesComponentCount)
{
  std::mt19937_64 rng(61);
  for (int t = 0; t < 10; ++t) {
    const LabelVolume blobs = dilate_ball(test::random_mask(test::cube(20), 0.004, rng), 2.0);
    EXPECT_EQ(components(skeletonize(blobs)), components(blobs));
  }
}

TEST(Skeleton, SubsetOfMask)
{
  std::mt19937_64 rng(62);
  const LabelVolume blobs = dilate_ball(test::random_mask(test::cube(20), 0.01, rng), 1.8);
  const LabelVolume s = skeletonize(blobs);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i]) {
      EXPECT_TRUE(blobs[i]);
    }
}

// ------------------------------------------------------------------ tree building

TEST(BuildTree, StraightLine)
{
  const VolumeGeometry g = test::cube(12);
  const VesselTree t = build_tree(curve(g, {seg({1, 5, 5}, {10, 5, 5})}), {0, 5, 5});
  EXPECT_EQ(t.nodes.size(), 2u);
  EXPECT_EQ(t.branches.size(), 1u);
  EXPECT_EQ(t.nodes[t.root].voxel, (Index3{1, 5, 5}));
}

TEST(BuildTree, YShape)
{
  const VolumeGeometry g = test::cube(20);
  const VesselTree t = build_tree(curve(g, {seg({10, 10, 1}, {10, 10, 8}), seg({10, 10, 8}, {4, 10, 16}),
                                             seg({10, 10, 8}, {16, 10, 16})}),
                                  {10, 10, 0});
  EXPECT_EQ(t.nodes.size(), 4u);
  EXPECT_EQ(t.branches.size(), 3u);
  EXPECT_EQ(t.root, 0);
  int leaves = 0, bifurcations = 0;
  for (const auto &n : t.nodes) {
    leaves += n.degree == 1;
    bifurcations += n.degree == 3;
  }
  EXPECT_EQ(leaves, 3); // the root is a degree-1 node too
  EXPECT_EQ(bifurcations, 1);
  EXPECT_EQ(t.branches[1].parent, 0);
  EXPECT_EQ(t.branches[2].parent, 0);
}

TEST(BuildTree, RootNearestHint)
{
  const VolumeGeometry g = test::cube(20);
  const LabelVolume c = curve(g, {seg({10, 10, 1}, {10, 10, 8}), seg({10, 10, 8}, {4, 10, 16}),
                                  seg({10, 10, 8}, {16, 10, 16})});
  const VesselTree t = build_tree(c, {17, 10, 17});
  EXPECT_EQ(t.nodes[t.root].voxel, (Index3{16, 10, 16}));
}

TEST(BuildTree, BreaksCycles)
{
  const VolumeGeometry g = test::cube(20);
  const LabelVolume c = curve(g, {seg({5, 5, 5}, {12, 5, 5}), seg({12, 5, 5}, {12, 12, 5}), seg({12, 12, 5}, {5, 12, 5}),
                                  seg({5, 12, 5}, {5, 5, 5}), seg({12, 12, 5}, {16, 16, 5})});
  const VesselTree t = build_tree(c, {16, 16, 5});
  EXPECT_EQ(t.edges.size() + 1, t.nodes.size());
  EXPECT_LT(tree_voxel_count(t), count_nonzero(c));
}

TEST(BuildTree, KeepsLargestComponent)
{
  const VolumeGeometry g = test::cube(20);
  const VesselTree t = build_tree(curve(g, {seg({1, 1, 1}, {1, 1, 4}), seg({10, 2, 2}, {10, 18, 2})}), {1, 1, 1});
  EXPECT_EQ(tree_voxel_count(t), 17u);
}

TEST(BuildTree, SpurPruning)
{
  const VolumeGeometry g = test::cube(20);
  const LabelVolume c = curve(g, {seg({10, 10, 1}, {10, 10, 18}), seg({10, 10, 9}, {12, 10, 9})});
  EXPECT_EQ(build_tree(c, {10, 10, 1}).branches.size(), 3u);
  EXPECT_EQ(build_tree(c, {10, 10, 1}, TreeOptions{3.0}).branches.size(), 1u);
}

TEST(BuildTree, EmptySkeletonRejected)
{
  EXPECT_THROW(build_tree(LabelVolume(test::cube(4)), {0, 0, 0}), DataError);
}

TEST(BuildTree, BranchesPartitionSkeletonVoxels)
{
  const Fig5 f;
  for (const VesselTree *t : {&f.bare, &f.tree}) {
    std::size_t total = 0;
    LabelVolume seen(t->geometry);
    for (int b = 0; b < static_cast<int>(t->branches.size()); ++b) {
      const Branch &br = t->branches[b];
      EXPECT_GE(br.start_node, 0);
      EXPECT_GE(br.end_node, 0);
      for (const auto &v : branch_voxels(*t, b)) {
        EXPECT_EQ(seen.at(v), 0);
        seen.at(v) = 1;
        ++total;
      }
    }
    EXPECT_EQ(total, tree_voxel_count(*t));
    EXPECT_EQ(seen, tree_mask(*t));
  }
  std::vector<int> edge_owner(f.tree.edges.size(), 0);
  for (const auto &br : f.tree.branches)
    for (int e : br.edges) ++edge_owner[e];
  for (int c : edge_owner) EXPECT_EQ(c, 1);
}

TEST(BuildTree, PhantomBranchCountMatchesGenerator)
{
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    PhantomSpec s;
    s.seed = seed;
    s.noise_sigma = 0;
    const auto segs = phantom_segments(s);
    const VesselTree t = build_tree(rasterize_centerlines(s.geometry, segs), segs.front().a);
    EXPECT_EQ(t.branches.size(), segs.size());
    EXPECT_EQ(segs.size(), 7u);
  }
}

// ------------------------------------------------------------------ entries

TEST(Entries, TubeEnteringOnce)
{
  const VolumeGeometry g = test::cube(30);
  const LabelVolume kidney = ellipsoid_mask(g, {15, 15, 18}, {10, 10, 8});
  const VesselTree t = build_tree(curve(g, {seg({15, 15, 1}, {15, 15, 20})}), {15, 15, 1});
  const auto entries = detect_entries(t, kidney);
  ASSERT_EQ(entries.size(), 1u);
  const Index3 v = entry_voxel(t, entries[0]);
  EXPECT_EQ(kidney.at(v), 1);
  EXPECT_EQ(kidney.at(v.x, v.y, v.z - 1), 0);
}

TEST(Entries, YTreeEnteringTwice)
{
  const Fig5 f;
  EXPECT_EQ(detect_entries(f.bare, f.kidney).size(), 2u);
  ASSERT_EQ(f.tree.entries.size(), 2u);
  for (int e : f.tree.entries) {
    const Index3 v = f.tree.nodes[e].voxel;
    EXPECT_EQ(f.kidney.at(v), 1);
    bool boundary = false;
    for (const auto &o : neighbor_offsets(26)) boundary = boundary || !f.kidney.at(v + o);
    EXPECT_TRUE(boundary);
  }
}

TEST(Entries, TreeOutsideKidney)
{
  const VolumeGeometry g = test::cube(30);
  const LabelVolume kidney = ellipsoid_mask(g, {15, 15, 22}, {5, 5, 4});
  const VesselTree t = build_tree(curve(g, {seg({15, 15, 1}, {15, 15, 10})}), {15, 15, 1});
  EXPECT_TRUE(detect_entries(t, kidney).empty());
}

TEST(Entries, RootInsideKidney)
{
  const VolumeGeometry g = test::cube(30);
  const LabelVolume kidney = ellipsoid_mask(g, {15, 15, 15}, {10, 10, 10});
  const VesselTree t = build_tree(curve(g, {seg({15, 15, 10}, {15, 15, 20})}), {15, 15, 10});
  const auto entries = detect_entries(t, kidney);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].edge, -1);
}

TEST(Entries, SiblingCrossingsTwoStepsApartStaySeparate)
{
  // bifurcation one voxel outside the kidney: each child enters on its first
  // voxel, two steps from the other crossing, which is not close enough to merge
  const VolumeGeometry g = test::cube(30);
  LabelVolume kidney(g);
  for (std::size_t i = 0; i < kidney.size(); ++i) kidney[i] = g.index(i).z >= 11;
  const VesselTree t = build_tree(curve(g, {seg({15, 15, 1}, {15, 15, 10}), seg({15, 15, 10}, {8, 15, 20}),
                                             seg({15, 15, 10}, {22, 15, 20})}),
                                  {15, 15, 1});
  EXPECT_EQ(detect_entries(t, kidney).size(), 2u);
}

// ------------------------------------------------------------------ clustering

TEST(Clustering, Fig5Levels)
{
  const Fig5 f;
  EXPECT_EQ(cluster_branches(f.tree, 0).group_count, 2);
  EXPECT_EQ(cluster_branches(f.tree, -1).group_count, 1);
  EXPECT_EQ(cluster_branches(f.tree, 1).group_count, 4);
}

TEST(Clustering, SaturatesPastRootAndLeaves)
{
  const Fig5 f;
  EXPECT_EQ(cluster_branches(f.tree, -5).group_count, 1);
  EXPECT_EQ(cluster_branches(f.tree, 5).group_count, cluster_branches(f.tree, 2).group_count);
}

TEST(Clustering, EveryBranchMappedAndGroupsNonEmpty)
{
  const Fig5 f;
  for (int offset = -3; offset <= 3; ++offset) {
    const auto c = cluster_branches(f.tree, offset);
    ASSERT_EQ(c.group_of_branch.size(), f.tree.branches.size());
    std::vector<int> size(static_cast<std::size_t>(c.group_count) + 1, 0);
    for (int grp : c.group_of_branch) {
      ASSERT_GE(grp, 1);
      ASSERT_LE(grp, c.group_count);
      ++size[grp];
    }
    for (int grp = 1; grp <= c.group_count; ++grp) EXPECT_GT(size[grp], 0);
    EXPECT_EQ(c.level_offset, offset);
  }
}

TEST(Clustering, GroupCountMonotoneInOffset)
{
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    PhantomSpec s;
    s.seed = seed;
    s.noise_sigma = 0;
    s.tree.depth = 4;
    s.tree.min_length_mm = 9;
    s.tree.max_length_mm = 10;
    const auto ph = generate_phantom(s);
    int prev = 0;
    for (int offset = -3; offset <= 4; ++offset) {
      const int n = cluster_branches(ph.tree, offset).group_count;
      EXPECT_GE(n, prev);
      prev = n;
    }
  }
}

TEST(Clustering, FinerGroupsNestInCoarser)
{
  const Fig5 f;
  for (int offset = -2; offset <= 2; ++offset) {
    const auto coarse = cluster_branches(f.tree, offset), fine = cluster_branches(f.tree, offset + 1);
    std::map<int, int> parent;
    for (std::size_t b = 0; b < f.tree.branches.size(); ++b) {
      const auto [it, inserted] = parent.emplace(fine.group_of_branch[b], coarse.group_of_branch[b]);
      EXPECT_EQ(it->second, coarse.group_of_branch[b]);
    }
  }
}

TEST(Clustering, UpstreamBranchesJoinNearestDownstreamGroup)
{
  const Fig5 f;
  const auto c = cluster_branches(f.tree, 0);
  // the trunk is upstream of both entries and still belongs to a group
  EXPECT_GE(c.group_of_branch[0], 1);
}
