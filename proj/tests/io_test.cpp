#include <sstream>

#include <gtest/gtest.h>

#include "renovor/io.hpp"
#include "renovor/phantom.hpp"
#include "test_util.hpp"

using namespace renovor;

namespace {

Phantom quiet_phantom(std::uint64_t seed)
{
  PhantomSpec s;
  s.noise_sigma = 0;
  s.seed = seed;
  return generate_phantom(s);
}

void expect_same_tree(const VesselTree &a, const VesselTree &b)
{
  EXPECT_EQ(a.geometry.dims, b.geometry.dims);
  EXPECT_EQ(a.geometry.spacing, b.geometry.spacing);
  EXPECT_EQ(a.geometry.origin, b.geometry.origin);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].voxels, b.nodes[i].voxels);
    EXPECT_EQ(a.nodes[i].voxel, b.nodes[i].voxel);
    EXPECT_EQ(a.nodes[i].degree, b.nodes[i].degree);
  }
  ASSERT_EQ(a.edges.size(), b.edges.size());
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    EXPECT_EQ(a.edges[i].from, b.edges[i].from);
    EXPECT_EQ(a.edges[i].to, b.edges[i].to);
    EXPECT_EQ(a.edges[i].path, b.edges[i].path);
  }
  ASSERT_EQ(a.branches.size(), b.branches.size());
  for (std::size_t i = 0; i < a.branches.size(); ++i) {
    EXPECT_EQ(a.branches[i].edges, b.branches[i].edges);
    EXPECT_EQ(a.branches[i].parent, b.branches[i].parent);
    EXPECT_EQ(a.branches[i].children, b.branches[i].children);
  }
  EXPECT_EQ(a.root, b.root);
  EXPECT_EQ(a.entries, b.entries);
}

} // namespace

TEST(TreeJson, RoundTrip)
{
  for (std::uint64_t seed : {1, 2}) {
    const Phantom ph = quiet_phantom(seed);
    const Json j = tree_to_json(ph.tree);
    const VesselTree back = tree_from_json(Json::parse(j.dump()));
    expect_same_tree(ph.tree, back);
    EXPECT_EQ(tree_to_json(back), j);
    const auto c = cluster_branches(back, 0);
    EXPECT_EQ(c.group_of_branch, ph.clustering.group_of_branch);
  }
}

TEST(TreeJson, FileRoundTrip)
{
  test::TempDir dir;
  const Phantom ph = quiet_phantom(3);
  write_json(dir / "tree.json", tree_to_json(ph.tree));
  expect_same_tree(ph.tree, tree_from_json(read_json(dir / "tree.json")));
}

TEST(TreeJson, MalformedInputThrowsDataError)
{
  const Phantom ph = quiet_phantom(1);
  const Json good = tree_to_json(ph.tree);

  EXPECT_THROW(tree_from_json(Json::object()), DataError);
  EXPECT_THROW(tree_from_json(Json::array()), DataError);

  Json j = good;
  j["root"] = 999;
  EXPECT_THROW(tree_from_json(j), DataError);

  j = good;
  j["edges"].erase(j["edges"].size() - 1);
  EXPECT_THROW(tree_from_json(j), DataError);

  j = good;
  j["edges"][0]["to"] = j["edges"][0]["from"];
  EXPECT_THROW(tree_from_json(j), DataError);

  j = good;
  j["nodes"][0]["voxels"] = Json::array();
  EXPECT_THROW(tree_from_json(j), DataError);

  j = good;
  j["nodes"][0]["voxels"][0] = Json::array({-1, 0, 0});
  EXPECT_THROW(tree_from_json(j), DataError);

  j = good;
  j["nodes"][0]["voxels"][0] = Json::array({1, 2});
  EXPECT_THROW(tree_from_json(j), DataError);

  j = good;
  j["entries"] = Json::array({12345});
  EXPECT_THROW(tree_from_json(j), DataError);

  j = good;
  j["geometry"]["spacing"] = Json::array({1, 0, 1});
  EXPECT_THROW(tree_from_json(j), std::exception);

  j = good;
  j["root"] = "zero";
  EXPECT_THROW(tree_from_json(j), DataError);
}

TEST(TreeJson, UnparsableFileThrowsDataError)
{
  test::TempDir dir;
  write_text(dir / "bad.json", "{\"nodes\": [");
  EXPECT_THROW(read_json(dir / "bad.json"), DataError);
  EXPECT_THROW(read_json(dir / "missing.json"), IoError);
}

TEST(RegionStatsCsv, HeaderAndFormat)
{
  const std::vector<RegionStats> stats{{1, 3, 308, 308.0, 30.8, 12.5, 62.5}, {2, 5, 140, 140.0, 14.0, 7.5, 37.5}};
  const std::string csv = region_stats_csv(stats);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "region,color_slot,vol_mm3,vol_pct,area_mm2,area_pct");
  std::getline(in, line);
  EXPECT_EQ(line, "1,3,308.000,30.800,12.500,62.500");
  std::getline(in, line);
  EXPECT_EQ(line, "2,5,140.000,14.000,7.500,37.500");
  EXPECT_FALSE(std::getline(in, line));
}

TEST(RegionStatsJson, Fields)
{
  const std::vector<RegionStats> stats{{1, 2, 10, 10.0, 100.0, 0.0, 0.0}};
  const Json j = region_stats_json(stats, false, 5.0);
  EXPECT_EQ(j.at("tumor"), false);
  EXPECT_EQ(j.at("margin_mm"), 5.0);
  const auto &r = j.at("regions").at(0);
  for (const char *k : {"region", "color_slot", "voxels", "vol_mm3", "vol_ratio_pct", "contact_area_mm2", "area_ratio_pct"})
    EXPECT_TRUE(r.contains(k)) << k;
  EXPECT_EQ(r.at("color_slot"), 2);
}

TEST(Manifest, HashesFollowContent)
{
  test::TempDir dir;
  write_text(dir / "b.txt", "beta");
  write_text(dir / "a.txt", "alpha");
  const Json params{{"seed", 1}};
  const Json m1 = make_manifest("demo", params, dir.path(), {"b.txt", "a.txt"});
  const Json m2 = make_manifest("demo", params, dir.path(), {"a.txt", "b.txt"});
  EXPECT_EQ(m1.dump(), m2.dump());
  EXPECT_EQ(m1.at("outputs").begin().key(), "a.txt");
  EXPECT_EQ(m1.at("outputs").at("a.txt"), hex64(fnv1a64("alpha")));
  write_text(dir / "a.txt", "alphA");
  EXPECT_NE(make_manifest("demo", params, dir.path(), {"a.txt", "b.txt"}), m1);
}

TEST(Manifest, Fnv1aKnownValues)
{
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(GeometryJson, RoundTrip)
{
  const VolumeGeometry g{{7, 8, 9}, {0.5, 0.75, 2.5}, {-10, 3.25, 0}};
  const VolumeGeometry back = geometry_from_json(geometry_json(g));
  EXPECT_EQ(back.dims, g.dims);
  EXPECT_EQ(back.spacing, g.spacing);
  EXPECT_EQ(back.origin, g.origin);
}
