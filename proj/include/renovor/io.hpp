#pragma once

// JSON / CSV serialisation of trees, clusterings and region statistics, and
// the content-hashed run manifest.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "renovor/vesseltree.hpp"
#include "renovor/volume.hpp"
#include "renovor/voronoi.hpp"

namespace renovor {

using Json = nlohmann::ordered_json;

inline Json index_json(const Index3 &p) { return Json::array({p.x, p.y, p.z}); }

inline Index3 index_from_json(const Json &j)
{
  if (!j.is_array() || j.size() != 3) throw DataError("expected an [i, j, k] voxel index");
  return {j.at(0).get<long>(), j.at(1).get<long>(), j.at(2).get<long>()};
}

inline Json geometry_json(const VolumeGeometry &g)
{
  return Json{{"dims", g.dims}, {"spacing", g.spacing}, {"origin", g.origin}};
}

inline VolumeGeometry geometry_from_json(const Json &j)
{
  VolumeGeometry g;
  g.dims = j.at("dims").get<std::array<long, 3>>();
  g.spacing = j.at("spacing").get<Vec3>();
  g.origin = j.at("origin").get<Vec3>();
  g.validate();
  return g;
}

/// Nodes carry their voxel cluster and the tree carries its grid, so the
/// JSON is enough to rebuild the tree exactly.
inline Json tree_to_json(const VesselTree &t)
{
  Json nodes = Json::array(), edges = Json::array(), branches = Json::array();
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto &n = t.nodes[i];
    Json vox = Json::array();
    for (const auto &v : n.voxels) vox.push_back(index_json(v));
    nodes.push_back({{"id", i},
                     {"x_mm", n.position_mm[0]},
                     {"y_mm", n.position_mm[1]},
                     {"z_mm", n.position_mm[2]},
                     {"degree", n.degree},
                     {"voxel", index_json(n.voxel)},
                     {"voxels", vox}});
  }
  for (std::size_t i = 0; i < t.edges.size(); ++i) {
    Json path = Json::array();
    for (const auto &v : t.edges[i].path) path.push_back(index_json(v));
    edges.push_back({{"id", i}, {"from", t.edges[i].from}, {"to", t.edges[i].to}, {"path", path}});
  }
  for (std::size_t i = 0; i < t.branches.size(); ++i) {
    const auto &b = t.branches[i];
    branches.push_back({{"id", i},
                        {"edges", b.edges},
                        {"start_node", b.start_node},
                        {"end_node", b.end_node},
                        {"parent", b.parent}});
  }
  return Json{{"geometry", geometry_json(t.geometry)},
              {"nodes", nodes},
              {"edges", edges},
              {"branches", branches},
              {"root", t.root},
              {"entries", t.entries}};
}

inline VesselTree tree_from_json(const Json &j)
{
  try {
    const VolumeGeometry g = geometry_from_json(j.at("geometry"));
    const auto &jn = j.at("nodes");
    std::vector<std::vector<Index3>> node_voxels;
    for (const auto &n : jn) {
      std::vector<Index3> vox;
      for (const auto &v : n.at("voxels")) vox.push_back(index_from_json(v));
      if (vox.empty()) throw DataError("tree node without voxels");
      for (const auto &v : vox)
        if (!g.contains(v)) throw DataError("tree voxel outside the grid");
      node_voxels.push_back(std::move(vox));
    }
    const int n = static_cast<int>(node_voxels.size());
    if (n == 0) throw DataError("tree without nodes");
    std::vector<detail::UndirectedEdge> edges;
    for (const auto &e : j.at("edges")) {
      detail::UndirectedEdge ue;
      ue.a = e.at("from").get<int>();
      ue.b = e.at("to").get<int>();
      if (ue.a < 0 || ue.a >= n || ue.b < 0 || ue.b >= n || ue.a == ue.b) throw DataError("tree edge with bad nodes");
      for (const auto &v : e.at("path")) ue.path.push_back(index_from_json(v));
      edges.push_back(std::move(ue));
    }
    if (static_cast<int>(edges.size()) != n - 1) throw DataError("tree JSON is not a tree");
    const int root = j.at("root").get<int>();
    if (root < 0 || root >= n) throw DataError("tree root out of range");
    std::vector<char> entry(static_cast<std::size_t>(n), 0);
    for (const auto &e : j.at("entries")) {
      const int id = e.get<int>();
      if (id < 0 || id >= n) throw DataError("tree entry out of range");
      entry[id] = 1;
    }
    VesselTree t = detail::canonical_tree(g, node_voxels, edges, root, entry);
    if (static_cast<int>(t.nodes.size()) != n) throw DataError("tree JSON is not connected");
    return t;
  } catch (const Json::exception &e) {
    throw DataError(std::string("malformed tree JSON: ") + e.what());
  }
}

inline Json clustering_to_json(const BranchClustering &c)
{
  return Json{{"level_offset", c.level_offset}, {"group_count", c.group_count}, {"group_of_branch", c.group_of_branch}};
}

/// Fields mirror the Table-5 columns; the colour slot is the branch group.
inline Json region_stats_json(const std::vector<RegionStats> &stats, bool with_tumor, double margin_mm)
{
  Json regions = Json::array();
  for (const auto &s : stats)
    regions.push_back({{"region", s.region},
                       {"color_slot", s.group},
                       {"voxels", s.voxels},
                       {"vol_mm3", s.volume_mm3},
                       {"vol_ratio_pct", s.volume_ratio},
                       {"contact_area_mm2", s.contact_area_mm2},
                       {"area_ratio_pct", s.area_ratio}});
  return Json{{"tumor", with_tumor}, {"margin_mm", margin_mm}, {"regions", regions}};
}

inline std::string fixed(double v, int digits)
{
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string region_stats_csv(const std::vector<RegionStats> &stats)
{
  std::string out = "region,color_slot,vol_mm3,vol_pct,area_mm2,area_pct\n";
  for (const auto &s : stats)
    out += std::to_string(s.region) + ',' + std::to_string(s.group) + ',' + fixed(s.volume_mm3, 3) + ',' +
           fixed(s.volume_ratio, 3) + ',' + fixed(s.contact_area_mm2, 3) + ',' + fixed(s.area_ratio, 3) + '\n';
  return out;
}

inline void write_text(const std::filesystem::path &path, const std::string &text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path &path, const Json &j) { write_text(path, j.dump(2) + "\n"); }

inline Json read_json(const std::filesystem::path &path)
{
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string file_hash(const std::filesystem::path &path) { return hex64(fnv1a64(read_text(path))); }

/// Parameters plus a content hash of every output file, in sorted file
/// order. Holds no timestamps or absolute paths, so equal runs give equal
/// manifests.
inline Json make_manifest(const std::string &command, const Json &parameters, const std::filesystem::path &out_dir,
                          std::vector<std::string> files)
{
  std::sort(files.begin(), files.end());
  Json outputs = Json::object();
  for (const auto &f : files) outputs[f] = file_hash(out_dir / f);
  return Json{{"command", command}, {"parameters", parameters}, {"outputs", outputs}};
}

} // namespace renovor
