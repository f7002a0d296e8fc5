#pragma once

// Vascular dominant regions: nearest-branch-group partition of the kidney
// and per-region volume / tumour-contact statistics.

#include <algorithm>
#include <map>
#include <vector>

#include "renovor/kdtree.hpp"
#include "renovor/morphology.hpp"
#include "renovor/parallel.hpp"
#include "renovor/vesseltree.hpp"
#include "renovor/volume.hpp"

namespace renovor {

struct VoronoiPartition {
  LabelVolume labels;               // region id per kidney voxel, 0 outside
  std::vector<int> group_of_region; // entry r - 1 is the branch group of region r

  int region_count() const { return static_cast<int>(group_of_region.size()); }
};

/// Centreline voxels of every branch, tagged with the branch's group.
inline std::vector<Site> group_sites(const VesselTree &tree, const BranchClustering &clustering)
{
  if (clustering.group_of_branch.size() != tree.branches.size())
    throw std::invalid_argument("clustering does not match the tree's branches");
  std::vector<Site> sites;
  for (int b = 0; b < static_cast<int>(tree.branches.size()); ++b)
    for (const auto &v : branch_voxels(tree, b)) sites.push_back({v, clustering.group_of_branch[b]});
  return sites;
}

/// Assigns every kidney voxel to the group with the nearest centreline voxel
/// (exact world distance, ties to the smallest group id). Region ids are
/// dense, numbered in group order over the groups that receive voxels.
inline VoronoiPartition partition(const LabelVolume &kidney, const VesselTree &tree,
                                  const BranchClustering &clustering)
{
  require_same_geometry(kidney.geometry(), tree.geometry, "partition");
  if (count_nonzero(kidney) == 0) throw DataError("partition: empty kidney mask");
  if (clustering.group_count < 1) throw DataError("partition: no branch groups");
  auto sites = group_sites(tree, clustering);
  std::vector<std::size_t> per_group(static_cast<std::size_t>(clustering.group_count) + 1, 0);
  for (const auto &s : sites) {
    if (s.group < 1 || s.group > clustering.group_count) throw DataError("partition: invalid group id");
    ++per_group[s.group];
  }
  for (int gid = 1; gid <= clustering.group_count; ++gid)
    if (per_group[gid] == 0) throw DataError("partition: branch group without centreline voxels");

  const auto &g = kidney.geometry();
  const SiteTree index(std::move(sites), g.spacing);
  std::vector<int> group(kidney.size(), 0);
  parallel_for(0, kidney.size(), [&](std::size_t i) {
    if (kidney[i]) group[i] = index.nearest(g.index(i)).group;
  });

  std::vector<int> region_of_group(static_cast<std::size_t>(clustering.group_count) + 1, 0);
  for (int gid : group) region_of_group[gid] = gid > 0 ? 1 : 0;
  VoronoiPartition p;
  for (int gid = 1; gid <= clustering.group_count; ++gid)
    if (region_of_group[gid]) {
      p.group_of_region.push_back(gid);
      region_of_group[gid] = static_cast<int>(p.group_of_region.size());
    }
  p.labels = LabelVolume(g);
  for (std::size_t i = 0; i < kidney.size(); ++i)
    p.labels[i] = static_cast<std::uint16_t>(region_of_group[group[i]]);
  return p;
}

/// The same computation applied to ground-truth kidney and tree.
inline VoronoiPartition simulated_ground_truth_partition(const LabelVolume &gt_kidney, const VesselTree &gt_tree,
                                                         const BranchClustering &clustering)
{
  return partition(gt_kidney, gt_tree, clustering);
}

struct RegionStats {
  int region = 0;
  int group = 0;
  std::size_t voxels = 0;
  double volume_mm3 = 0;
  double volume_ratio = 0; // percent of the kidney volume
  double contact_area_mm2 = 0;
  double area_ratio = 0; // percent of the total tumour contact
};

/// Physical area of the face between a voxel and its neighbour along `axis`.
inline double face_area(const Vec3 &spacing, int axis)
{
  return axis == 0 ? spacing[1] * spacing[2] : (axis == 1 ? spacing[0] * spacing[2] : spacing[0] * spacing[1]);
}

/// Volumes and tumour contact per region. Contact counts faces between a
/// region voxel outside the tumour (dilated by margin_mm) and a 6-neighbour
/// inside it.
inline std::vector<RegionStats> region_stats(const VoronoiPartition &p, const LabelVolume *tumor = nullptr,
                                             double margin_mm = 5.0)
{
  const auto &g = p.labels.geometry();
  const int m = p.region_count();
  std::vector<RegionStats> stats(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    stats[r].region = r + 1;
    stats[r].group = p.group_of_region[r];
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    const int r = p.labels[i];
    if (r == 0) continue;
    if (r > m) throw DataError("region_stats: label outside the region table");
    ++stats[r - 1].voxels;
    ++total;
  }
  for (auto &s : stats) {
    s.volume_mm3 = static_cast<double>(s.voxels) * g.voxel_volume();
    s.volume_ratio = total ? 100.0 * static_cast<double>(s.voxels) / static_cast<double>(total) : 0.0;
  }
  if (!tumor) return stats;

  require_same_geometry(g, tumor->geometry(), "region_stats");
  const LabelVolume zone = dilate_ball(*tumor, margin_mm);
  const auto &offs = neighbor_offsets(6);
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    const int r = p.labels[i];
    if (r == 0 || zone[i]) continue;
    const Index3 x = g.index(i);
    for (const auto &o : offs) {
      const Index3 q = x + o;
      if (!g.contains(q) || !zone.at(q)) continue;
      const int axis = o.x != 0 ? 0 : (o.y != 0 ? 1 : 2);
      stats[r - 1].contact_area_mm2 += face_area(g.spacing, axis);
    }
  }
  double contact = 0;
  for (const auto &s : stats) contact += s.contact_area_mm2;
  if (contact > 0)
    for (auto &s : stats) s.area_ratio = 100.0 * s.contact_area_mm2 / contact;
  return stats;
}

/// Dice of each region of `a` against the region of `b` it overlaps most
/// (ties to the smaller id); 0 when it overlaps none.
inline std::vector<double> per_region_dice(const VoronoiPartition &a, const VoronoiPartition &b)
{
  require_same_geometry(a.labels.geometry(), b.labels.geometry(), "per_region_dice");
  const int ma = a.region_count(), mb = b.region_count();
  std::vector<std::size_t> size_a(ma + 1, 0), size_b(mb + 1, 0);
  std::map<std::pair<int, int>, std::size_t> overlap;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const int ra = a.labels[i], rb = b.labels[i];
    ++size_a[ra];
    ++size_b[rb];
    if (ra && rb) ++overlap[{ra, rb}];
  }
  std::vector<double> out;
  for (int ra = 1; ra <= ma; ++ra) {
    std::size_t best = 0;
    int best_rb = 0;
    for (int rb = 1; rb <= mb; ++rb) {
      auto it = overlap.find({ra, rb});
      if (it != overlap.end() && it->second > best) {
        best = it->second;
        best_rb = rb;
      }
    }
    const double denom = static_cast<double>(size_a[ra] + (best_rb ? size_b[best_rb] : 0));
    out.push_back(denom > 0 ? 2.0 * static_cast<double>(best) / denom : 0.0);
  }
  return out;
}

} // namespace renovor
