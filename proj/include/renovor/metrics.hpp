#pragma once

// Overlap, surface-distance and centreline-overlap metrics.

#include <algorithm>
#include <cmath>
#include <vector>

#include "renovor/kdtree.hpp"
#include "renovor/parallel.hpp"
#include "renovor/volume.hpp"

namespace renovor {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline ConfusionCounts confusion(const LabelVolume &gt, const LabelVolume &seg)
{
  require_same_geometry(gt.geometry(), seg.geometry(), "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool g = gt[i] != 0, s = seg[i] != 0;
    if (g && s) ++c.tp;
    else if (s) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// 2TP / (2TP + FP + FN); two empty masks agree perfectly (1.0).
inline double dice(const LabelVolume &gt, const LabelVolume &seg)
{
  const auto c = confusion(gt, seg);
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double sensitivity(const LabelVolume &gt, const LabelVolume &seg)
{
  const auto c = confusion(gt, seg);
  if (c.tp + c.fn == 0) throw DataError("sensitivity: empty ground truth");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

/// Mask voxels with at least one 6-neighbour outside the mask (or outside
/// the grid).
inline LabelVolume surface_mask(const LabelVolume &mask)
{
  const auto &g = mask.geometry();
  LabelVolume out(g);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Index3 p = g.index(i);
    for (const auto &o : neighbor_offsets(6)) {
      const Index3 q = p + o;
      if (!g.contains(q) || !mask.at(q)) {
        out[i] = 1;
        break;
      }
    }
  }
  return out;
}

inline std::vector<Index3> mask_voxels(const LabelVolume &mask)
{
  std::vector<Index3> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(mask.geometry().index(i));
  return out;
}

/// max over a of min over b of the world distance, in mm.
inline double directed_hausdorff(const std::vector<Index3> &a, const std::vector<Index3> &b, const Vec3 &spacing)
{
  std::vector<Site> sites;
  sites.reserve(b.size());
  for (const auto &p : b) sites.push_back({p, 0});
  const SiteTree index(std::move(sites), spacing);
  std::vector<double> d2(a.size());
  parallel_for(0, a.size(), [&](std::size_t i) { d2[i] = index.nearest(a[i]).d2; });
  double worst = 0;
  for (double d : d2) worst = std::max(worst, d);
  return std::sqrt(worst);
}

/// Symmetric Hausdorff distance between two surface masks, in mm.
inline double hausdorff(const LabelVolume &gt_surface, const LabelVolume &seg_surface)
{
  require_same_geometry(gt_surface.geometry(), seg_surface.geometry(), "hausdorff");
  const auto a = mask_voxels(gt_surface), b = mask_voxels(seg_surface);
  if (a.empty() || b.empty()) throw DataError("hausdorff: empty surface");
  const auto &sp = gt_surface.geometry().spacing;
  return std::max(directed_hausdorff(a, b, sp), directed_hausdorff(b, a, sp));
}

/// Hausdorff distance between the surfaces of two solid masks.
inline double surface_hausdorff(const LabelVolume &gt, const LabelVolume &seg)
{
  return hausdorff(surface_mask(gt), surface_mask(seg));
}

/// Mask dilated by one voxel in the 26-neighbourhood.
inline LabelVolume chebyshev_tube(const LabelVolume &mask)
{
  const auto &g = mask.geometry();
  LabelVolume out(g);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = 1;
    const Index3 p = g.index(i);
    for (const auto &o : neighbor_offsets(26)) {
      const Index3 q = p + o;
      if (g.contains(q)) out.at(q) = 1;
    }
  }
  return out;
}

/// CO = 2 |OV| / (|G| + |O|), where OV are the output-skeleton voxels inside
/// the one-voxel tube around the ground-truth skeleton G. Not clamped: an
/// output skeleton much longer than G, all inside the tube, exceeds 1.
inline double centerline_overlap(const LabelVolume &gt_skeleton, const LabelVolume &out_skeleton)
{
  require_same_geometry(gt_skeleton.geometry(), out_skeleton.geometry(), "centerline_overlap");
  const std::size_t ng = count_nonzero(gt_skeleton), no = count_nonzero(out_skeleton);
  if (ng + no == 0) throw DataError("centerline_overlap: both skeletons are empty");
  const LabelVolume tube = chebyshev_tube(gt_skeleton);
  std::size_t ov = 0;
  for (std::size_t i = 0; i < tube.size(); ++i)
    if (out_skeleton[i] && tube[i]) ++ov;
  return 2.0 * static_cast<double>(ov) / static_cast<double>(ng + no);
}

/// (|O inside tube(G)| + |G inside tube(O)|) / (|G| + |O|), always in [0, 1].
inline double centerline_overlap_symmetric(const LabelVolume &gt_skeleton, const LabelVolume &out_skeleton)
{
  require_same_geometry(gt_skeleton.geometry(), out_skeleton.geometry(), "centerline_overlap");
  const std::size_t ng = count_nonzero(gt_skeleton), no = count_nonzero(out_skeleton);
  if (ng + no == 0) throw DataError("centerline_overlap: both skeletons are empty");
  const LabelVolume tg = chebyshev_tube(gt_skeleton), to = chebyshev_tube(out_skeleton);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tg.size(); ++i) {
    if (out_skeleton[i] && tg[i]) ++hits;
    if (gt_skeleton[i] && to[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ng + no);
}

} // namespace renovor
