#pragma once

// The kidney-to-territories workflow as in-memory stages. The CLI wraps
// each stage in a subcommand and `pipeline` chains them, so both paths run
// the same code on the same inputs.

#include <filesystem>
#include <optional>

#include "renovor/metrics.hpp"
#include "renovor/morphology.hpp"
#include "renovor/skeleton.hpp"
#include "renovor/tensorcut.hpp"
#include "renovor/vesselness.hpp"
#include "renovor/vesseltree.hpp"
#include "renovor/voronoi.hpp"

namespace renovor {

struct PipelineConfig {
  std::filesystem::path ct;
  std::filesystem::path kidney;
  std::optional<std::filesystem::path> tumor;
  std::filesystem::path out_dir = ".";

  VesselnessParams vesselness;
  MrfEnergyParams energy;
  SeedPolicy seeds;
  TensorCutOptions cut;
  long voi_margin_vox = 10;
  TreeOptions tree{3.0};
  std::optional<Vec3> root_hint; // world mm; see default_root_hint
  int level_offset = 0;
  double margin_mm = 5.0;
  std::uint64_t seed = 0;

  void validate() const
  {
    vesselness.validate();
    energy.validate();
    if (voi_margin_vox < 0) throw std::invalid_argument("voi margin must be >= 0");
    if (!(margin_mm >= 0)) throw std::invalid_argument("tumour margin must be >= 0");
    if (tree.prune_spur_mm < 0) throw std::invalid_argument("spur length must be >= 0");
    if (seeds.foreground_vesselness_percentile < 0 || seeds.foreground_vesselness_percentile > 100 ||
        seeds.background_intensity_percentile < 0 || seeds.background_intensity_percentile > 100)
      throw std::invalid_argument("seed percentiles must lie in [0, 100]");
    if (seeds.exclusion_mm < 0) throw std::invalid_argument("seed exclusion must be >= 0");
    if (cut.foreground_components < 1 || cut.background_components < 1)
      throw std::invalid_argument("mixtures need at least one component");
  }
};

/// Kidney bounding box grown by the VOI margin.
inline Box kidney_voi(const LabelVolume &kidney, long margin_vox)
{
  if (count_nonzero(kidney) == 0) throw DataError("kidney mask is empty");
  return expand_box(bounding_box(kidney), margin_vox, kidney.geometry());
}

/// Multiscale vesselness inside the kidney VOI, zero elsewhere.
inline ScalarVolume stage_vesselness(const ScalarVolume &ct, const LabelVolume &kidney, const PipelineConfig &cfg)
{
  require_same_geometry(ct.geometry(), kidney.geometry(), "vesselness");
  const Box voi = kidney_voi(kidney, cfg.voi_margin_vox);
  const auto v = multiscale_vesselness(crop(ct, voi), cfg.vesselness);
  return paste(v.response, ct.geometry());
}

/// Tensor-cut vessel mask inside the kidney VOI, background elsewhere.
inline LabelVolume stage_tensorcut(const ScalarVolume &ct, const LabelVolume &kidney, const PipelineConfig &cfg)
{
  require_same_geometry(ct.geometry(), kidney.geometry(), "tensorcut");
  const Box voi = kidney_voi(kidney, cfg.voi_margin_vox);
  const ScalarVolume sub = crop(ct, voi);
  const auto v = multiscale_vesselness(sub, cfg.vesselness);
  const SeedLabels seeds = make_seeds(sub, v.response, cfg.seeds);
  if (seeds.foreground.empty() || seeds.background.empty())
    throw DataError("tensorcut: seed policy produced an empty seed set");
  const bool tensors = cfg.energy.omega > 0;
  const TensorField spd = tensors ? spd_field(v.hessian) : TensorField(sub.geometry());
  TensorCutOptions opt = cfg.cut;
  opt.seed = cfg.seed;
  const auto r = tensor_cut_segment(sub, spd, seeds, cfg.energy, opt);
  return paste(r.labels, ct.geometry());
}

/// Skeleton endpoint farthest from the kidney centroid (ties to the lower
/// linear index); the trunk usually enters from outside the kidney.
inline Vec3 default_root_hint(const LabelVolume &skeleton, const LabelVolume &kidney)
{
  const auto &g = skeleton.geometry();
  Vec3 c{0, 0, 0};
  std::size_t n = 0;
  for (std::size_t i = 0; i < kidney.size(); ++i)
    if (kidney[i]) {
      const Vec3 w = g.to_world(g.index(i));
      for (int a = 0; a < 3; ++a) c[a] += w[a];
      ++n;
    }
  if (n == 0) throw DataError("kidney mask is empty");
  for (auto &x : c) x /= static_cast<double>(n);

  double best = -1;
  bool best_end = false;
  Vec3 out = c;
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    if (!skeleton[i]) continue;
    const Index3 p = g.index(i);
    const bool end = skeleton_degree(skeleton, p) <= 1;
    const Vec3 w = g.to_world(p);
    const double d = (w[0] - c[0]) * (w[0] - c[0]) + (w[1] - c[1]) * (w[1] - c[1]) + (w[2] - c[2]) * (w[2] - c[2]);
    if ((end && !best_end) || (end == best_end && d > best)) {
      best = d;
      best_end = end;
      out = w;
    }
  }
  if (best < 0) throw DataError("tree: empty skeleton");
  return out;
}

struct TreeStage {
  LabelVolume centerline;
  VesselTree tree; // with entry nodes
  std::size_t entry_count = 0;
};

inline TreeStage stage_tree(const LabelVolume &vessels, const LabelVolume &kidney, const PipelineConfig &cfg)
{
  require_same_geometry(vessels.geometry(), kidney.geometry(), "tree");
  if (count_nonzero(vessels) == 0) throw DataError("tree: vessel mask is empty");
  TreeStage s;
  const LabelVolume skel = skeletonize(binarize(vessels));
  const LabelVolume main = binarize(connected_components_top_k(skel, 1, 26));
  const Vec3 hint = cfg.root_hint ? *cfg.root_hint : default_root_hint(main, kidney);
  const VesselTree bare = build_tree(main, hint, cfg.tree);
  const auto entries = detect_entries(bare, kidney);
  s.entry_count = entries.size();
  s.tree = entries.empty() ? bare : with_entries(bare, entries);
  s.centerline = tree_mask(s.tree);
  return s;
}

struct VoronoiStage {
  BranchClustering clustering;
  VoronoiPartition partition;
  std::vector<RegionStats> stats;
};

inline VoronoiStage stage_voronoi(const LabelVolume &kidney, const VesselTree &tree, const LabelVolume *tumor,
                                  const PipelineConfig &cfg)
{
  if (tumor) require_same_geometry(kidney.geometry(), tumor->geometry(), "voronoi");
  VoronoiStage s;
  s.clustering = cluster_branches(tree, cfg.level_offset);
  s.partition = partition(binarize(kidney), tree, s.clustering);
  s.stats = region_stats(s.partition, tumor, cfg.margin_mm);
  return s;
}

struct MetricsReport {
  double dsc = 0;
  double se = 0;
  double hd_mm = 0;
  double co = 0;
};

/// DSC and Se on the masks as given; HD on the top-2 components of each
/// mask when `paper_protocol` is set; CO on the given centrelines or, when
/// absent, on skeletons of the masks.
inline MetricsReport evaluate(const LabelVolume &gt, const LabelVolume &seg, const LabelVolume *gt_centerline,
                              const LabelVolume *seg_centerline, bool paper_protocol)
{
  require_same_geometry(gt.geometry(), seg.geometry(), "metrics");
  const LabelVolume a = binarize(gt), b = binarize(seg);
  MetricsReport m;
  m.dsc = dice(a, b);
  m.se = sensitivity(a, b);
  if (paper_protocol)
    m.hd_mm = surface_hausdorff(binarize(connected_components_top_k(a, 2, 26)),
                                binarize(connected_components_top_k(b, 2, 26)));
  else
    m.hd_mm = surface_hausdorff(a, b);
  const LabelVolume ga = gt_centerline ? binarize(*gt_centerline) : skeletonize(a);
  const LabelVolume sb = seg_centerline ? binarize(*seg_centerline) : skeletonize(b);
  m.co = centerline_overlap(ga, sb);
  return m;
}

} // namespace renovor
