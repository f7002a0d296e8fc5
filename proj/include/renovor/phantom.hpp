#pragma once

// Synthetic kidney phantoms: an ellipsoidal kidney, a recursive tree of
// capsule-shaped vessels, an optional spherical tumour, and the exact
// ground truth for each.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "renovor/vesselness.hpp"
#include "renovor/vesseltree.hpp"
#include "renovor/volume.hpp"
#include "renovor/voronoi.hpp"

namespace renovor {

struct TreeSpec {
  int depth = 3;
  Vec3 start_mm{32, 32, 6};
  Vec3 direction{0, 0, 1};
  double root_radius_mm = 2.5;
  double radius_decay = 0.79;
  double min_angle_deg = 25; // half-angle between the two children
  double max_angle_deg = 35;
  double min_length_mm = 12;
  double max_length_mm = 14;
  double length_decay = 0.85;
};

struct Sphere {
  Vec3 center_mm{0, 0, 0};
  double radius_mm = 0;
};

struct PhantomSpec {
  VolumeGeometry geometry{{64, 64, 64}, {1, 1, 1}, {0, 0, 0}};
  Vec3 kidney_center_mm{32, 32, 36};
  Vec3 kidney_semi_axes_mm{20, 15, 13};
  TreeSpec tree;
  std::optional<Sphere> tumor;
  double background_hu = 0;
  double kidney_hu = 40;
  double vessel_hu = 140;
  double tumor_hu = 60;
  double noise_sigma = 25;
  double blur_sigma_mm = 0; // emulates a scanner PSF when > 0
  std::uint64_t seed = 0;

  void validate() const
  {
    geometry.validate();
    if (tree.depth < 1) throw std::invalid_argument("phantom: tree depth must be >= 1");
    if (!(tree.root_radius_mm > 0) || !(tree.radius_decay > 0))
      throw std::invalid_argument("phantom: vessel radii must be > 0");
    if (!(tree.min_length_mm > 0) || tree.max_length_mm < tree.min_length_mm)
      throw std::invalid_argument("phantom: invalid segment length range");
    if (tree.max_angle_deg < tree.min_angle_deg) throw std::invalid_argument("phantom: invalid angle range");
    for (double s : kidney_semi_axes_mm)
      if (!(s > 0)) throw std::invalid_argument("phantom: kidney semi-axes must be > 0");
    if (!(vessel_hu > background_hu)) throw std::invalid_argument("phantom: vessel HU must exceed background HU");
    if (!(noise_sigma >= 0) || !(blur_sigma_mm >= 0)) throw std::invalid_argument("phantom: sigma must be >= 0");
  }
};

struct Segment {
  Vec3 a, b;
  double radius_mm = 0;
  int parent = -1;
  int generation = 1;
};

struct Phantom {
  ScalarVolume ct;
  LabelVolume kidney;
  LabelVolume vessels;
  LabelVolume centerline;
  std::optional<LabelVolume> tumor;
  VesselTree tree; // with entry nodes
  BranchClustering clustering;
  VoronoiPartition partition;
  std::vector<Segment> segments;
};

namespace detail {

inline Vec3 normalized(Vec3 v)
{
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  for (double &x : v) x /= n;
  return v;
}

inline Vec3 cross(const Vec3 &a, const Vec3 &b)
{
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double point_segment_d2(const Vec3 &p, const Vec3 &a, const Vec3 &b)
{
  Vec3 ab, ap;
  for (int i = 0; i < 3; ++i) {
    ab[i] = b[i] - a[i];
    ap[i] = p[i] - a[i];
  }
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = len2 > 0 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  double d2 = 0;
  for (int i = 0; i < 3; ++i) {
    const double d = p[i] - (a[i] + t * ab[i]);
    d2 += d * d;
  }
  return d2;
}

inline void grow_segments(const TreeSpec &spec, std::mt19937_64 &rng, std::vector<Segment> &out, const Vec3 &start,
                          const Vec3 &dir, double radius, double length_scale, int generation, int parent)
{
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double len = length_scale * (spec.min_length_mm + unit(rng) * (spec.max_length_mm - spec.min_length_mm));
  Segment s;
  s.a = start;
  for (int i = 0; i < 3; ++i) s.b[i] = start[i] + len * dir[i];
  s.radius_mm = radius;
  s.parent = parent;
  s.generation = generation;
  const int id = static_cast<int>(out.size());
  out.push_back(s);
  if (generation >= spec.depth) return;

  const double angle =
      (spec.min_angle_deg + unit(rng) * (spec.max_angle_deg - spec.min_angle_deg)) * std::numbers::pi / 180.0;
  const double azimuth = unit(rng) * 2.0 * std::numbers::pi;
  const Vec3 helper = std::abs(dir[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 u = normalized(cross(dir, helper));
  const Vec3 w = cross(dir, u);
  Vec3 side;
  for (int i = 0; i < 3; ++i) side[i] = std::cos(azimuth) * u[i] + std::sin(azimuth) * w[i];
  for (int sign : {1, -1}) {
    Vec3 child;
    for (int i = 0; i < 3; ++i) child[i] = std::cos(angle) * dir[i] + sign * std::sin(angle) * side[i];
    grow_segments(spec, rng, out, s.b, normalized(child), radius * spec.radius_decay,
                  length_scale * spec.length_decay, generation + 1, id);
  }
}

/// 26-connected voxel path along a segment, without corner voxels whose
/// neighbours on the path already touch.
inline std::vector<Index3> rasterize_segment(const VolumeGeometry &g, const Vec3 &a, const Vec3 &b)
{
  const Vec3 ia = g.to_continuous_index(a), ib = g.to_continuous_index(b);
  double span = 0;
  for (int i = 0; i < 3; ++i) span = std::max(span, std::abs(ib[i] - ia[i]));
  const int steps = std::max(1, static_cast<int>(std::ceil(span * 4)));
  std::vector<Index3> path;
  for (int k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    Index3 p{static_cast<long>(std::lround(ia[0] + t * (ib[0] - ia[0]))),
             static_cast<long>(std::lround(ia[1] + t * (ib[1] - ia[1]))),
             static_cast<long>(std::lround(ia[2] + t * (ib[2] - ia[2])))};
    if (!g.contains(p)) continue;
    if (path.empty() || !(path.back() == p)) path.push_back(p);
  }
  const auto touch = [](const Index3 &p, const Index3 &q) {
    return std::abs(p.x - q.x) <= 1 && std::abs(p.y - q.y) <= 1 && std::abs(p.z - q.z) <= 1;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 1; i + 1 < path.size(); ++i)
      if (touch(path[i - 1], path[i + 1])) {
        path.erase(path.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
  }
  return path;
}

} // namespace detail

/// Segments of the analytic tree; depth d gives 2^d - 1 segments in
/// depth-first order.
inline std::vector<Segment> phantom_segments(const PhantomSpec &spec)
{
  std::mt19937_64 rng(spec.seed);
  std::vector<Segment> segs;
  detail::grow_segments(spec.tree, rng, segs, spec.tree.start_mm, detail::normalized(spec.tree.direction),
                        spec.tree.root_radius_mm, 1.0, 1, -1);
  return segs;
}

inline LabelVolume ellipsoid_mask(const VolumeGeometry &g, const Vec3 &center, const Vec3 &semi_axes)
{
  LabelVolume m(g);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Vec3 p = g.to_world(g.index(i));
    double s = 0;
    for (int a = 0; a < 3; ++a) {
      const double d = (p[a] - center[a]) / semi_axes[a];
      s += d * d;
    }
    m[i] = s <= 1.0 ? 1 : 0;
  }
  return m;
}

/// Union of capsules (segment plus radius), exact point-to-segment distances
/// at voxel centres.
inline LabelVolume rasterize_capsules(const VolumeGeometry &g, const std::vector<Segment> &segs)
{
  LabelVolume m(g);
  for (const auto &s : segs) {
    Index3 lo, hi;
    for (int a = 0; a < 3; ++a) {
      const double smin = std::min(s.a[a], s.b[a]) - s.radius_mm, smax = std::max(s.a[a], s.b[a]) + s.radius_mm;
      lo[a] = std::max(0L, static_cast<long>(std::floor((smin - g.origin[a]) / g.spacing[a])));
      hi[a] = std::min(g.dims[a] - 1, static_cast<long>(std::ceil((smax - g.origin[a]) / g.spacing[a])));
    }
    const double r2 = s.radius_mm * s.radius_mm;
    for (long z = lo.z; z <= hi.z; ++z)
      for (long y = lo.y; y <= hi.y; ++y)
        for (long x = lo.x; x <= hi.x; ++x)
          if (detail::point_segment_d2(g.to_world({x, y, z}), s.a, s.b) <= r2) m.at(x, y, z) = 1;
  }
  return m;
}

/// Rasterized centrelines of all segments.
inline LabelVolume rasterize_centerlines(const VolumeGeometry &g, const std::vector<Segment> &segs)
{
  LabelVolume m(g);
  for (const auto &s : segs)
    for (const auto &p : detail::rasterize_segment(g, s.a, s.b)) m.at(p) = 1;
  return m;
}

/// Solid straight tube of radius r between world points a and b.
inline ScalarVolume tube_phantom(const VolumeGeometry &g, const Vec3 &a, const Vec3 &b, double radius_mm,
                                 double inside_hu, double outside_hu)
{
  const LabelVolume m = rasterize_capsules(g, {Segment{a, b, radius_mm, -1, 1}});
  ScalarVolume v(g, static_cast<float>(outside_hu));
  for (std::size_t i = 0; i < v.size(); ++i)
    if (m[i]) v[i] = static_cast<float>(inside_hu);
  return v;
}

inline Phantom generate_phantom(const PhantomSpec &spec)
{
  spec.validate();
  const auto &g = spec.geometry;
  Phantom ph;
  ph.segments = phantom_segments(spec);
  ph.kidney = ellipsoid_mask(g, spec.kidney_center_mm, spec.kidney_semi_axes_mm);
  if (count_nonzero(ph.kidney) == 0) throw DataError("phantom: kidney lies outside the volume");
  ph.vessels = rasterize_capsules(g, ph.segments);
  ph.centerline = rasterize_centerlines(g, ph.segments);
  if (spec.tumor) {
    ph.tumor = LabelVolume(g);
    const Vec3 r{spec.tumor->radius_mm, spec.tumor->radius_mm, spec.tumor->radius_mm};
    if (spec.tumor->radius_mm > 0) *ph.tumor = ellipsoid_mask(g, spec.tumor->center_mm, r);
  }

  const VesselTree bare = build_tree(ph.centerline, ph.segments.front().a);
  const auto entries = detect_entries(bare, ph.kidney);
  if (entries.empty()) throw DataError("phantom: vessel tree does not reach the kidney");
  ph.tree = with_entries(bare, entries);
  ph.clustering = cluster_branches(ph.tree, 0);
  ph.partition = partition(ph.kidney, ph.tree, ph.clustering);

  ScalarVolume ct(g, static_cast<float>(spec.background_hu));
  for (std::size_t i = 0; i < ct.size(); ++i) {
    if (ph.kidney[i]) ct[i] = static_cast<float>(spec.kidney_hu);
    if (ph.tumor && (*ph.tumor)[i]) ct[i] = static_cast<float>(spec.tumor_hu);
    if (ph.vessels[i]) ct[i] = static_cast<float>(spec.vessel_hu);
  }
  if (spec.blur_sigma_mm > 0) ct = gaussian_smooth(ct, spec.blur_sigma_mm);
  if (spec.noise_sigma > 0) {
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto &v : ct.data()) v = static_cast<float>(v + noise(rng));
  }
  ph.ct = std::move(ct);
  return ph;
}

} // namespace renovor
