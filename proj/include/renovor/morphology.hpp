#pragma once

// Region-of-interest handling and binary morphology on label volumes.

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>

#include "renovor/parallel.hpp"
#include "renovor/volume.hpp"

namespace renovor {

struct Box {
  Index3 lo;
  Index3 hi; // inclusive

  friend bool operator==(const Box &, const Box &) = default;
  long extent(int axis) const { return hi[axis] - lo[axis] + 1; }
};

/// Tightest box around voxels equal to `label`, or around all non-zero
/// voxels when `label` is empty.
inline Box bounding_box(const LabelVolume &mask, std::optional<std::uint16_t> label = std::nullopt)
{
  const auto &g = mask.geometry();
  Box b{{g.dims[0], g.dims[1], g.dims[2]}, {-1, -1, -1}};
  bool found = false;
  for (long z = 0; z < g.dims[2]; ++z)
    for (long y = 0; y < g.dims[1]; ++y)
      for (long x = 0; x < g.dims[0]; ++x) {
        const auto v = mask.at(x, y, z);
        if (label ? v != *label : v == 0) continue;
        found = true;
        b.lo = {std::min(b.lo.x, x), std::min(b.lo.y, y), std::min(b.lo.z, z)};
        b.hi = {std::max(b.hi.x, x), std::max(b.hi.y, y), std::max(b.hi.z, z)};
      }
  if (!found) throw DataError("bounding_box: label not present in mask");
  return b;
}

/// Box grown by `margin` voxels on every side and clamped to the grid.
inline Box expand_box(const Box &box, long margin, const VolumeGeometry &g)
{
  Box out;
  for (int a = 0; a < 3; ++a) {
    out.lo[a] = std::max<long>(0, box.lo[a] - margin);
    out.hi[a] = std::min<long>(g.dims[a] - 1, box.hi[a] + margin);
    if (out.lo[a] > out.hi[a]) throw DataError("crop: box does not intersect the volume");
  }
  return out;
}

template <typename T>
Volume<T> crop(const Volume<T> &vol, const Box &box, long margin = 0)
{
  const auto &g = vol.geometry();
  const Box b = expand_box(box, margin, g);
  VolumeGeometry sub = g;
  sub.dims = {b.extent(0), b.extent(1), b.extent(2)};
  sub.origin = g.to_world(b.lo);
  Volume<T> out(sub);
  for (long z = 0; z < sub.dims[2]; ++z)
    for (long y = 0; y < sub.dims[1]; ++y)
      for (long x = 0; x < sub.dims[0]; ++x)
        out.at(x, y, z) = vol.at(x + b.lo.x, y + b.lo.y, z + b.lo.z);
  return out;
}

/// Voxel offset of `sub`'s origin inside `parent`.
inline Index3 placement_offset(const VolumeGeometry &sub, const VolumeGeometry &parent)
{
  Index3 o;
  for (int a = 0; a < 3; ++a) {
    const double f = (sub.origin[a] - parent.origin[a]) / parent.spacing[a];
    o[a] = std::lround(f);
    if (std::abs(f - static_cast<double>(o[a])) > 1e-6 ||
        std::abs(sub.spacing[a] - parent.spacing[a]) > 1e-9)
      throw DataError("sub-volume is not aligned with the parent grid");
  }
  return o;
}

/// Inverse of crop: embeds `sub` into a volume of `parent` geometry.
template <typename T>
Volume<T> paste(const Volume<T> &sub, const VolumeGeometry &parent, T fill = T{})
{
  const Index3 o = placement_offset(sub.geometry(), parent);
  Volume<T> out(parent, fill);
  const auto &d = sub.dims();
  for (long z = 0; z < d[2]; ++z)
    for (long y = 0; y < d[1]; ++y)
      for (long x = 0; x < d[0]; ++x) {
        const Index3 p{x + o.x, y + o.y, z + o.z};
        if (parent.contains(p)) out.at(p) = sub.at(x, y, z);
      }
  return out;
}

struct Component {
  std::size_t size = 0;
  std::size_t min_index = 0;
};

/// Labels the connected components of the non-zero voxels in scan order
/// (component i+1 has the i-th smallest minimum linear index).
inline std::vector<Component> label_components(const LabelVolume &mask, int connectivity,
                                               std::vector<std::uint32_t> &labels)
{
  const auto &g = mask.geometry();
  const auto &offs = neighbor_offsets(connectivity);
  labels.assign(mask.size(), 0);
  std::vector<Component> comps;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0 || labels[i] != 0) continue;
    const auto id = static_cast<std::uint32_t>(comps.size() + 1);
    Component c{0, i};
    labels[i] = id;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++c.size;
      const Index3 p = g.index(cur);
      for (const auto &o : offs) {
        const Index3 q = p + o;
        if (!g.contains(q)) continue;
        const std::size_t j = g.linear(q);
        if (mask[j] != 0 && labels[j] == 0) {
          labels[j] = id;
          stack.push_back(j);
        }
      }
    }
    comps.push_back(c);
  }
  return comps;
}

/// Keeps the k largest components, relabelled 1..k by decreasing size.
/// Equal sizes are ordered by smallest minimum linear index.
inline LabelVolume connected_components_top_k(const LabelVolume &mask, std::size_t k,
                                              int connectivity = 26)
{
  std::vector<std::uint32_t> labels;
  const auto comps = label_components(mask, connectivity, labels);
  std::vector<std::size_t> order(comps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (comps[a].size != comps[b].size) return comps[a].size > comps[b].size;
    return comps[a].min_index < comps[b].min_index;
  });
  std::vector<std::uint16_t> relabel(comps.size() + 1, 0);
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r)
    relabel[order[r] + 1] = static_cast<std::uint16_t>(r + 1);
  LabelVolume out(mask.geometry());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = relabel[labels[i]];
  return out;
}

namespace detail {

inline constexpr double kFarSquared = std::numeric_limits<double>::infinity();

/// Lower envelope of parabolas ((q - p) * h)^2 + f[p] sampled at every q.
/// Entries equal to kFarSquared are not sites.
inline void distance_pass_1d(const double *f, double *out, long n, std::ptrdiff_t stride, double h,
                             std::vector<long> &v, std::vector<double> &z)
{
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  const double h2 = h * h;
  long k = -1;
  for (long q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (fq == kFarSquared) continue;
    const auto qd = static_cast<double>(q);
    while (k >= 0) {
      const auto vk = static_cast<double>(v[k]);
      const double s = ((fq + h2 * qd * qd) - (f[v[k] * stride] + h2 * vk * vk)) / (2.0 * h2 * (qd - vk));
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
    }
  }
  if (k < 0) {
    for (long q = 0; q < n; ++q) out[q * stride] = kFarSquared;
    return;
  }
  long j = 0;
  for (long q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const double d = static_cast<double>(q - v[j]) * h;
    out[q * stride] = d * d + f[v[j] * stride];
  }
}

} // namespace detail

/// Exact squared Euclidean distance (mm^2) from every voxel to the nearest
/// non-zero voxel of `sites`; infinity when there are none. Separable
/// lower-envelope transform, one pass per axis.
inline std::vector<double> squared_distance_transform(const LabelVolume &sites)
{
  const auto &g = sites.geometry();
  const long nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::vector<double> a(sites.size()), b(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) a[i] = sites[i] ? 0.0 : detail::kFarSquared;

  const auto run_axis = [&](const std::vector<double> &src, std::vector<double> &dst, int axis) {
    const long n = g.dims[axis];
    const std::ptrdiff_t stride = axis == 0 ? 1 : (axis == 1 ? nx : nx * ny);
    const long lines = static_cast<long>(sites.size()) / n;
    parallel_for(0, static_cast<std::size_t>(lines), [&](std::size_t line) {
      thread_local std::vector<long> v;
      thread_local std::vector<double> z;
      const long l = static_cast<long>(line);
      std::size_t start = 0;
      if (axis == 0) start = static_cast<std::size_t>(l * nx);
      else if (axis == 1) start = static_cast<std::size_t>((l % nx) + (l / nx) * nx * ny);
      else start = static_cast<std::size_t>(l);
      detail::distance_pass_1d(src.data() + start, dst.data() + start, n, stride, g.spacing[axis], v, z);
    });
  };
  (void)nz;
  run_axis(a, b, 0);
  run_axis(b, a, 1);
  run_axis(a, b, 2);
  return b;
}

/// All voxels within Euclidean world distance `radius_mm` of the mask.
inline LabelVolume dilate_ball(const LabelVolume &mask, double radius_mm)
{
  if (radius_mm < 0.0) throw std::invalid_argument("dilate_ball: radius must be >= 0");
  if (radius_mm == 0.0) return binarize(mask);
  const auto d2 = squared_distance_transform(mask);
  // Relative slack keeps the ball independent of summation order.
  const double limit = radius_mm * radius_mm * (1.0 + 1e-12);
  LabelVolume out(mask.geometry());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = d2[i] <= limit ? 1 : 0;
  return out;
}

} // namespace renovor
