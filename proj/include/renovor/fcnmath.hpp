#pragma once

// Numerical pieces around a volumetric segmentation network: position
// channels, multi-class Dice loss, sliding-window inference and random
// rigid / B-spline augmentation.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "renovor/volume.hpp"

namespace renovor {

using Dims3 = std::array<long, 3>;

struct SubVolumeSpec {
  Dims3 size{64, 64, 64};
  Dims3 stride{32, 32, 32};
  Index3 origin{0, 0, 0};

  void validate(const Dims3 &parent) const
  {
    for (int a = 0; a < 3; ++a) {
      if (size[a] < 1 || stride[a] < 1) throw std::invalid_argument("sub-volume size and stride must be >= 1");
      if (origin[a] < 0 || origin[a] + size[a] > parent[a])
        throw std::invalid_argument("sub-volume lies outside the parent volume");
    }
  }
};

/// Dense multi-channel grid, x fastest within each channel.
struct ChannelVolume {
  Dims3 dims{0, 0, 0};
  std::vector<std::vector<double>> channels;

  double at(std::size_t c, long x, long y, long z) const
  {
    return channels[c][static_cast<std::size_t>((z * dims[1] + y) * dims[0] + x)];
  }
};

/// Trilinear resize with aligned corners: the first and last samples of each
/// axis map onto each other.
inline std::vector<double> resize_trilinear(const std::vector<double> &src, const Dims3 &in, const Dims3 &out)
{
  std::vector<double> dst(static_cast<std::size_t>(out[0] * out[1] * out[2]));
  const auto coord = [&](int a, long u, long &i0, double &t) {
    const double s = out[a] > 1 ? static_cast<double>(u) * static_cast<double>(in[a] - 1) / static_cast<double>(out[a] - 1) : 0.0;
    i0 = std::min(static_cast<long>(std::floor(s)), in[a] - 1);
    t = s - static_cast<double>(i0);
    if (i0 == in[a] - 1) t = 0.0;
  };
  const auto v = [&](long x, long y, long z) { return src[static_cast<std::size_t>((z * in[1] + y) * in[0] + x)]; };
  for (long z = 0; z < out[2]; ++z) {
    long z0;
    double tz;
    coord(2, z, z0, tz);
    const long z1 = std::min(z0 + 1, in[2] - 1);
    for (long y = 0; y < out[1]; ++y) {
      long y0;
      double ty;
      coord(1, y, y0, ty);
      const long y1 = std::min(y0 + 1, in[1] - 1);
      for (long x = 0; x < out[0]; ++x) {
        long x0;
        double tx;
        coord(0, x, x0, tx);
        const long x1 = std::min(x0 + 1, in[0] - 1);
        const double c00 = v(x0, y0, z0) * (1 - tx) + v(x1, y0, z0) * tx;
        const double c10 = v(x0, y1, z0) * (1 - tx) + v(x1, y1, z0) * tx;
        const double c01 = v(x0, y0, z1) * (1 - tx) + v(x1, y0, z1) * tx;
        const double c11 = v(x0, y1, z1) * (1 - tx) + v(x1, y1, z1) * tx;
        const double c0 = c00 * (1 - ty) + c10 * ty;
        const double c1 = c01 * (1 - ty) + c11 * ty;
        dst[static_cast<std::size_t>((z * out[1] + y) * out[0] + x)] = c0 * (1 - tz) + c1 * tz;
      }
    }
  }
  return dst;
}

/// Default position-map resolution: the sub-volume size after four 2x poolings.
inline Dims3 default_map_size(const SubVolumeSpec &spec)
{
  return {std::max(1L, spec.size[0] / 16), std::max(1L, spec.size[1] / 16), std::max(1L, spec.size[2] / 16)};
}

/// Three channels holding each sub-volume voxel's global coordinate divided
/// by the parent extent (W, H, D), resized to `map_size`.
inline ChannelVolume spatial_feature_map(const Dims3 &parent, const SubVolumeSpec &spec, const Dims3 &map_size)
{
  spec.validate(parent);
  for (long m : map_size)
    if (m < 1) throw std::invalid_argument("feature map size must be >= 1");
  ChannelVolume raw;
  raw.dims = spec.size;
  const std::size_t n = static_cast<std::size_t>(spec.size[0] * spec.size[1] * spec.size[2]);
  raw.channels.assign(3, std::vector<double>(n));
  for (long z = 0; z < spec.size[2]; ++z)
    for (long y = 0; y < spec.size[1]; ++y)
      for (long x = 0; x < spec.size[0]; ++x) {
        const std::size_t i = static_cast<std::size_t>((z * spec.size[1] + y) * spec.size[0] + x);
        const long idx[3] = {x, y, z};
        for (int c = 0; c < 3; ++c)
          raw.channels[c][i] = static_cast<double>(spec.origin[c] + idx[c]) / static_cast<double>(parent[c]);
      }
  if (map_size == spec.size) return raw;
  ChannelVolume out;
  out.dims = map_size;
  for (int c = 0; c < 3; ++c) out.channels.push_back(resize_trilinear(raw.channels[c], spec.size, map_size));
  return out;
}

inline ChannelVolume spatial_feature_map(const Dims3 &parent, const SubVolumeSpec &spec)
{
  return spatial_feature_map(parent, spec, default_map_size(spec));
}

struct DiceLoss {
  double value = 0;
  std::vector<double> gradient; // same layout as the prediction
};

inline constexpr double kDiceSmoothing = 1e-7;

/// D = -(1/K) sum_k 2 sum_i p_ik g_ik / (sum_i p_ik^2 + sum_i g_ik^2 + eps).
/// pred and gt hold K values per voxel (index i * K + k).
inline DiceLoss dice_loss(const std::vector<double> &pred, const std::vector<double> &gt, std::size_t k)
{
  if (k == 0) throw std::invalid_argument("dice_loss: K must be >= 1");
  if (pred.size() != gt.size() || pred.size() % k != 0)
    throw std::invalid_argument("dice_loss: prediction and ground truth shapes differ");
  for (double p : pred)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("dice_loss: probabilities must lie in [0, 1]");
  const std::size_t n = pred.size() / k;
  std::vector<double> num(k, 0), den(k, kDiceSmoothing);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      const double p = pred[i * k + c], g = gt[i * k + c];
      num[c] += 2.0 * p * g;
      den[c] += p * p + g * g;
    }
  DiceLoss out;
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t c = 0; c < k; ++c) out.value -= inv_k * num[c] / den[c];
  out.gradient.resize(pred.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      const double p = pred[i * k + c], g = gt[i * k + c];
      out.gradient[i * k + c] = -inv_k * (2.0 * g * den[c] - num[c] * 2.0 * p) / (den[c] * den[c]);
    }
  return out;
}

/// Window origins along each axis at multiples of the stride, plus a final
/// window flush with the far boundary when the stride leaves a gap. A stride
/// longer than the window is capped at the window size so coverage stays full.
inline std::vector<Index3> sliding_window_positions(const Dims3 &parent, const SubVolumeSpec &spec)
{
  std::array<std::vector<long>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    if (spec.stride[a] < 1 || spec.size[a] < 1) throw std::invalid_argument("window size and stride must be >= 1");
    if (spec.size[a] > parent[a]) throw std::invalid_argument("window larger than the volume");
    long p = 0;
    const long step = std::min(spec.stride[a], spec.size[a]);
    for (; p + spec.size[a] <= parent[a]; p += step) axis[a].push_back(p);
    if (axis[a].back() + spec.size[a] < parent[a]) axis[a].push_back(parent[a] - spec.size[a]);
  }
  std::vector<Index3> out;
  for (long z : axis[2])
    for (long y : axis[1])
      for (long x : axis[0]) out.push_back({x, y, z});
  return out;
}

struct PredictionWindow {
  Index3 origin;
  Dims3 dims{0, 0, 0};
  std::vector<double> values; // x fastest
};

/// Per-voxel mean over the windows covering it. Windows are summed in a
/// canonical order, so the result does not depend on the list order.
inline Volume<double> fuse_predictions(const VolumeGeometry &parent, std::vector<PredictionWindow> windows)
{
  for (const auto &w : windows) {
    if (static_cast<long>(w.values.size()) != w.dims[0] * w.dims[1] * w.dims[2])
      throw std::invalid_argument("fuse_predictions: window size does not match its data");
    for (int a = 0; a < 3; ++a)
      if (w.origin[a] < 0 || w.dims[a] < 0 || w.origin[a] + w.dims[a] > parent.dims[a])
        throw std::invalid_argument("fuse_predictions: window outside the volume");
  }
  std::sort(windows.begin(), windows.end(), [](const PredictionWindow &a, const PredictionWindow &b) {
    const auto ka = std::tie(a.origin.z, a.origin.y, a.origin.x, a.dims, a.values);
    const auto kb = std::tie(b.origin.z, b.origin.y, b.origin.x, b.dims, b.values);
    return ka < kb;
  });
  Volume<double> sum(parent, 0.0);
  std::vector<unsigned> count(parent.voxel_count(), 0);
  for (const auto &w : windows)
    for (long z = 0; z < w.dims[2]; ++z)
      for (long y = 0; y < w.dims[1]; ++y)
        for (long x = 0; x < w.dims[0]; ++x) {
          const std::size_t j = parent.linear({w.origin.x + x, w.origin.y + y, w.origin.z + z});
          sum[j] += w.values[static_cast<std::size_t>((z * w.dims[1] + y) * w.dims[0] + x)];
          ++count[j];
        }
  for (std::size_t j = 0; j < sum.size(); ++j) {
    if (count[j] == 0) throw DataError("fuse_predictions: voxel not covered by any window");
    sum[j] /= static_cast<double>(count[j]);
  }
  return sum;
}

struct AugmentationParams {
  Vec3 translation_range{10, 10, 10}; // +- voxels per axis
  double rotation_range_deg = 15;     // +- degrees
  bool rotate_all_axes = false;       // default: rotation about z only
  std::array<int, 3> control_points{3, 3, 3};
  double max_displacement = 3; // voxels, length of any displacement vector

  void validate() const
  {
    for (double t : translation_range)
      if (!(t >= 0)) throw std::invalid_argument("translation range must be >= 0");
    if (!(rotation_range_deg >= 0)) throw std::invalid_argument("rotation range must be >= 0");
    for (int c : control_points)
      if (c < 2) throw std::invalid_argument("B-spline lattice needs >= 2 control points per axis");
    if (!(max_displacement >= 0)) throw std::invalid_argument("max displacement must be >= 0");
  }
};

struct RigidTransform {
  Vec3 rotation_deg{0, 0, 0}; // about x, y, z; applied x first
  Vec3 translation{0, 0, 0};  // voxels
};

inline RigidTransform draw_rigid(const AugmentationParams &p, std::mt19937_64 &rng)
{
  p.validate();
  RigidTransform t;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int a = 0; a < 3; ++a) {
    const double r = unit(rng);
    if (p.rotate_all_axes || a == 2) t.rotation_deg[a] = r * p.rotation_range_deg;
  }
  for (int a = 0; a < 3; ++a) t.translation[a] = unit(rng) * p.translation_range[a];
  return t;
}

namespace detail {

using Mat3d = std::array<std::array<double, 3>, 3>;

inline Mat3d rotation_matrix(const Vec3 &deg)
{
  const auto rad = [](double d) { return d * std::numbers::pi / 180.0; };
  const double cx = std::cos(rad(deg[0])), sx = std::sin(rad(deg[0]));
  const double cy = std::cos(rad(deg[1])), sy = std::sin(rad(deg[1]));
  const double cz = std::cos(rad(deg[2])), sz = std::sin(rad(deg[2]));
  const Mat3d rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3d ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3d rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  const auto mul = [](const Mat3d &a, const Mat3d &b) {
    Mat3d c{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
  };
  return mul(rz, mul(ry, rx));
}

/// Samples vol at a continuous index. Floating-point volumes interpolate
/// trilinearly, integer (label) volumes take the nearest voxel; positions
/// outside the grid give `fill`.
template <typename T>
T sample(const Volume<T> &vol, Vec3 p, T fill)
{
  const auto &d = vol.dims();
  for (int a = 0; a < 3; ++a) {
    const double r = std::round(p[a]);
    if (std::abs(p[a] - r) < 1e-9) p[a] = r;
  }
  if constexpr (std::is_floating_point_v<T>) {
    long i0[3];
    double t[3];
    for (int a = 0; a < 3; ++a) {
      if (p[a] < 0.0 || p[a] > static_cast<double>(d[a] - 1)) return fill;
      i0[a] = std::min(static_cast<long>(std::floor(p[a])), d[a] - 1);
      t[a] = p[a] - static_cast<double>(i0[a]);
    }
    double acc = 0;
    for (int c = 0; c < 8; ++c) {
      double w = 1;
      long q[3];
      for (int a = 0; a < 3; ++a) {
        const bool hi = (c >> a) & 1;
        w *= hi ? t[a] : 1.0 - t[a];
        q[a] = std::min(i0[a] + (hi ? 1 : 0), d[a] - 1);
      }
      if (w != 0.0) acc += w * static_cast<double>(vol.at(q[0], q[1], q[2]));
    }
    return static_cast<T>(acc);
  } else {
    long q[3];
    for (int a = 0; a < 3; ++a) {
      q[a] = static_cast<long>(std::floor(p[a] + 0.5));
      if (q[a] < 0 || q[a] >= d[a]) return fill;
    }
    return vol.at(q[0], q[1], q[2]);
  }
}

template <typename T>
T fill_value(const Volume<T> &vol)
{
  if constexpr (std::is_floating_point_v<T>) {
    return vol.size() ? *std::min_element(vol.data().begin(), vol.data().end()) : T{};
  } else {
    return T{};
  }
}

} // namespace detail

/// Rotation about the volume centre (in world units, so anisotropic voxels
/// stay undistorted) followed by a translation in voxels. Out-of-field voxels
/// take the volume minimum; labels use nearest-neighbour sampling.
template <typename T>
Volume<T> apply_rigid(const Volume<T> &vol, const RigidTransform &tf)
{
  const auto &g = vol.geometry();
  const auto r = detail::rotation_matrix(tf.rotation_deg);
  const T fill = detail::fill_value(vol);
  Vec3 centre;
  for (int a = 0; a < 3; ++a) centre[a] = 0.5 * static_cast<double>(g.dims[a] - 1);
  Volume<T> out(g);
  for (long z = 0; z < g.dims[2]; ++z)
    for (long y = 0; y < g.dims[1]; ++y)
      for (long x = 0; x < g.dims[0]; ++x) {
        const double idx[3] = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        Vec3 mm;
        for (int a = 0; a < 3; ++a) mm[a] = (idx[a] - tf.translation[a] - centre[a]) * g.spacing[a];
        Vec3 src;
        for (int a = 0; a < 3; ++a) {
          double s = 0;
          for (int b = 0; b < 3; ++b) s += r[b][a] * mm[b]; // inverse rotation = transpose
          src[a] = s / g.spacing[a] + centre[a];
        }
        out.at(x, y, z) = detail::sample(vol, src, fill);
      }
  return out;
}

template <typename T>
std::pair<Volume<T>, RigidTransform> augment_rigid(const Volume<T> &vol, const AugmentationParams &params,
                                                   std::mt19937_64 &rng)
{
  const RigidTransform tf = draw_rigid(params, rng);
  return {apply_rigid(vol, tf), tf};
}

struct DisplacementField {
  Dims3 dims{0, 0, 0};
  std::vector<Vec3> d; // voxels, x fastest

  double max_abs_component() const
  {
    double m = 0;
    for (const auto &v : d)
      for (double c : v) m = std::max(m, std::abs(c));
    return m;
  }

  double max_length() const
  {
    double m = 0;
    for (const auto &v : d) m = std::max(m, std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
    return m;
  }
};

struct ControlLattice {
  std::array<int, 3> n{3, 3, 3};
  std::vector<Vec3> d; // x fastest
};

inline ControlLattice draw_control_lattice(const AugmentationParams &p, std::mt19937_64 &rng)
{
  p.validate();
  ControlLattice c;
  c.n = p.control_points;
  // Uniform in the ball by rejection, so dense vectors (convex
  // combinations) keep Euclidean length <= max_displacement as well.
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  c.d.resize(static_cast<std::size_t>(c.n[0] * c.n[1] * c.n[2]));
  for (auto &v : c.d) {
    do {
      for (double &x : v) x = unit(rng);
    } while (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] > 1.0);
    for (double &x : v) x *= p.max_displacement;
  }
  return c;
}

namespace detail {

/// Uniform cubic B-spline weights for the four control points around t in [0, 1).
inline std::array<double, 4> bspline_weights(double t)
{
  const double u = 1.0 - t;
  return {u * u * u / 6.0, (3 * t * t * t - 6 * t * t + 4) / 6.0, (-3 * t * t * t + 3 * t * t + 3 * t + 1) / 6.0,
          t * t * t / 6.0};
}

} // namespace detail

/// Dense displacement from a control lattice spread evenly over the volume.
/// Control indices past the lattice edge clamp to the edge, so every dense
/// vector is a convex combination of control vectors.
inline DisplacementField bspline_field(const Dims3 &dims, const ControlLattice &c)
{
  DisplacementField f;
  f.dims = dims;
  f.d.assign(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), Vec3{0, 0, 0});
  std::array<std::vector<std::pair<std::array<int, 4>, std::array<double, 4>>>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    for (long i = 0; i < dims[a]; ++i) {
      const double u =
          dims[a] > 1 ? static_cast<double>(i) * (c.n[a] - 1) / static_cast<double>(dims[a] - 1) : 0.0;
      int base = std::min(static_cast<int>(std::floor(u)), c.n[a] - 1);
      const double t = u - base;
      std::array<int, 4> idx;
      for (int k = 0; k < 4; ++k) idx[k] = std::clamp(base - 1 + k, 0, c.n[a] - 1);
      axis[a].push_back({idx, detail::bspline_weights(t)});
    }
  }
  for (long z = 0; z < dims[2]; ++z)
    for (long y = 0; y < dims[1]; ++y)
      for (long x = 0; x < dims[0]; ++x) {
        const auto &[iz, wz] = axis[2][z];
        const auto &[iy, wy] = axis[1][y];
        const auto &[ix, wx] = axis[0][x];
        Vec3 v{0, 0, 0};
        for (int kz = 0; kz < 4; ++kz)
          for (int ky = 0; ky < 4; ++ky)
            for (int kx = 0; kx < 4; ++kx) {
              const double w = wz[kz] * wy[ky] * wx[kx];
              const auto &cp = c.d[static_cast<std::size_t>((iz[kz] * c.n[1] + iy[ky]) * c.n[0] + ix[kx])];
              for (int a = 0; a < 3; ++a) v[a] += w * cp[a];
            }
        f.d[static_cast<std::size_t>((z * dims[1] + y) * dims[0] + x)] = v;
      }
  return f;
}

template <typename T>
Volume<T> apply_displacement(const Volume<T> &vol, const DisplacementField &f)
{
  const auto &g = vol.geometry();
  if (f.dims != g.dims) throw std::invalid_argument("displacement field does not match the volume");
  const T fill = detail::fill_value(vol);
  Volume<T> out(g);
  for (long z = 0; z < g.dims[2]; ++z)
    for (long y = 0; y < g.dims[1]; ++y)
      for (long x = 0; x < g.dims[0]; ++x) {
        const auto &d = f.d[static_cast<std::size_t>((z * g.dims[1] + y) * g.dims[0] + x)];
        out.at(x, y, z) = detail::sample(vol, {x + d[0], y + d[1], z + d[2]}, fill);
      }
  return out;
}

template <typename T>
std::pair<Volume<T>, DisplacementField> augment_bspline(const Volume<T> &vol, const AugmentationParams &params,
                                                        std::mt19937_64 &rng)
{
  auto field = bspline_field(vol.dims(), draw_control_lattice(params, rng));
  auto out = apply_displacement(vol, field);
  return {std::move(out), std::move(field)};
}

/// Rigid transform followed by an elastic one.
template <typename T>
Volume<T> augment_hybrid(const Volume<T> &vol, const AugmentationParams &params, std::mt19937_64 &rng)
{
  auto rigid = augment_rigid(vol, params, rng).first;
  return augment_bspline(rigid, params, rng).first;
}

} // namespace renovor
