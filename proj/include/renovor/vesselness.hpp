#pragma once

// Scale-space Hessians and Sato's line measure for bright tubular structure.

#include <vector>

#include "renovor/parallel.hpp"
#include "renovor/sym3.hpp"
#include "renovor/volume.hpp"

namespace renovor {

/// Per-voxel symmetric tensor, stored as (xx, xy, xz, yy, yz, zz). Doubles,
/// because SPD-mapped tensors span ten decades of eigenvalue and float
/// rounding would push the smallest below zero.
class TensorField {
public:
  TensorField() = default;
  explicit TensorField(const VolumeGeometry &g) : geometry_(g), data_(6 * g.voxel_count(), 0.0)
  {
    geometry_.validate();
  }

  const VolumeGeometry &geometry() const { return geometry_; }
  std::size_t size() const { return data_.size() / 6; }

  Sym3 get(std::size_t i) const
  {
    const double *p = data_.data() + 6 * i;
    return {p[0], p[1], p[2], p[3], p[4], p[5]};
  }

  void set(std::size_t i, const Sym3 &s)
  {
    double *p = data_.data() + 6 * i;
    p[0] = s.xx;
    p[1] = s.xy;
    p[2] = s.xz;
    p[3] = s.yy;
    p[4] = s.yz;
    p[5] = s.zz;
  }

  const std::vector<double> &data() const { return data_; }

private:
  VolumeGeometry geometry_;
  std::vector<double> data_;
};

struct VesselnessParams {
  double gamma12 = 1.0;
  double gamma23 = 1.0;
  std::vector<double> scales_mm{0.5, 1.0, 1.5, 2.0};

  void validate() const
  {
    if (gamma12 < 0 || gamma23 < 0) throw std::invalid_argument("vesselness exponents must be >= 0");
    if (scales_mm.empty()) throw std::invalid_argument("vesselness needs at least one scale");
    for (double s : scales_mm)
      if (!(s > 0)) throw std::invalid_argument("vesselness scales must be positive");
  }
};

/// Sampled Gaussian with support ceil(4 sigma / spacing) voxels, unit sum.
inline std::vector<double> gaussian_kernel(double sigma_mm, double spacing_mm)
{
  const long radius = static_cast<long>(std::ceil(4.0 * sigma_mm / spacing_mm));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (long i = -radius; i <= radius; ++i) {
    const double x = static_cast<double>(i) * spacing_mm;
    const double w = std::exp(-x * x / (2.0 * sigma_mm * sigma_mm));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double &w : k) w /= sum;
  return k;
}

namespace detail {

inline void convolve_axis(const std::vector<double> &src, std::vector<double> &dst,
                          const VolumeGeometry &g, int axis, const std::vector<double> &kernel)
{
  const long nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  const long radius = static_cast<long>(kernel.size() / 2);
  const long n = g.dims[axis];
  parallel_for(0, src.size(), [&](std::size_t i) {
    const auto l = static_cast<long>(i);
    const long x = l % nx, y = (l / nx) % ny, z = l / (nx * ny);
    const long pos = axis == 0 ? x : (axis == 1 ? y : z);
    const long stride = axis == 0 ? 1 : (axis == 1 ? nx : nx * ny);
    const long base = l - pos * stride;
    double acc = 0;
    for (long k = -radius; k <= radius; ++k) {
      long p = pos + k;
      p = p < 0 ? 0 : (p >= n ? n - 1 : p);
      acc += kernel[static_cast<std::size_t>(k + radius)] * src[static_cast<std::size_t>(base + p * stride)];
    }
    dst[i] = acc;
  });
  (void)nz;
}

inline std::vector<double> smooth_to_double(const ScalarVolume &vol, double sigma_mm)
{
  std::vector<double> a(vol.data().begin(), vol.data().end());
  if (sigma_mm <= 0) return a;
  std::vector<double> b(a.size());
  const auto &g = vol.geometry();
  for (int axis = 0; axis < 3; ++axis) {
    const auto kernel = gaussian_kernel(sigma_mm, g.spacing[axis]);
    if (kernel.size() == 1) continue;
    convolve_axis(a, b, g, axis, kernel);
    a.swap(b);
  }
  return a;
}

} // namespace detail

/// Separable Gaussian smoothing with clamp-to-edge boundaries. sigma = 0 is
/// the identity.
inline ScalarVolume gaussian_smooth(const ScalarVolume &vol, double sigma_mm)
{
  if (sigma_mm < 0) throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
  if (sigma_mm == 0) return vol;
  const auto s = detail::smooth_to_double(vol, sigma_mm);
  ScalarVolume out(vol.geometry());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<float>(s[i]);
  return out;
}

/// Hessian of the sigma-smoothed volume by central differences in world
/// units; stencils clamp at the boundary.
inline TensorField hessian_field(const ScalarVolume &vol, double sigma_mm)
{
  const auto &g = vol.geometry();
  if (g.dims[0] < 3 || g.dims[1] < 3 || g.dims[2] < 3)
    throw std::invalid_argument("hessian_field: every axis needs at least 3 voxels");
  const auto s = detail::smooth_to_double(vol, sigma_mm);
  const long nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  const auto at = [&](long x, long y, long z) {
    x = x < 0 ? 0 : (x >= nx ? nx - 1 : x);
    y = y < 0 ? 0 : (y >= ny ? ny - 1 : y);
    z = z < 0 ? 0 : (z >= nz ? nz - 1 : z);
    return s[static_cast<std::size_t>(x + nx * (y + ny * z))];
  };
  const double hx = g.spacing[0], hy = g.spacing[1], hz = g.spacing[2];
  TensorField field(g);
  parallel_for(0, g.voxel_count(), [&](std::size_t i) {
    const Index3 p = g.index(i);
    const long x = p.x, y = p.y, z = p.z;
    const double c2 = 2.0 * at(x, y, z);
    Sym3 h;
    h.xx = (at(x + 1, y, z) - c2 + at(x - 1, y, z)) / (hx * hx);
    h.yy = (at(x, y + 1, z) - c2 + at(x, y - 1, z)) / (hy * hy);
    h.zz = (at(x, y, z + 1) - c2 + at(x, y, z - 1)) / (hz * hz);
    h.xy = (at(x + 1, y + 1, z) - at(x + 1, y - 1, z) - at(x - 1, y + 1, z) + at(x - 1, y - 1, z)) /
           (4.0 * hx * hy);
    h.xz = (at(x + 1, y, z + 1) - at(x + 1, y, z - 1) - at(x - 1, y, z + 1) + at(x - 1, y, z - 1)) /
           (4.0 * hx * hz);
    h.yz = (at(x, y + 1, z + 1) - at(x, y + 1, z - 1) - at(x, y - 1, z + 1) + at(x, y - 1, z - 1)) /
           (4.0 * hy * hz);
    field.set(i, h);
  });
  return field;
}

/// Sato's measure for eigenvalues l1 >= l2 >= l3. Ties in the ordering
/// count as satisfied so an ideal cylinder (l2 == l3) still responds.
inline double sato_response(const std::array<double, 3> &l, double gamma12, double gamma23)
{
  const double l1 = l[0], l2 = l[1], l3 = l[2];
  constexpr double eps = 1e-12;
  if (!(l1 <= 0.0 && l2 < 0.0 && l3 <= l2 + eps && l2 <= l1 + eps)) return 0.0;
  const double ratio23 = std::min(1.0, l2 / l3);
  const double r = std::abs(l3) * std::pow(ratio23, gamma23) * std::pow(1.0 + l1 / std::abs(l2), gamma12);
  return r > 0 ? r : 0.0;
}

inline ScalarVolume sato_vesselness(const TensorField &field, const VesselnessParams &params,
                                    double scale_weight = 1.0)
{
  params.validate();
  ScalarVolume out(field.geometry());
  parallel_for(0, field.size(), [&](std::size_t i) {
    const auto e = eigen_symmetric3(scale_weight * field.get(i));
    out[i] = static_cast<float>(sato_response(e.values, params.gamma12, params.gamma23));
  });
  return out;
}

struct MultiscaleVesselness {
  ScalarVolume response;     // voxelwise max over scales of sigma^2-normalised responses
  std::vector<std::uint8_t> best_scale; // index into params.scales_mm
  TensorField hessian;       // raw (un-normalised) Hessian at the best scale
};

inline MultiscaleVesselness multiscale_vesselness(const ScalarVolume &vol, const VesselnessParams &params)
{
  params.validate();
  MultiscaleVesselness r{ScalarVolume(vol.geometry()), std::vector<std::uint8_t>(vol.size(), 0),
                         TensorField(vol.geometry())};
  for (std::size_t s = 0; s < params.scales_mm.size(); ++s) {
    const double sigma = params.scales_mm[s];
    const TensorField h = hessian_field(vol, sigma);
    const ScalarVolume v = sato_vesselness(h, params, sigma * sigma);
    for (std::size_t i = 0; i < vol.size(); ++i) {
      if (s == 0 || v[i] > r.response[i]) {
        r.response[i] = v[i];
        r.best_scale[i] = static_cast<std::uint8_t>(s);
        r.hessian.set(i, h.get(i));
      }
    }
  }
  return r;
}

} // namespace renovor
