#pragma once

// Volumetric data model shared by every stage: grid geometry, typed voxel
// volumes and the error types used across the library.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace renovor {

/// Input data is malformed or inconsistent (bad file, size mismatch,
/// missing label). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError {
public:
  using DataError::DataError;
};

using Vec3 = std::array<double, 3>;

struct Index3 {
  long x = 0, y = 0, z = 0;

  friend bool operator==(const Index3 &, const Index3 &) = default;
  long &operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  long operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

struct VolumeGeometry {
  std::array<long, 3> dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};

  friend bool operator==(const VolumeGeometry &, const VolumeGeometry &) = default;

  std::size_t voxel_count() const
  {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }

  bool contains(const Index3 &p) const
  {
    return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < dims[0] && p.y < dims[1] && p.z < dims[2];
  }

  std::size_t linear(const Index3 &p) const
  {
    return static_cast<std::size_t>(p.x + dims[0] * (p.y + dims[1] * p.z));
  }

  Index3 index(std::size_t linear_index) const
  {
    const auto l = static_cast<long>(linear_index);
    return {l % dims[0], (l / dims[0]) % dims[1], l / (dims[0] * dims[1])};
  }

  Vec3 to_world(const Index3 &p) const
  {
    return {origin[0] + static_cast<double>(p.x) * spacing[0],
            origin[1] + static_cast<double>(p.y) * spacing[1],
            origin[2] + static_cast<double>(p.z) * spacing[2]};
  }

  /// Continuous voxel coordinates of a world point.
  Vec3 to_continuous_index(const Vec3 &w) const
  {
    return {(w[0] - origin[0]) / spacing[0], (w[1] - origin[1]) / spacing[1],
            (w[2] - origin[2]) / spacing[2]};
  }

  Index3 nearest_index(const Vec3 &w) const
  {
    const Vec3 c = to_continuous_index(w);
    return {std::lround(c[0]), std::lround(c[1]), std::lround(c[2])};
  }

  void validate() const
  {
    for (int a = 0; a < 3; ++a) {
      if (dims[a] < 1) throw DataError("volume dimension must be >= 1");
      if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
        throw DataError("voxel spacing must be positive and finite");
      if (!std::isfinite(origin[a])) throw DataError("origin must be finite");
    }
  }
};

/// Squared world distance between two voxels of the same grid. Every exact
/// nearest-site computation in the library goes through this one expression
/// so independent scans agree bit for bit.
inline double squared_distance_mm(const Index3 &a, const Index3 &b, const Vec3 &spacing)
{
  const double dx = static_cast<double>(a.x - b.x) * spacing[0];
  const double dy = static_cast<double>(a.y - b.y) * spacing[1];
  const double dz = static_cast<double>(a.z - b.z) * spacing[2];
  return dx * dx + dy * dy + dz * dz;
}

template <typename T>
class Volume {
public:
  using value_type = T;

  Volume() = default;

  explicit Volume(const VolumeGeometry &geometry, T fill = T{})
      : geometry_(geometry), data_(geometry.voxel_count(), fill)
  {
    geometry_.validate();
  }

  Volume(const VolumeGeometry &geometry, std::vector<T> data)
      : geometry_(geometry), data_(std::move(data))
  {
    geometry_.validate();
    if (data_.size() != geometry_.voxel_count())
      throw DataError("voxel buffer length does not match geometry");
  }

  const VolumeGeometry &geometry() const { return geometry_; }
  const std::array<long, 3> &dims() const { return geometry_.dims; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  T &at(const Index3 &p) { return data_[geometry_.linear(p)]; }
  const T &at(const Index3 &p) const { return data_[geometry_.linear(p)]; }
  T &at(long x, long y, long z) { return at(Index3{x, y, z}); }
  const T &at(long x, long y, long z) const { return at(Index3{x, y, z}); }

  /// Value at p with coordinates clamped to the grid.
  const T &clamped(long x, long y, long z) const
  {
    const auto clampi = [](long v, long n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    return at(clampi(x, geometry_.dims[0]), clampi(y, geometry_.dims[1]),
              clampi(z, geometry_.dims[2]));
  }

  std::vector<T> &data() { return data_; }
  const std::vector<T> &data() const { return data_; }

  friend bool operator==(const Volume &, const Volume &) = default;

private:
  VolumeGeometry geometry_;
  std::vector<T> data_;
};

using ScalarVolume = Volume<float>;
using LabelVolume = Volume<std::uint16_t>;

inline void require_same_geometry(const VolumeGeometry &a, const VolumeGeometry &b,
                                  const char *what)
{
  if (a.dims != b.dims) throw DataError(std::string(what) + ": volume dimensions differ");
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.spacing[i] - b.spacing[i]) > 1e-9 || std::abs(a.origin[i] - b.origin[i]) > 1e-6)
      throw DataError(std::string(what) + ": volume geometry differs");
  }
}

template <typename T>
std::size_t count_nonzero(const Volume<T> &v)
{
  std::size_t n = 0;
  for (const T &x : v.data()) n += (x != T{}) ? 1 : 0;
  return n;
}

/// Binary mask of voxels where pred(value) holds.
template <typename T, typename Pred>
LabelVolume make_mask(const Volume<T> &v, Pred pred)
{
  LabelVolume out(v.geometry());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = pred(v[i]) ? 1 : 0;
  return out;
}

template <typename T>
LabelVolume binarize(const Volume<T> &v)
{
  return make_mask(v, [](T x) { return x != T{}; });
}

/// Face (6), edge (18) and corner (26) neighbour offsets, faces first.
inline const std::vector<Index3> &neighbor_offsets(int connectivity)
{
  static const std::vector<Index3> six = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                          {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  static const std::vector<Index3> all26 = [] {
    std::vector<Index3> v = six;
    for (long dz = -1; dz <= 1; ++dz)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long n = std::abs(dx) + std::abs(dy) + std::abs(dz);
          if (n >= 2) v.push_back({dx, dy, dz});
        }
    return v;
  }();
  if (connectivity == 6) return six;
  if (connectivity == 26) return all26;
  throw std::invalid_argument("connectivity must be 6 or 26");
}

inline Index3 operator+(const Index3 &a, const Index3 &b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Index3 operator-(const Index3 &a, const Index3 &b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

} // namespace renovor
