#pragma once

// Topology-preserving 3D thinning (26-connected foreground, 6-connected
// background) by sequential simple-point removal.

#include <algorithm>
#include <array>
#include <numeric>
#include <vector>

#include "renovor/morphology.hpp"
#include "renovor/volume.hpp"

namespace renovor {

namespace detail {

/// Position k in the 3x3x3 cube is (k % 3 - 1, k / 3 % 3 - 1, k / 9 - 1).
struct CubeTables {
  std::array<std::vector<int>, 27> adj26; // 26-adjacent cube positions
  std::array<std::vector<int>, 27> adj6;  // 6-adjacent cube positions
  std::array<bool, 27> in_n18{};
  std::array<int, 6> faces{};

  CubeTables()
  {
    const auto coord = [](int k) { return std::array<int, 3>{k % 3 - 1, k / 3 % 3 - 1, k / 9 - 1}; };
    int f = 0;
    for (int a = 0; a < 27; ++a) {
      const auto ca = coord(a);
      const int la = std::abs(ca[0]) + std::abs(ca[1]) + std::abs(ca[2]);
      in_n18[a] = la >= 1 && la <= 2;
      if (la == 1) faces[f++] = a;
      for (int b = 0; b < 27; ++b) {
        if (a == b) continue;
        const auto cb = coord(b);
        const int dx = std::abs(ca[0] - cb[0]), dy = std::abs(ca[1] - cb[1]), dz = std::abs(ca[2] - cb[2]);
        if (std::max({dx, dy, dz}) == 1) {
          adj26[a].push_back(b);
          if (dx + dy + dz == 1) adj6[a].push_back(b);
        }
      }
    }
  }
};

inline const CubeTables &cube_tables()
{
  static const CubeTables t;
  return t;
}

/// Simple-point test on a 27-voxel neighbourhood (centre at 13): exactly
/// one 26-component of foreground in N26* and exactly one 6-component of
/// background in N18 that touches a face neighbour.
inline bool is_simple(const std::array<bool, 27> &nb)
{
  const auto &t = cube_tables();
  int stack[27];
  std::array<bool, 27> seen{};

  int fg_components = 0;
  for (int s = 0; s < 27; ++s) {
    if (s == 13 || !nb[s] || seen[s]) continue;
    if (++fg_components > 1) return false;
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top) {
      const int c = stack[--top];
      for (int n : t.adj26[c])
        if (n != 13 && nb[n] && !seen[n]) {
          seen[n] = true;
          stack[top++] = n;
        }
    }
  }
  if (fg_components != 1) return false;

  seen.fill(false);
  int bg_components = 0;
  for (int s : t.faces) {
    if (nb[s] || seen[s]) continue;
    if (++bg_components > 1) return false;
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top) {
      const int c = stack[--top];
      for (int n : t.adj6[c])
        if (t.in_n18[n] && !nb[n] && !seen[n]) {
          seen[n] = true;
          stack[top++] = n;
        }
    }
  }
  return bg_components == 1;
}

inline std::array<bool, 27> neighborhood(const LabelVolume &v, const Index3 &p)
{
  std::array<bool, 27> nb{};
  const auto &g = v.geometry();
  for (int k = 0; k < 27; ++k) {
    const Index3 q{p.x + k % 3 - 1, p.y + k / 3 % 3 - 1, p.z + k / 9 - 1};
    nb[k] = g.contains(q) && v.at(q) != 0;
  }
  return nb;
}

} // namespace detail

/// Number of 26-neighbours of p that are set in v.
inline int skeleton_degree(const LabelVolume &v, const Index3 &p)
{
  const auto &g = v.geometry();
  int n = 0;
  for (const auto &o : neighbor_offsets(26)) {
    const Index3 q = p + o;
    if (g.contains(q) && v.at(q) != 0) ++n;
  }
  return n;
}

/// One-voxel-wide centreline of a binary mask. Each pass peels the current
/// border, outermost voxels (smallest distance to background) first;
/// endpoints are kept so curves do not shrink.
inline LabelVolume skeletonize(const LabelVolume &mask)
{
  LabelVolume x = binarize(mask);
  const auto &g = x.geometry();
  if (count_nonzero(x) == 0) return x;

  LabelVolume background(g);
  for (std::size_t i = 0; i < x.size(); ++i) background[i] = x[i] ? 0 : 1;
  const auto depth = squared_distance_transform(background);

  std::vector<std::size_t> border;
  while (true) {
    border.clear();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!x[i]) continue;
      const Index3 p = g.index(i);
      for (const auto &o : neighbor_offsets(6)) {
        const Index3 q = p + o;
        if (!g.contains(q) || x.at(q) == 0) {
          border.push_back(i);
          break;
        }
      }
    }
    std::stable_sort(border.begin(), border.end(),
                     [&](std::size_t a, std::size_t b) { return depth[a] < depth[b]; });
    bool changed = false;
    for (std::size_t i : border) {
      const Index3 p = g.index(i);
      const auto nb = detail::neighborhood(x, p);
      int degree = 0;
      for (int k = 0; k < 27; ++k) degree += (k != 13 && nb[k]) ? 1 : 0;
      if (degree <= 1) continue;
      if (!detail::is_simple(nb)) continue;
      x[i] = 0;
      changed = true;
    }
    if (!changed) break;
  }
  return x;
}

} // namespace renovor
