#pragma once

// k-d tree over labelled voxel sites for exact nearest-site queries on an
// anisotropic grid.

#include <algorithm>
#include <limits>
#include <vector>

#include "renovor/volume.hpp"

namespace renovor {

struct Site {
  Index3 p;
  int group = 0;
};

struct NearestSite {
  double d2 = std::numeric_limits<double>::infinity();
  int group = -1;
};

/// Distances use squared_distance_mm, so results match a brute-force scan
/// exactly. Among equidistant sites the smallest group id wins.
class SiteTree {
public:
  SiteTree() = default;

  SiteTree(std::vector<Site> sites, const Vec3 &spacing) : sites_(std::move(sites)), spacing_(spacing)
  {
    if (!sites_.empty()) build(0, sites_.size());
  }

  bool empty() const { return sites_.empty(); }
  std::size_t size() const { return sites_.size(); }

  NearestSite nearest(const Index3 &q) const
  {
    NearestSite best;
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

private:
  struct Node {
    std::size_t begin, end;
    Index3 lo, hi;
    int left = -1, right = -1;
  };

  static constexpr std::size_t kLeafSize = 8;

  int build(std::size_t begin, std::size_t end)
  {
    Node n{begin, end, sites_[begin].p, sites_[begin].p};
    for (std::size_t i = begin; i < end; ++i)
      for (int a = 0; a < 3; ++a) {
        n.lo[a] = std::min(n.lo[a], sites_[i].p[a]);
        n.hi[a] = std::max(n.hi[a], sites_[i].p[a]);
      }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    if (end - begin <= kLeafSize) return id;

    int axis = 0;
    double widest = -1;
    for (int a = 0; a < 3; ++a) {
      const double w = static_cast<double>(n.hi[a] - n.lo[a]) * spacing_[a];
      if (w > widest) {
        widest = w;
        axis = a;
      }
    }
    if (n.hi[axis] == n.lo[axis]) return id; // all sites coincide
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(sites_.begin() + static_cast<std::ptrdiff_t>(begin),
                     sites_.begin() + static_cast<std::ptrdiff_t>(mid),
                     sites_.begin() + static_cast<std::ptrdiff_t>(end),
                     [axis](const Site &a, const Site &b) { return a.p[axis] < b.p[axis]; });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  /// Lower bound on the distance to any site in the box, summed in the same
  /// order as squared_distance_mm so it never exceeds a true distance.
  double box_distance(const Node &n, const Index3 &q) const
  {
    double d[3];
    for (int a = 0; a < 3; ++a) {
      long gap = 0;
      if (q[a] < n.lo[a]) gap = n.lo[a] - q[a];
      else if (q[a] > n.hi[a]) gap = q[a] - n.hi[a];
      d[a] = static_cast<double>(gap) * spacing_[a];
    }
    return d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
  }

  void search(int id, const Index3 &q, NearestSite &best) const
  {
    const Node &n = nodes_[id];
    if (box_distance(n, q) > best.d2) return;
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const double d2 = squared_distance_mm(q, sites_[i].p, spacing_);
        if (d2 < best.d2 || (d2 == best.d2 && sites_[i].group < best.group)) {
          best.d2 = d2;
          best.group = sites_[i].group;
        }
      }
      return;
    }
    const double dl = box_distance(nodes_[n.left], q);
    const double dr = box_distance(nodes_[n.right], q);
    if (dl <= dr) {
      search(n.left, q, best);
      search(n.right, q, best);
    } else {
      search(n.right, q, best);
      search(n.left, q, best);
    }
  }

  std::vector<Site> sites_;
  std::vector<Node> nodes_;
  Vec3 spacing_{1, 1, 1};
};

} // namespace renovor
