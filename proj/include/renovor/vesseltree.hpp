#pragma once

// Vessel centreline graph: tree extraction from a skeleton, kidney entry
// detection and bifurcation-level clustering of branches.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>
#include <vector>

#include "renovor/morphology.hpp"
#include "renovor/skeleton.hpp"
#include "renovor/volume.hpp"

namespace renovor {

struct TreeNode {
  std::vector<Index3> voxels; // junction clusters hold several voxels
  Index3 voxel;               // representative voxel, nearest the cluster centroid
  Vec3 position_mm{};
  int degree = 0;
};

struct TreeEdge {
  int from = -1; // towards the root
  int to = -1;
  std::vector<Index3> path; // voxels strictly between the two nodes, from -> to
};

struct Branch {
  std::vector<int> edges; // ordered away from the root
  int start_node = -1;
  int end_node = -1;
  int parent = -1;
  std::vector<int> children;
};

/// Rooted tree. Node ids are in depth-first preorder from the root, edge i
/// ends at node i + 1, and branch ids are in preorder too.
struct VesselTree {
  VolumeGeometry geometry;
  std::vector<TreeNode> nodes;
  std::vector<TreeEdge> edges;
  std::vector<Branch> branches;
  int root = -1;
  std::vector<int> entries; // node ids, ascending
};

struct TreeOptions {
  double prune_spur_mm = 0.0; // leaf chains shorter than this are dropped
};

namespace detail {

struct UndirectedEdge {
  int a = -1, b = -1;
  std::vector<Index3> path; // a -> b
};

struct SkeletonGraph {
  std::vector<std::vector<Index3>> nodes;
  std::vector<UndirectedEdge> edges;
};

inline Index3 representative_voxel(const std::vector<Index3> &voxels, const VolumeGeometry &g)
{
  Vec3 c{0, 0, 0};
  for (const auto &v : voxels) {
    const Vec3 w = g.to_world(v);
    for (int a = 0; a < 3; ++a) c[a] += w[a];
  }
  for (double &x : c) x /= static_cast<double>(voxels.size());
  Index3 best = voxels.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto &v : voxels) {
    const Vec3 w = g.to_world(v);
    const double d = (w[0] - c[0]) * (w[0] - c[0]) + (w[1] - c[1]) * (w[1] - c[1]) + (w[2] - c[2]) * (w[2] - c[2]);
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

/// Nodes are voxels of degree != 2, with 26-adjacent junction voxels merged
/// into one node; edges are the degree-2 chains between them.
inline SkeletonGraph trace_skeleton(const LabelVolume &s)
{
  const auto &g = s.geometry();
  SkeletonGraph sg;
  std::vector<std::size_t> vox;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i]) vox.push_back(i);
  if (vox.empty()) return sg;

  const auto &offs = neighbor_offsets(26);
  std::vector<int> degree(s.size(), 0);
  for (std::size_t i : vox) degree[i] = skeleton_degree(s, g.index(i));

  std::vector<int> node_of(s.size(), -1);
  for (std::size_t i : vox) {
    if (node_of[i] >= 0 || degree[i] == 2) continue;
    const int id = static_cast<int>(sg.nodes.size());
    std::vector<std::size_t> members{i};
    node_of[i] = id;
    if (degree[i] >= 3) {
      for (std::size_t k = 0; k < members.size(); ++k) {
        const Index3 p = g.index(members[k]);
        for (const auto &o : offs) {
          const Index3 q = p + o;
          if (!g.contains(q)) continue;
          const std::size_t j = g.linear(q);
          if (s[j] && degree[j] >= 3 && node_of[j] < 0) {
            node_of[j] = id;
            members.push_back(j);
          }
        }
      }
    }
    std::sort(members.begin(), members.end());
    std::vector<Index3> voxels;
    for (std::size_t j : members) voxels.push_back(g.index(j));
    sg.nodes.push_back(std::move(voxels));
  }
  if (sg.nodes.empty()) { // a closed loop with no branching
    node_of[vox.front()] = 0;
    sg.nodes.push_back({g.index(vox.front())});
  }

  std::vector<char> visited(s.size(), 0);
  std::set<std::pair<int, int>> direct;
  for (int n = 0; n < static_cast<int>(sg.nodes.size()); ++n) {
    for (const Index3 &v : sg.nodes[n]) {
      for (const auto &o : offs) {
        const Index3 w = v + o;
        if (!g.contains(w) || !s.at(w)) continue;
        const std::size_t j = g.linear(w);
        const int m = node_of[j];
        if (m == n) continue;
        if (m >= 0) {
          if (n < m && direct.insert({n, m}).second) sg.edges.push_back({n, m, {}});
          continue;
        }
        if (visited[j]) continue;
        std::vector<Index3> path;
        std::size_t prev = g.linear(v), cur = j;
        while (true) {
          visited[cur] = 1;
          const Index3 pc = g.index(cur);
          path.push_back(pc);
          std::size_t next = s.size();
          for (const auto &o2 : offs) {
            const Index3 x = pc + o2;
            if (!g.contains(x) || !s.at(x)) continue;
            const std::size_t lx = g.linear(x);
            if (lx != prev) {
              next = lx;
              break;
            }
          }
          if (next == s.size()) break;
          if (node_of[next] >= 0) {
            sg.edges.push_back({n, node_of[next], std::move(path)});
            break;
          }
          if (visited[next]) break;
          prev = cur;
          cur = next;
        }
      }
    }
  }
  return sg;
}

/// Minimum spanning forest by chain length (ties by edge index); the edges
/// left out are the longest edge of each cycle.
inline std::vector<int> spanning_edges(const SkeletonGraph &sg)
{
  std::vector<int> order(sg.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sg.edges[a].path.size() < sg.edges[b].path.size(); });
  std::vector<int> parent(sg.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<int> kept;
  for (int e : order) {
    const int ra = find(sg.edges[e].a), rb = find(sg.edges[e].b);
    if (ra == rb) continue;
    parent[ra] = rb;
    kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

inline double polyline_length_mm(const std::vector<Index3> &pts, const Vec3 &spacing)
{
  double len = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += std::sqrt(squared_distance_mm(pts[i - 1], pts[i], spacing));
  return len;
}

inline double world_d2(const Vec3 &a, const Vec3 &b)
{
  return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
}

inline void build_branches(VesselTree &t)
{
  t.branches.clear();
  const std::size_t n = t.nodes.size();
  std::vector<std::vector<int>> child_edges(n);
  for (int e = 0; e < static_cast<int>(t.edges.size()); ++e) child_edges[t.edges[e].from].push_back(e);
  const auto boundary = [&](int v) { return v == t.root || child_edges[v].size() != 1; };

  if (t.edges.empty()) {
    Branch b;
    b.start_node = b.end_node = t.root;
    t.branches.push_back(b);
    return;
  }
  std::vector<std::pair<int, int>> stack; // (edge, parent branch)
  for (auto it = child_edges[t.root].rbegin(); it != child_edges[t.root].rend(); ++it) stack.push_back({*it, -1});
  while (!stack.empty()) {
    const auto [e0, pb] = stack.back();
    stack.pop_back();
    const int id = static_cast<int>(t.branches.size());
    Branch b;
    b.start_node = t.edges[e0].from;
    b.parent = pb;
    int e = e0;
    while (true) {
      b.edges.push_back(e);
      const int v = t.edges[e].to;
      if (boundary(v)) {
        b.end_node = v;
        break;
      }
      e = child_edges[v].front();
    }
    if (pb >= 0) t.branches[pb].children.push_back(id);
    const int end = b.end_node;
    t.branches.push_back(std::move(b));
    for (auto it = child_edges[end].rbegin(); it != child_edges[end].rend(); ++it) stack.push_back({*it, id});
  }
}

/// Roots an acyclic graph, renumbers nodes and edges in preorder (children
/// in input edge order) and rebuilds the branches.
inline VesselTree canonical_tree(const VolumeGeometry &g, const std::vector<std::vector<Index3>> &node_voxels,
                                 const std::vector<UndirectedEdge> &edges, int root,
                                 const std::vector<char> &entry_flag)
{
  const std::size_t n = node_voxels.size();
  std::vector<std::vector<int>> adj(n);
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    adj[edges[e].a].push_back(e);
    adj[edges[e].b].push_back(e);
  }
  VesselTree t;
  t.geometry = g;
  std::vector<int> new_id(n, -1);
  struct Item {
    int node, via, parent;
  };
  std::vector<Item> stack{{root, -1, -1}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    if (new_id[it.node] >= 0) continue;
    const int id = static_cast<int>(t.nodes.size());
    new_id[it.node] = id;
    TreeNode node;
    node.voxels = node_voxels[it.node];
    node.voxel = representative_voxel(node.voxels, g);
    node.position_mm = g.to_world(node.voxel);
    t.nodes.push_back(std::move(node));
    if (it.via >= 0) {
      const auto &ue = edges[it.via];
      TreeEdge te;
      te.from = new_id[it.parent];
      te.to = id;
      te.path = ue.path;
      if (ue.a != it.parent) std::reverse(te.path.begin(), te.path.end());
      t.edges.push_back(std::move(te));
      ++t.nodes[te.from].degree;
      ++t.nodes[id].degree;
    }
    for (auto e = adj[it.node].rbegin(); e != adj[it.node].rend(); ++e) {
      const auto &ue = edges[*e];
      const int other = ue.a == it.node ? ue.b : ue.a;
      if (new_id[other] < 0) stack.push_back({other, *e, it.node});
    }
  }
  t.root = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (entry_flag.size() == n && entry_flag[i] && new_id[i] >= 0) t.entries.push_back(new_id[i]);
  std::sort(t.entries.begin(), t.entries.end());
  build_branches(t);
  return t;
}

} // namespace detail

/// Builds the rooted centreline tree of the largest 26-connected component
/// of `skeleton`. The root is the node nearest `root_hint` (world mm).
inline VesselTree build_tree(const LabelVolume &skeleton, const Vec3 &root_hint, const TreeOptions &opt = {})
{
  LabelVolume s = binarize(connected_components_top_k(skeleton, 1, 26));
  if (count_nonzero(s) == 0) throw DataError("build_tree: empty skeleton");
  const auto &g = s.geometry();

  detail::SkeletonGraph sg;
  std::vector<int> kept;
  int root = 0;
  for (int round = 0;; ++round) {
    sg = detail::trace_skeleton(s);
    kept = detail::spanning_edges(sg);
    std::vector<Vec3> pos(sg.nodes.size());
    root = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(sg.nodes.size()); ++i) {
      pos[i] = g.to_world(detail::representative_voxel(sg.nodes[i], g));
      const double d = detail::world_d2(pos[i], root_hint);
      if (d < best) {
        best = d;
        root = i;
      }
    }
    if (opt.prune_spur_mm <= 0 || round > 1000) break;

    std::vector<int> degree(sg.nodes.size(), 0);
    for (int e : kept) {
      ++degree[sg.edges[e].a];
      ++degree[sg.edges[e].b];
    }
    struct Spur {
      double length;
      int edge, leaf, junction;
    };
    std::map<int, std::vector<Spur>> spurs;
    for (int e : kept) {
      const auto &ue = sg.edges[e];
      for (int side = 0; side < 2; ++side) {
        const int leaf = side ? ue.b : ue.a, other = side ? ue.a : ue.b;
        if (degree[leaf] != 1 || degree[other] < 3 || leaf == root) continue;
        std::vector<Index3> pts{detail::representative_voxel(sg.nodes[ue.a], g)};
        pts.insert(pts.end(), ue.path.begin(), ue.path.end());
        pts.push_back(detail::representative_voxel(sg.nodes[ue.b], g));
        const double len = detail::polyline_length_mm(pts, g.spacing);
        if (len < opt.prune_spur_mm) spurs[other].push_back({len, e, leaf, other});
      }
    }
    bool removed = false;
    for (auto &[junction, list] : spurs) {
      std::sort(list.begin(), list.end(), [](const Spur &a, const Spur &b) {
        return std::tie(a.length, a.edge) < std::tie(b.length, b.edge);
      });
      for (const Spur &sp : list) {
        if (degree[junction] <= 2) break;
        --degree[junction];
        for (const auto &v : sg.edges[sp.edge].path) s.at(v) = 0;
        for (const auto &v : sg.nodes[sp.leaf]) s.at(v) = 0;
        removed = true;
      }
    }
    if (!removed) break;
  }

  std::vector<detail::UndirectedEdge> tree_edges;
  for (int e : kept) tree_edges.push_back(sg.edges[e]);
  return detail::canonical_tree(g, sg.nodes, tree_edges, root, {});
}

/// Voxels owned by branch b: the interior of its edges plus each edge's
/// downstream node. The root belongs to branch 0, so the branches
/// partition the tree's voxels.
inline std::vector<Index3> branch_voxels(const VesselTree &t, int b)
{
  std::vector<Index3> out;
  const Branch &br = t.branches.at(static_cast<std::size_t>(b));
  if (b == 0) out = t.nodes[t.root].voxels;
  for (int e : br.edges) {
    const auto &te = t.edges[e];
    out.insert(out.end(), te.path.begin(), te.path.end());
    out.insert(out.end(), t.nodes[te.to].voxels.begin(), t.nodes[te.to].voxels.end());
  }
  return out;
}

inline std::size_t tree_voxel_count(const VesselTree &t)
{
  std::size_t n = 0;
  for (const auto &node : t.nodes) n += node.voxels.size();
  for (const auto &e : t.edges) n += e.path.size();
  return n;
}

/// Rasterizes all tree voxels into a mask of the tree's geometry.
inline LabelVolume tree_mask(const VesselTree &t)
{
  LabelVolume m(t.geometry);
  for (const auto &node : t.nodes)
    for (const auto &v : node.voxels) m.at(v) = 1;
  for (const auto &e : t.edges)
    for (const auto &v : e.path) m.at(v) = 1;
  return m;
}

/// A position on the tree: voxel `offset` of edge `edge`'s path, or the
/// edge's downstream node when offset == path.size(). edge == -1 is the root.
struct EntryPoint {
  int edge = -1;
  std::size_t offset = 0;
  friend bool operator==(const EntryPoint &, const EntryPoint &) = default;
};

inline Index3 entry_voxel(const VesselTree &t, const EntryPoint &ep)
{
  if (ep.edge < 0) return t.nodes[t.root].voxel;
  const auto &e = t.edges[ep.edge];
  return ep.offset < e.path.size() ? e.path[ep.offset] : t.nodes[e.to].voxel;
}

/// First tree voxel inside the kidney along every root-to-leaf path. Entries
/// fewer than 2 voxel steps apart along the tree are merged at their common
/// ancestor. An empty result means the tree never reaches the kidney.
inline std::vector<EntryPoint> detect_entries(const VesselTree &t, const LabelVolume &kidney)
{
  require_same_geometry(t.geometry, kidney.geometry(), "detect_entries");
  const auto inside = [&](const Index3 &v) { return kidney.at(v) != 0; };
  const auto node_inside = [&](int n) {
    return std::any_of(t.nodes[n].voxels.begin(), t.nodes[n].voxels.end(), inside);
  };
  if (t.nodes.empty()) return {};
  if (node_inside(t.root)) return {EntryPoint{-1, 0}};

  const std::size_t n = t.nodes.size();
  std::vector<std::vector<int>> child_edges(n);
  std::vector<int> parent_edge(n, -1);
  for (int e = 0; e < static_cast<int>(t.edges.size()); ++e) {
    child_edges[t.edges[e].from].push_back(e);
    parent_edge[t.edges[e].to] = e;
  }
  std::vector<long> depth(n, 0); // voxel steps from the root; preorder makes parents come first
  for (const auto &e : t.edges) depth[e.to] = depth[e.from] + static_cast<long>(e.path.size()) + 1;

  std::vector<EntryPoint> found;
  std::vector<int> stack(child_edges[t.root].rbegin(), child_edges[t.root].rend());
  while (!stack.empty()) {
    const int e = stack.back();
    stack.pop_back();
    const auto &te = t.edges[e];
    const auto hit = std::find_if(te.path.begin(), te.path.end(), inside);
    if (hit != te.path.end()) {
      found.push_back({e, static_cast<std::size_t>(hit - te.path.begin())});
    } else if (node_inside(te.to)) {
      found.push_back({e, te.path.size()});
    } else {
      for (auto it = child_edges[te.to].rbegin(); it != child_edges[te.to].rend(); ++it) stack.push_back(*it);
    }
  }

  const auto anchor = [&](const EntryPoint &p) {
    if (p.edge < 0) return t.root;
    const auto &te = t.edges[p.edge];
    return p.offset == te.path.size() ? te.to : te.from;
  };
  const auto position_depth = [&](const EntryPoint &p) {
    if (p.edge < 0) return 0L;
    return depth[t.edges[p.edge].from] + static_cast<long>(p.offset) + 1;
  };
  const auto lca = [&](int a, int b) {
    while (a != b) {
      if (depth[a] >= depth[b] && a != t.root) a = t.edges[parent_edge[a]].from;
      else b = t.edges[parent_edge[b]].from;
    }
    return a;
  };
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < found.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < found.size() && !merged; ++j) {
        const int l = lca(anchor(found[i]), anchor(found[j]));
        const long d = position_depth(found[i]) + position_depth(found[j]) - 2 * depth[l];
        if (d >= 2) continue;
        found[i] = l == t.root ? EntryPoint{-1, 0}
                               : EntryPoint{parent_edge[l], t.edges[parent_edge[l]].path.size()};
        found.erase(found.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
  }
  return found;
}

/// Copy of `t` with a node inserted at every entry position (edges are split
/// where needed) and entry ids recorded. An entry inside a branch becomes a
/// degree-2 node of that branch; branches still run between bifurcations
/// and endpoints.
inline VesselTree with_entries(const VesselTree &t, const std::vector<EntryPoint> &entries)
{
  std::vector<std::vector<Index3>> nodes;
  for (const auto &node : t.nodes) nodes.push_back(node.voxels);
  std::vector<char> flag(nodes.size(), 0);
  std::map<int, std::vector<std::size_t>> splits;
  for (const auto &ep : entries) {
    if (ep.edge < 0) {
      flag[t.root] = 1;
      continue;
    }
    const auto &te = t.edges.at(static_cast<std::size_t>(ep.edge));
    if (ep.offset >= te.path.size()) flag[te.to] = 1;
    else splits[ep.edge].push_back(ep.offset);
  }
  std::vector<detail::UndirectedEdge> edges;
  for (int e = 0; e < static_cast<int>(t.edges.size()); ++e) {
    const auto &te = t.edges[e];
    auto it = splits.find(e);
    if (it == splits.end()) {
      edges.push_back({te.from, te.to, te.path});
      continue;
    }
    auto cuts = it->second;
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    int prev_node = te.from;
    std::size_t start = 0;
    for (std::size_t k : cuts) {
      const int id = static_cast<int>(nodes.size());
      nodes.push_back({te.path[k]});
      flag.push_back(1);
      edges.push_back({prev_node, id, {te.path.begin() + static_cast<std::ptrdiff_t>(start),
                                       te.path.begin() + static_cast<std::ptrdiff_t>(k)}});
      prev_node = id;
      start = k + 1;
    }
    edges.push_back({prev_node, te.to, {te.path.begin() + static_cast<std::ptrdiff_t>(start), te.path.end()}});
  }
  return detail::canonical_tree(t.geometry, nodes, edges, t.root, flag);
}

inline VesselTree mark_entries(const VesselTree &t, const LabelVolume &kidney)
{
  return with_entries(t, detect_entries(t, kidney));
}

struct BranchClustering {
  int level_offset = 0;
  int group_count = 0;
  std::vector<int> group_of_branch; // 1-based group id per branch
};

namespace detail {

struct BranchGroup {
  int anchor = -1;
  std::vector<int> heads;   // branches leaving the anchor that define the group
  std::vector<int> members; // sorted branch ids
};

struct BranchTopology {
  const VesselTree *tree = nullptr;
  std::vector<std::vector<int>> children_of_node; // branches starting at a node
  std::vector<int> parent_of_node;                // branch ending at or passing through a node
  std::vector<double> length;                     // voxel steps
  std::vector<std::vector<int>> adjacent;         // branches sharing a node

  explicit BranchTopology(const VesselTree &t) : tree(&t)
  {
    const std::size_t nb = t.branches.size();
    children_of_node.assign(t.nodes.size(), {});
    parent_of_node.assign(t.nodes.size(), -1);
    length.assign(nb, 0.0);
    adjacent.assign(nb, {});
    std::vector<std::vector<int>> at_node(t.nodes.size());
    for (int b = 0; b < static_cast<int>(nb); ++b) {
      const auto &br = t.branches[b];
      if (br.edges.empty()) continue;
      children_of_node[br.start_node].push_back(b);
      for (int e : br.edges) parent_of_node[t.edges[e].to] = b;
      at_node[br.start_node].push_back(b);
      at_node[br.end_node].push_back(b);
      for (int e : br.edges) length[b] += static_cast<double>(t.edges[e].path.size() + 1);
    }
    for (const auto &list : at_node)
      for (int a : list)
        for (int b : list)
          if (a != b) adjacent[a].push_back(b);
    for (auto &list : adjacent) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }

  std::vector<int> subtree(const std::vector<int> &heads) const
  {
    std::vector<int> out;
    std::vector<int> stack(heads.rbegin(), heads.rend());
    while (!stack.empty()) {
      const int b = stack.back();
      stack.pop_back();
      out.push_back(b);
      const auto &ch = tree->branches[b].children;
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Nearest strictly upstream node with two or more child branches, or the root.
  int upstream_bifurcation(int node) const
  {
    const int root = tree->root;
    if (node == root) return root;
    int x = tree->branches[parent_of_node[node]].start_node;
    while (x != root && children_of_node[x].size() < 2) x = tree->branches[parent_of_node[x]].start_node;
    return x;
  }
};

/// Adds every branch in `leftovers` to the group whose members are nearest
/// along the branch graph (midpoint-to-midpoint lengths); ties go to the
/// lower group index.
inline void assign_nearest(const BranchTopology &topo, std::vector<BranchGroup> &groups,
                           const std::vector<int> &leftovers)
{
  if (leftovers.empty()) return;
  const std::size_t nb = topo.length.size();
  std::vector<double> dist(nb, std::numeric_limits<double>::infinity());
  std::vector<int> label(nb, std::numeric_limits<int>::max());
  std::vector<char> done(nb, 0);
  using Item = std::tuple<double, int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (int gi = 0; gi < static_cast<int>(groups.size()); ++gi)
    for (int m : groups[gi].members)
      if (0.0 < dist[m] || gi < label[m]) {
        dist[m] = 0;
        label[m] = gi;
        pq.push({0.0, gi, m});
      }
  while (!pq.empty()) {
    const auto [d, gi, b] = pq.top();
    pq.pop();
    if (done[b] || d != dist[b] || gi != label[b]) continue;
    done[b] = 1;
    for (int nbh : topo.adjacent[b]) {
      if (done[nbh]) continue;
      const double nd = d + 0.5 * (topo.length[b] + topo.length[nbh]);
      if (nd < dist[nbh] || (nd == dist[nbh] && gi < label[nbh])) {
        dist[nbh] = nd;
        label[nbh] = gi;
        pq.push({nd, gi, nbh});
      }
    }
  }
  for (int b : leftovers)
    if (label[b] != std::numeric_limits<int>::max()) groups[label[b]].members.push_back(b);
  for (auto &g : groups) std::sort(g.members.begin(), g.members.end());
}

inline std::vector<int> uncovered(const std::vector<int> &all, const std::vector<BranchGroup> &groups)
{
  std::vector<char> covered(all.empty() ? 0 : static_cast<std::size_t>(*std::max_element(all.begin(), all.end())) + 1, 0);
  for (const auto &g : groups)
    for (int m : g.members)
      if (static_cast<std::size_t>(m) < covered.size()) covered[m] = 1;
  std::vector<int> out;
  for (int b : all)
    if (!covered[b]) out.push_back(b);
  return out;
}

inline std::vector<BranchGroup> level_zero(const BranchTopology &topo)
{
  const VesselTree &t = *topo.tree;
  std::vector<int> all(t.branches.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<BranchGroup> groups;
  if (t.entries.empty()) {
    groups.push_back({t.root, topo.children_of_node[t.root], all});
    return groups;
  }
  for (int e : t.entries) {
    // an entry at a bifurcation heads the branches leaving it; one inside a
    // branch (or at a leaf) heads that branch
    BranchGroup g{e, topo.children_of_node[e], {}};
    if (g.heads.empty() && topo.parent_of_node[e] >= 0) g.heads = {topo.parent_of_node[e]};
    g.members = topo.subtree(g.heads);
    if (g.members.empty()) g.members = all; // degenerate root-only tree
    groups.push_back(std::move(g));
  }
  assign_nearest(topo, groups, uncovered(all, groups));
  return groups;
}

/// One level finer: each group splits at its first bifurcation at or below
/// its anchor, one subgroup per child branch. Groups reaching a leaf stay.
inline std::vector<BranchGroup> refine(const BranchTopology &topo, const std::vector<BranchGroup> &groups)
{
  const VesselTree &t = *topo.tree;
  std::vector<BranchGroup> out;
  for (const auto &g : groups) {
    int split_node = -1;
    if (g.heads.size() >= 2) {
      split_node = g.anchor;
    } else if (g.heads.size() == 1) {
      int v = t.branches[g.heads[0]].end_node;
      while (topo.children_of_node[v].size() == 1) v = t.branches[topo.children_of_node[v][0]].end_node;
      if (topo.children_of_node[v].size() >= 2) split_node = v;
    }
    if (split_node < 0) {
      out.push_back(g);
      continue;
    }
    std::vector<BranchGroup> sub;
    for (int c : topo.children_of_node[split_node]) {
      BranchGroup s{split_node, {c}, {}};
      for (int b : topo.subtree({c}))
        if (std::binary_search(g.members.begin(), g.members.end(), b)) s.members.push_back(b);
      if (!s.members.empty()) sub.push_back(std::move(s));
    }
    assign_nearest(topo, sub, uncovered(g.members, sub));
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

/// One level coarser: each anchor moves to its upstream bifurcation and
/// groups that now share an anchor merge.
inline std::vector<BranchGroup> coarsen(const BranchTopology &topo, const std::vector<BranchGroup> &groups)
{
  std::vector<BranchGroup> out;
  std::map<int, std::size_t> by_anchor;
  for (const auto &g : groups) {
    const int up = topo.upstream_bifurcation(g.anchor);
    auto [it, fresh] = by_anchor.try_emplace(up, out.size());
    if (fresh) out.push_back({up, {}, {}});
    auto &m = out[it->second].members;
    m.insert(m.end(), g.members.begin(), g.members.end());
  }
  for (auto &g : out) {
    std::sort(g.members.begin(), g.members.end());
    for (int c : topo.children_of_node[g.anchor]) {
      const auto sub = topo.subtree({c});
      const bool hit = std::any_of(sub.begin(), sub.end(), [&](int b) {
        return std::binary_search(g.members.begin(), g.members.end(), b);
      });
      if (hit) g.heads.push_back(c);
    }
  }
  return out;
}

inline bool same_level(const std::vector<BranchGroup> &a, const std::vector<BranchGroup> &b)
{
  if (a.size() != b.size()) return false;
  const auto key = [](const std::vector<BranchGroup> &l) {
    std::vector<std::pair<int, std::vector<int>>> k;
    for (const auto &g : l) k.push_back({g.anchor, g.members});
    std::sort(k.begin(), k.end());
    return k;
  };
  return key(a) == key(b);
}

} // namespace detail

/// Groups branches by entry (offset 0), coarser by merging at upstream
/// bifurcations (offset < 0) or finer by splitting at downstream
/// bifurcations (offset > 0). Offsets past the root or the leaves saturate.
///
/// Group ids follow one branch order in which every level's groups are
/// contiguous, so coarser regions are unions of finer ones even where the
/// smallest-id tie-break decides a voxel.
inline BranchClustering cluster_branches(const VesselTree &t, int level_offset)
{
  if (t.branches.empty()) throw DataError("cluster_branches: tree has no branches");
  const detail::BranchTopology topo(t);
  const int max_steps = static_cast<int>(t.nodes.size()) + 2;

  std::vector<std::vector<detail::BranchGroup>> coarse{detail::level_zero(topo)};
  for (int i = 0; i < max_steps; ++i) {
    auto next = detail::coarsen(topo, coarse.back());
    if (detail::same_level(next, coarse.back())) break;
    coarse.push_back(std::move(next));
  }
  std::vector<std::vector<detail::BranchGroup>> fine{coarse.front()};
  for (int i = 0; i < max_steps; ++i) {
    auto next = detail::refine(topo, fine.back());
    if (detail::same_level(next, fine.back())) break;
    fine.push_back(std::move(next));
  }

  std::vector<const std::vector<detail::BranchGroup> *> levels; // coarsest first
  for (auto it = coarse.rbegin(); it != coarse.rend(); ++it) levels.push_back(&*it);
  for (std::size_t i = 1; i < fine.size(); ++i) levels.push_back(&fine[i]);

  std::vector<int> order;
  const auto place = [&](auto &&self, std::size_t level, const std::vector<int> &block) -> void {
    if (level == levels.size()) {
      order.insert(order.end(), block.begin(), block.end());
      return;
    }
    std::vector<const std::vector<int> *> parts;
    for (const auto &g : *levels[level])
      if (std::binary_search(block.begin(), block.end(), g.members.front())) parts.push_back(&g.members);
    std::sort(parts.begin(), parts.end(), [](auto *a, auto *b) { return a->front() < b->front(); });
    for (const auto *p : parts) self(self, level + 1, *p);
  };
  std::vector<int> all(t.branches.size());
  std::iota(all.begin(), all.end(), 0);
  place(place, 0, all);
  std::vector<std::size_t> position(t.branches.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;

  const auto &chosen = level_offset < 0
                           ? coarse[std::min<std::size_t>(static_cast<std::size_t>(-static_cast<long>(level_offset)), coarse.size() - 1)]
                           : fine[std::min<std::size_t>(static_cast<std::size_t>(level_offset), fine.size() - 1)];
  std::vector<std::size_t> rank(chosen.size());
  std::iota(rank.begin(), rank.end(), 0);
  const auto first = [&](std::size_t gi) {
    std::size_t p = order.size();
    for (int m : chosen[gi].members) p = std::min(p, position[m]);
    return p;
  };
  std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return first(a) < first(b); });

  BranchClustering out;
  out.level_offset = level_offset;
  out.group_count = static_cast<int>(chosen.size());
  out.group_of_branch.assign(t.branches.size(), 0);
  for (std::size_t r = 0; r < rank.size(); ++r)
    for (int m : chosen[rank[r]].members) out.group_of_branch[m] = static_cast<int>(r) + 1;
  return out;
}

} // namespace renovor
