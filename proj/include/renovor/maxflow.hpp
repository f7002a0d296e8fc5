#pragma once

// Boykov-Kolmogorov augmenting-path max-flow with search-tree reuse, plus a
// general s-t network front end.

#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

namespace renovor {

/// Graph whose terminals are implicit: each node carries a source and a
/// sink capacity (t-links), and node pairs carry n-links.
class MaxFlowGraph {
public:
  explicit MaxFlowGraph(std::size_t node_count, std::size_t expected_edges = 0) : nodes_(node_count)
  {
    arcs_.reserve(2 * expected_edges);
  }

  std::size_t node_count() const { return nodes_.size(); }

  /// Adds source/sink capacities to node i. The common part of the two
  /// saturates immediately and is counted as flow.
  void add_tweights(std::size_t i, double cap_source, double cap_sink)
  {
    check_cap(cap_source);
    check_cap(cap_sink);
    double delta = nodes_[i].tr_cap;
    if (delta > 0) cap_source += delta;
    else cap_sink -= delta;
    flow_ += std::min(cap_source, cap_sink);
    nodes_[i].tr_cap = cap_source - cap_sink;
  }

  void add_edge(std::size_t u, std::size_t v, double cap, double rev_cap)
  {
    if (u == v) return;
    check_cap(cap);
    check_cap(rev_cap);
    const auto a = static_cast<int>(arcs_.size());
    arcs_.push_back({static_cast<int>(v), nodes_[u].first, a + 1, cap});
    nodes_[u].first = a;
    arcs_.push_back({static_cast<int>(u), nodes_[v].first, a, rev_cap});
    nodes_[v].first = a + 1;
  }

  double maxflow()
  {
    init_trees();
    int current = -1;
    while (true) {
      if (current >= 0 && nodes_[current].parent == kNone) current = -1;
      if (current < 0) {
        current = next_active();
        if (current < 0) break;
      }
      const int bridge = grow(current);
      if (bridge >= 0) {
        augment(bridge);
        adopt_orphans();
      } else {
        current = -1;
      }
    }
    return flow_;
  }

  double flow() const { return flow_; }

  /// True when node i ends in the source tree. Nodes not reachable from the
  /// source in the residual graph fall on the sink side.
  bool in_source_segment(std::size_t i) const
  {
    return nodes_[i].parent != kNone && !nodes_[i].is_sink;
  }

private:
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;
  static constexpr int kInfiniteDist = std::numeric_limits<int>::max();

  struct Node {
    int first = -1;  // first outgoing arc
    int parent = kNone;
    long ts = 0;
    int dist = 0;
    bool is_sink = false;
    bool active = false;
    double tr_cap = 0; // > 0: residual from source, < 0: residual to sink
  };

  struct Arc {
    int head;
    int next;
    int sister;
    double r_cap;
  };

  static void check_cap(double c)
  {
    if (!(c >= 0) || !std::isfinite(c)) throw std::invalid_argument("capacities must be finite and >= 0");
  }

  void set_active(int i)
  {
    if (!nodes_[i].active) {
      nodes_[i].active = true;
      active_.push_back(i);
    }
  }

  int next_active()
  {
    while (!active_.empty()) {
      const int i = active_.front();
      active_.pop_front();
      nodes_[i].active = false;
      if (nodes_[i].parent != kNone) return i;
    }
    return -1;
  }

  void init_trees()
  {
    active_.clear();
    orphans_.clear();
    time_ = 0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      Node &n = nodes_[k];
      n.active = false;
      n.ts = 0;
      if (n.tr_cap > 0) {
        n.is_sink = false;
        n.parent = kTerminal;
        n.dist = 1;
        set_active(static_cast<int>(k));
      } else if (n.tr_cap < 0) {
        n.is_sink = true;
        n.parent = kTerminal;
        n.dist = 1;
        set_active(static_cast<int>(k));
      } else {
        n.parent = kNone;
      }
    }
  }

  /// Expands the tree of node i; returns an arc from the source tree to the
  /// sink tree if the trees touch, -1 otherwise.
  int grow(int i)
  {
    Node &ni = nodes_[i];
    if (!ni.is_sink) {
      for (int a = ni.first; a >= 0; a = arcs_[a].next) {
        if (arcs_[a].r_cap <= 0) continue;
        const int j = arcs_[a].head;
        Node &nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.is_sink = false;
          nj.parent = arcs_[a].sister;
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
          set_active(j);
        } else if (nj.is_sink) {
          set_active(i);
          return a;
        } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
          nj.parent = arcs_[a].sister;
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
        }
      }
    } else {
      for (int a = ni.first; a >= 0; a = arcs_[a].next) {
        const int sis = arcs_[a].sister;
        if (arcs_[sis].r_cap <= 0) continue;
        const int j = arcs_[a].head;
        Node &nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.is_sink = true;
          nj.parent = sis;
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
          set_active(j);
        } else if (!nj.is_sink) {
          set_active(i);
          return sis;
        } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
          nj.parent = sis;
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
        }
      }
    }
    return -1;
  }

  void make_orphan(int i)
  {
    nodes_[i].parent = kOrphan;
    orphans_.push_back(i);
  }

  void augment(int bridge)
  {
    double bottleneck = arcs_[bridge].r_cap;
    // source side: walk from the tail of the bridge up to the source
    for (int i = arcs_[arcs_[bridge].sister].head;;) {
      const int a = nodes_[i].parent;
      if (a == kTerminal) {
        bottleneck = std::min(bottleneck, nodes_[i].tr_cap);
        break;
      }
      bottleneck = std::min(bottleneck, arcs_[arcs_[a].sister].r_cap);
      i = arcs_[a].head;
    }
    for (int i = arcs_[bridge].head;;) {
      const int a = nodes_[i].parent;
      if (a == kTerminal) {
        bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);
        break;
      }
      bottleneck = std::min(bottleneck, arcs_[a].r_cap);
      i = arcs_[a].head;
    }

    arcs_[arcs_[bridge].sister].r_cap += bottleneck;
    arcs_[bridge].r_cap -= bottleneck;
    for (int i = arcs_[arcs_[bridge].sister].head;;) {
      const int a = nodes_[i].parent;
      if (a == kTerminal) {
        nodes_[i].tr_cap -= bottleneck;
        if (nodes_[i].tr_cap <= 0) make_orphan(i);
        break;
      }
      arcs_[a].r_cap += bottleneck;
      arcs_[arcs_[a].sister].r_cap -= bottleneck;
      if (arcs_[arcs_[a].sister].r_cap <= 0) make_orphan(i);
      i = arcs_[a].head;
    }
    for (int i = arcs_[bridge].head;;) {
      const int a = nodes_[i].parent;
      if (a == kTerminal) {
        nodes_[i].tr_cap += bottleneck;
        if (nodes_[i].tr_cap >= 0) make_orphan(i);
        break;
      }
      arcs_[arcs_[a].sister].r_cap += bottleneck;
      arcs_[a].r_cap -= bottleneck;
      if (arcs_[a].r_cap <= 0) make_orphan(i);
      i = arcs_[a].head;
    }
    flow_ += bottleneck;
  }

  void adopt_orphans()
  {
    while (!orphans_.empty()) {
      const int i = orphans_.front();
      orphans_.pop_front();
      ++time_;
      process_orphan(i);
    }
  }

  void process_orphan(int i)
  {
    const bool sink_tree = nodes_[i].is_sink;
    int best_arc = kNone;
    int best_dist = kInfiniteDist;
    for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
      // residual capacity towards i from j (source tree) or from i to j (sink tree)
      const double cap = sink_tree ? arcs_[a0].r_cap : arcs_[arcs_[a0].sister].r_cap;
      if (cap <= 0) continue;
      int j = arcs_[a0].head;
      if (nodes_[j].is_sink != sink_tree || nodes_[j].parent == kNone) continue;
      int d = 0;
      while (true) {
        if (nodes_[j].ts == time_) {
          d += nodes_[j].dist;
          break;
        }
        const int a = nodes_[j].parent;
        ++d;
        if (a == kTerminal) {
          nodes_[j].ts = time_;
          nodes_[j].dist = 1;
          break;
        }
        if (a == kOrphan) {
          d = kInfiniteDist;
          break;
        }
        j = arcs_[a].head;
      }
      if (d < kInfiniteDist) {
        if (d < best_dist) {
          best_arc = a0;
          best_dist = d;
        }
        for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
          nodes_[j].ts = time_;
          nodes_[j].dist = d--;
        }
      }
    }

    if (best_arc != kNone) {
      nodes_[i].parent = best_arc;
      nodes_[i].ts = time_;
      nodes_[i].dist = best_dist + 1;
      return;
    }

    nodes_[i].parent = kNone;
    for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
      const int j = arcs_[a0].head;
      Node &nj = nodes_[j];
      if (nj.is_sink != sink_tree || nj.parent == kNone) continue;
      const double cap = sink_tree ? arcs_[a0].r_cap : arcs_[arcs_[a0].sister].r_cap;
      if (cap > 0) set_active(j);
      if (nj.parent != kTerminal && nj.parent != kOrphan && arcs_[nj.parent].head == i) make_orphan(j);
    }
  }

  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  std::deque<int> active_;
  std::deque<int> orphans_;
  long time_ = 0;
  double flow_ = 0;
};

struct FlowArc {
  std::size_t from;
  std::size_t to;
  double capacity;
};

/// Explicit s-t network: source and sink are ordinary node ids.
struct FlowNetwork {
  std::size_t node_count = 0;
  std::size_t source = 0;
  std::size_t sink = 1;
  std::vector<FlowArc> arcs;
};

struct MinCut {
  double flow = 0;
  std::vector<bool> source_side; // indexed by node id; always includes the source
};

inline MinCut max_flow_min_cut(const FlowNetwork &net)
{
  if (net.source >= net.node_count || net.sink >= net.node_count || net.source == net.sink)
    throw std::invalid_argument("flow network needs distinct source and sink nodes");
  MaxFlowGraph g(net.node_count, net.arcs.size());
  double direct = 0;
  for (const auto &a : net.arcs) {
    if (a.from >= net.node_count || a.to >= net.node_count)
      throw std::invalid_argument("flow network arc references a missing node");
    if (!(a.capacity >= 0) || !std::isfinite(a.capacity))
      throw std::invalid_argument("capacities must be finite and >= 0");
    if (a.from == a.to || a.to == net.source || a.from == net.sink) continue;
    if (a.from == net.source && a.to == net.sink) direct += a.capacity;
    else if (a.from == net.source) g.add_tweights(a.to, a.capacity, 0);
    else if (a.to == net.sink) g.add_tweights(a.from, 0, a.capacity);
    else g.add_edge(a.from, a.to, a.capacity, 0);
  }
  MinCut cut;
  cut.flow = g.maxflow() + direct;
  cut.source_side.assign(net.node_count, false);
  for (std::size_t i = 0; i < net.node_count; ++i)
    cut.source_side[i] = i != net.sink && (i == net.source || g.in_source_segment(i));
  return cut;
}

} // namespace renovor
