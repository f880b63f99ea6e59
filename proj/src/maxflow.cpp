#include "mrstitch/maxflow.hpp"

#include <limits>

namespace mrstitch {

MaxFlowGraph::MaxFlowGraph(int node_reserve, int edge_reserve) {
  nodes_.reserve(static_cast<std::size_t>(node_reserve));
  arcs_.reserve(2 * static_cast<std::size_t>(edge_reserve));
}

int MaxFlowGraph::add_nodes(int count) {
  const int first = node_count();
  nodes_.resize(nodes_.size() + static_cast<std::size_t>(count));
  return first;
}

void MaxFlowGraph::add_tweights(int i, double cap_source, double cap_sink) {
  const double delta = nodes_[i].tr_cap;
  if (delta > 0) {
    cap_source += delta;
  } else {
    cap_sink -= delta;
  }
  flow_ += cap_source < cap_sink ? cap_source : cap_sink;
  nodes_[i].tr_cap = cap_source - cap_sink;
}

void MaxFlowGraph::add_edge(int i, int j, double cap, double rev_cap) {
  const int a = static_cast<int>(arcs_.size());
  arcs_.push_back({j, nodes_[i].first, cap});
  arcs_.push_back({i, nodes_[j].first, rev_cap});
  nodes_[i].first = a;
  nodes_[j].first = a + 1;
}

void MaxFlowGraph::set_active(int i) {
  if (!nodes_[i].active) {
    nodes_[i].active = true;
    active_.push_back(i);
  }
}

int MaxFlowGraph::next_active() {
  while (!active_.empty()) {
    const int i = active_.front();
    active_.pop_front();
    nodes_[i].active = false;
    if (nodes_[i].parent != kNone) return i;
  }
  return kNone;
}

void MaxFlowGraph::augment(int middle) {
  double bottleneck = arcs_[middle].r_cap;
  int i;
  // Source tree: walk from the middle arc's tail to the source.
  for (i = arcs_[sister(middle)].head;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[sister(a)].r_cap);
    i = arcs_[a].head;
  }
  bottleneck = std::min(bottleneck, nodes_[i].tr_cap);
  // Sink tree.
  for (i = arcs_[middle].head;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[a].r_cap);
    i = arcs_[a].head;
  }
  bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);

  arcs_[sister(middle)].r_cap += bottleneck;
  arcs_[middle].r_cap -= bottleneck;
  for (i = arcs_[sister(middle)].head;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    arcs_[a].r_cap += bottleneck;
    arcs_[sister(a)].r_cap -= bottleneck;
    if (arcs_[sister(a)].r_cap <= 0) {
      nodes_[i].parent = kOrphan;
      orphans_.push_front(i);
    }
    i = arcs_[a].head;
  }
  nodes_[i].tr_cap -= bottleneck;
  if (nodes_[i].tr_cap <= 0) {
    nodes_[i].parent = kOrphan;
    orphans_.push_front(i);
  }
  for (i = arcs_[middle].head;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    arcs_[sister(a)].r_cap += bottleneck;
    arcs_[a].r_cap -= bottleneck;
    if (arcs_[a].r_cap <= 0) {
      nodes_[i].parent = kOrphan;
      orphans_.push_front(i);
    }
    i = arcs_[a].head;
  }
  nodes_[i].tr_cap += bottleneck;
  if (nodes_[i].tr_cap >= 0) {
    nodes_[i].parent = kOrphan;
    orphans_.push_front(i);
  }
  flow_ += bottleneck;
}

void MaxFlowGraph::process_orphan(int i) {
  constexpr int kInfiniteDist = std::numeric_limits<int>::max();
  const bool sink = nodes_[i].is_sink;
  int best_arc = kNone;
  int best_dist = kInfiniteDist;
  for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
    // Residual capacity towards i along the tree direction.
    const double cap = sink ? arcs_[a0].r_cap : arcs_[sister(a0)].r_cap;
    if (cap <= 0) continue;
    int j = arcs_[a0].head;
    if (nodes_[j].is_sink != sink || nodes_[j].parent == kNone) continue;
    int d = 0;
    for (;;) {
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
  nodes_[i].parent = best_arc;
  if (best_arc != kNone) {
    nodes_[i].ts = time_;
    nodes_[i].dist = best_dist + 1;
    return;
  }
  for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
    const int j = arcs_[a0].head;
    const int a = nodes_[j].parent;
    if (nodes_[j].is_sink != sink || a == kNone) continue;
    const double cap = sink ? arcs_[a0].r_cap : arcs_[sister(a0)].r_cap;
    if (cap > 0) set_active(j);
    if (a != kTerminal && a != kOrphan && arcs_[a].head == i) {
      nodes_[j].parent = kOrphan;
      orphans_.push_back(j);
    }
  }
}

double MaxFlowGraph::maxflow() {
  active_.clear();
  orphans_.clear();
  time_ = 0;
  for (int i = 0; i < node_count(); ++i) {
    Node& n = nodes_[i];
    n.active = false;
    n.ts = 0;
    if (n.tr_cap > 0) {
      n.is_sink = false;
      n.parent = kTerminal;
      n.dist = 1;
      set_active(i);
    } else if (n.tr_cap < 0) {
      n.is_sink = true;
      n.parent = kTerminal;
      n.dist = 1;
      set_active(i);
    } else {
      n.parent = kNone;
    }
  }

  int current = kNone;
  for (;;) {
    int i = kNone;
    if (current != kNone) {
      nodes_[current].active = false;
      if (nodes_[current].parent != kNone) i = current;
    }
    if (i == kNone) {
      i = next_active();
      if (i == kNone) break;
    }

    int middle = kNone;
    Node& ni = nodes_[i];
    if (!ni.is_sink) {
      for (int a = ni.first; a != kNone; a = arcs_[a].next) {
        if (arcs_[a].r_cap <= 0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.is_sink = false;
          nj.parent = sister(a);
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
          set_active(j);
        } else if (nj.is_sink) {
          middle = a;
          break;
        } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
          nj.parent = sister(a);
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
        }
      }
    } else {
      for (int a = ni.first; a != kNone; a = arcs_[a].next) {
        if (arcs_[sister(a)].r_cap <= 0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.is_sink = true;
          nj.parent = sister(a);
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
          set_active(j);
        } else if (!nj.is_sink) {
          middle = sister(a);
          break;
        } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
          nj.parent = sister(a);
          nj.ts = ni.ts;
          nj.dist = ni.dist + 1;
        }
      }
    }

    ++time_;
    if (middle != kNone) {
      // Keep growing from i next round; mark it so it is not re-queued.
      nodes_[i].active = true;
      current = i;
      augment(middle);
      while (!orphans_.empty()) {
        const int o = orphans_.front();
        orphans_.pop_front();
        process_orphan(o);
      }
    } else {
      current = kNone;
    }
  }
  return flow_;
}

bool MaxFlowGraph::in_source_segment(int i) const {
  const Node& n = nodes_[i];
  return n.parent == kNone || !n.is_sink;
}

}  // namespace mrstitch
