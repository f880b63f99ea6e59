#pragma once

#include <deque>
#include <vector>

namespace mrstitch {

// s-t min-cut graph solved by augmenting paths with search-tree reuse
// (Boykov-Kolmogorov). Capacities must be nonnegative except terminal
// weights, where only the difference source-minus-sink matters.
class MaxFlowGraph {
 public:
  explicit MaxFlowGraph(int node_reserve = 0, int edge_reserve = 0);

  int add_nodes(int count);
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // Adds capacity source->i and i->sink.
  void add_tweights(int i, double cap_source, double cap_sink);
  // Adds edge i->j with capacity `cap` and j->i with `rev_cap`.
  void add_edge(int i, int j, double cap, double rev_cap);

  double maxflow();
  // Free nodes (reachable from neither tree) report the source side.
  bool in_source_segment(int i) const;

 private:
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;

  struct Node {
    int first = kNone;    // first outgoing arc
    int parent = kNone;   // arc to parent, or a sentinel
    int ts = 0;
    int dist = 0;
    bool is_sink = false;
    bool active = false;
    double tr_cap = 0.0;  // >0: residual from source, <0: residual to sink
  };
  struct Arc {
    int head;
    int next;
    double r_cap;
  };

  int sister(int a) const { return a ^ 1; }
  void set_active(int i);
  int next_active();
  void augment(int middle);
  void process_orphan(int i);

  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  std::deque<int> active_;
  std::deque<int> orphans_;
  double flow_ = 0.0;
  int time_ = 0;
};

}  // namespace mrstitch
