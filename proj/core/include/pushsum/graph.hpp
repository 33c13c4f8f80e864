#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pushsum {

using NodeId = std::uint32_t;
using Round = std::uint32_t;

/// An element (i, j) of the edge set.
///
/// DIRECTION CONVENTION: Edge{receiver = i, sender = j} means node j can send
/// messages to node i. This is the reverse of the "from -> to" pair most
/// graph libraries use, so the fields are named rather than positional.
/// Code outside this module should only use out_neighbors()/in_neighbors().
struct Edge {
  NodeId receiver;
  NodeId sender;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Static directed communication graph on nodes 0..N-1. Immutable after
/// construction; neighbour lists are sorted ascending.
class DirectedGraph {
 public:
  /// Throws Error(kInvalidGraph) on self-edges, out-of-range indices or
  /// n_nodes == 0. Duplicate edges are collapsed.
  DirectedGraph(std::size_t n_nodes, std::vector<Edge> edges);

  std::size_t size() const { return out_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }

  /// Nodes that can receive from `node` (N_i^out).
  std::span<const NodeId> out_neighbors(NodeId node) const;
  /// Nodes that can send to `node` (N_i^in).
  std::span<const NodeId> in_neighbors(NodeId node) const;

  std::size_t out_degree(NodeId node) const { return out_neighbors(node).size(); }
  std::size_t in_degree(NodeId node) const { return in_neighbors(node).size(); }

  /// True when `from` can send to `to`.
  bool can_send(NodeId from, NodeId to) const;

  friend bool operator==(const DirectedGraph& a, const DirectedGraph& b) {
    return a.edges_ == b.edges_ && a.size() == b.size();
  }

 private:
  void check(NodeId node) const;

  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<std::vector<NodeId>> in_;
};

bool is_strongly_connected(const DirectedGraph& g);

std::size_t max_out_degree(const DirectedGraph& g);

/// The 5-node strongly connected graph used for desk-scale experiments:
/// 0->1, 0->4, 1->2, 2->3, 2->4, 3->0, 3->1, 4->2. Node 0 has
/// N^out = {1, 4} and N^in = {3}.
DirectedGraph reference_graph();

}  // namespace pushsum
