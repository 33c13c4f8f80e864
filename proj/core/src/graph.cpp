#include "pushsum/graph.hpp"

#include <algorithm>
#include <string>

#include "pushsum/errors.hpp"

namespace pushsum {

DirectedGraph::DirectedGraph(std::size_t n_nodes, std::vector<Edge> edges)
    : edges_(std::move(edges)), out_(n_nodes), in_(n_nodes) {
  if (n_nodes == 0) throw Error(ErrorCode::kInvalidGraph, "graph has no nodes");
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const Edge& e : edges_) {
    if (e.receiver >= n_nodes || e.sender >= n_nodes) {
      throw Error(ErrorCode::kInvalidGraph,
                  "edge (" + std::to_string(e.receiver) + ", " +
                      std::to_string(e.sender) + ") outside [0, " +
                      std::to_string(n_nodes) + ")");
    }
    if (e.receiver == e.sender) {
      throw Error(ErrorCode::kInvalidGraph,
                  "self-edge at node " + std::to_string(e.receiver));
    }
    out_[e.sender].push_back(e.receiver);
    in_[e.receiver].push_back(e.sender);
  }
  for (auto& v : out_) std::sort(v.begin(), v.end());
  for (auto& v : in_) std::sort(v.begin(), v.end());
}

void DirectedGraph::check(NodeId node) const {
  if (node >= size()) {
    throw Error(ErrorCode::kInvalidGraph,
                "node " + std::to_string(node) + " not in graph");
  }
}

std::span<const NodeId> DirectedGraph::out_neighbors(NodeId node) const {
  check(node);
  return out_[node];
}

std::span<const NodeId> DirectedGraph::in_neighbors(NodeId node) const {
  check(node);
  return in_[node];
}

bool DirectedGraph::can_send(NodeId from, NodeId to) const {
  const auto out = out_neighbors(from);
  return std::binary_search(out.begin(), out.end(), to);
}

namespace {

std::size_t reach_count(const DirectedGraph& g, bool forward) {
  std::vector<char> seen(g.size(), 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    for (NodeId u : forward ? g.out_neighbors(v) : g.in_neighbors(v)) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count;
}

}  // namespace

// Strongly connected iff node 0 reaches everyone and everyone reaches node 0.
bool is_strongly_connected(const DirectedGraph& g) {
  return reach_count(g, true) == g.size() && reach_count(g, false) == g.size();
}

std::size_t max_out_degree(const DirectedGraph& g) {
  std::size_t best = 0;
  for (NodeId i = 0; i < g.size(); ++i) best = std::max(best, g.out_degree(i));
  return best;
}

DirectedGraph reference_graph() {
  // Edge{receiver, sender}.
  return DirectedGraph(5, {{1, 0}, {4, 0}, {2, 1}, {3, 2}, {4, 2},
                           {0, 3}, {1, 3}, {2, 4}});
}

}  // namespace pushsum
