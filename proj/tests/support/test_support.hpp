#pragma once

#include <cstdint>
#include <vector>

#include "pushsum/graph.hpp"
#include "pushsum/rng.hpp"

namespace pushsum::testing {

/// Random directed graph on n nodes; each ordered pair gets an edge with
/// probability p.
DirectedGraph random_graph(std::size_t n, double p, Rng& rng);

/// Random strongly connected graph: a random Hamiltonian cycle plus extra
/// random edges with probability p.
DirectedGraph random_strong_graph(std::size_t n, double p, Rng& rng);

/// Independent oracle: BFS from every node over the adjacency lists.
bool reachability_oracle_strong(const DirectedGraph& g);

/// Graph from "from -> to" pairs, which reads more naturally in tests.
DirectedGraph from_links(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& links);

/// A TCP port that was free a moment ago.
std::uint16_t free_port();

}  // namespace pushsum::testing
