#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pushsum/graph.hpp"
#include "pushsum/rng.hpp"

namespace pushsum {

/// Protocol constants known to every node.
struct WeightParams {
  Round big_k = 1;             // last round of the obfuscating phase
  double epsilon = 0.01;       // lower bound on phase-B weights
  double phase_a_range = 10.0; // phase-A draws come from (-B, B)
};

/// Phase A covers rounds k <= K: arbitrary real s-weights, identity w-weights.
inline bool in_phase_a(Round k, const WeightParams& p) { return k <= p.big_k; }

/// Largest admissible epsilon for a node that splits over `m` recipients
/// (itself included): epsilon must stay strictly below 1/m.
inline double epsilon_bound(std::size_t m) { return 1.0 / static_cast<double>(m); }

/// Throws Error(kInvalidEpsilon) unless 0 < epsilon < 1/(max out-degree + 1)
/// and phase_a_range > 0.
void validate(const WeightParams& params, const DirectedGraph& g);

/// One node's outgoing coupling weights for one round: column `node` of
/// P_s(k) and P_w(k), restricted to its support. targets[0] is the node
/// itself; the rest are its out-neighbours in ascending order.
struct RoundWeights {
  NodeId node = 0;
  Round round = 0;
  std::vector<NodeId> targets;
  std::vector<double> s;
  std::vector<double> w;

  /// Weight p_{target,node}; zero when target is outside the support.
  double s_weight(NodeId target) const;
  double w_weight(NodeId target) const;
};

/// Draws the weights of Algorithm 1 for `node` at `round`.
///
/// Phase A: m values uniform on (-B, B), shifted by the common correction
/// (1 - sum)/m; w is the indicator of self. Phase B: a uniform simplex point
/// pushed through phase_b_map, with w = s. In both phases the self weight is
/// recomputed as 1 minus the others so the column sums to one as tightly as
/// doubles allow.
RoundWeights generate_round_weights(NodeId node, Round round,
                                    std::span<const NodeId> out_neighbors,
                                    const WeightParams& params, Rng& rng);

/// Affine map from the unit simplex onto {p : p_j > epsilon, sum p = 1}:
/// p_j = epsilon + d_j (1 - m epsilon).
std::vector<double> phase_b_map(std::span<const double> simplex_point,
                                double epsilon);

/// Uniform point on the (m-1)-simplex via sorted uniform gaps.
std::vector<double> sample_simplex(std::size_t m, Rng& rng);

/// Signature shared by the real generator and test doubles.
using WeightGenerator = std::function<RoundWeights(
    NodeId, Round, std::span<const NodeId>, const WeightParams&, Rng&)>;

/// Fixed weights 1/(D_j^out + 1) on every supported entry of column j.
RoundWeights uniform_push_weights(NodeId node, Round round,
                                  std::span<const NodeId> out_neighbors);

}  // namespace pushsum
