#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pushsum/extended.hpp"
#include "pushsum/graph.hpp"
#include "pushsum/weights.hpp"

namespace pushsum {

/// Push-sum variables of one node at the start of round `round`.
struct NodeState {
  NodeId node = 0;
  double x0 = 0.0;
  Extended s;
  Extended w;
  double pi = 0.0;
  Round round = 0;
};

/// s = x0, w = 1, pi = x0, round 0.
NodeState initial_state(NodeId node, double x0);

struct ShareMessage {
  NodeId sender = 0;
  NodeId receiver = 0;
  Round round = 0;
  Extended s_share;
  Extended w_share;
};

/// The part of (s, w) a node keeps for itself in a round.
struct RetainedShares {
  Extended s;
  Extended w;
};

struct OutgoingShares {
  std::vector<ShareMessage> messages;  // one per out-neighbour, ascending receiver
  RetainedShares retained;
};

/// Splits (s, w) according to `weights`. The retained part is the remainder
/// after subtracting the outgoing shares, so the split conserves s and w
/// exactly up to double-double rounding. Throws kRoundMismatch if `weights`
/// belongs to another node or round.
OutgoingShares outgoing_shares(const NodeState& state, const RoundWeights& weights);

/// Push-sum update: sums the retained part and one share from each
/// in-neighbour (in ascending sender order) and advances the round.
/// Throws kRoundMismatch for shares from another round or addressed to
/// another node, kMissingShare when an in-neighbour's share is absent or an
/// unexpected sender appears, and kDivisionByZero when the new w is zero.
NodeState apply_round(const NodeState& state,
                      std::span<const ShareMessage> received,
                      const RetainedShares& retained,
                      std::span<const NodeId> in_neighbors);

/// Produces each node's weights round by round. Calls arrive in increasing
/// round order, nodes ascending within a round.
class WeightSchedule {
 public:
  virtual ~WeightSchedule() = default;
  virtual RoundWeights next(NodeId node, Round round) = 0;
};

/// Transport hook between send and receive. Implementations may rewrite the
/// messages (and the senders' retained parts) in place, e.g. to quantize and
/// encrypt/decrypt them, and may record what crossed the wire.
class ShareChannel {
 public:
  virtual ~ShareChannel() = default;
  virtual void deliver(Round round, std::vector<OutgoingShares>& per_node) = 0;
};

/// Complete record of a synchronous run. states[k][i] is node i at the start
/// of round k (so states has one more entry than weights/messages);
/// weights[k][i] and messages[k] are what round k used and delivered.
struct ExecutionTrace {
  DirectedGraph graph;
  std::vector<double> x0;
  std::vector<std::vector<NodeState>> states;
  std::vector<std::vector<RoundWeights>> weights;
  std::vector<std::vector<ShareMessage>> messages;

  Round iterations() const { return static_cast<Round>(weights.size()); }
};

struct RunOptions {
  Round iterations = 0;
  /// Stop once max_i |pi_i(k+1) - pi_i(k)| < stop_tol for stop_window
  /// consecutive rounds; 0 disables. Only rounds whose new state index is
  /// >= stop_from are counted.
  double stop_tol = 0.0;
  Round stop_from = 0;
  unsigned stop_window = 10;
};

/// Lockstep engine: in every round all nodes send, then all nodes apply.
ExecutionTrace run_synchronous(const DirectedGraph& g, std::span<const double> x0,
                               WeightSchedule& schedule, const RunOptions& options,
                               ShareChannel* channel = nullptr);

/// P with p_ij = 1/(D_j^out + 1) on the support (edges plus diagonal).
Eigen::MatrixXd uniform_push_matrix(const DirectedGraph& g);

/// Conventional push-sum with a fixed column-stochastic matrix for
/// `rounds` iterations. Throws kNotStronglyConnected unless
/// allow_disconnected, and kInvalidConfig if the matrix is not
/// column-stochastic with entries in (0, 1) exactly on the support.
ExecutionTrace run_algorithm0(const DirectedGraph& g, std::span<const double> x0,
                              const Eigen::MatrixXd& fixed_weights, Round rounds,
                              bool allow_disconnected = false);

}  // namespace pushsum
