#include "pushsum/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pushsum/errors.hpp"

namespace pushsum {

NodeState initial_state(NodeId node, double x0) {
  NodeState st;
  st.node = node;
  st.x0 = x0;
  st.s = Extended(x0);
  st.w = Extended(1.0);
  st.pi = x0;
  st.round = 0;
  return st;
}

OutgoingShares outgoing_shares(const NodeState& state, const RoundWeights& weights) {
  if (weights.node != state.node || weights.round != state.round) {
    throw Error(ErrorCode::kRoundMismatch,
                "weights for node " + std::to_string(weights.node) + " round " +
                    std::to_string(weights.round) + " applied to node " +
                    std::to_string(state.node) + " round " +
                    std::to_string(state.round));
  }
  OutgoingShares out;
  out.messages.reserve(weights.targets.size() - 1);
  Extended sent_s;
  Extended sent_w;
  for (std::size_t t = 1; t < weights.targets.size(); ++t) {
    ShareMessage msg;
    msg.sender = state.node;
    msg.receiver = weights.targets[t];
    msg.round = state.round;
    msg.s_share = state.s * weights.s[t];
    msg.w_share = state.w * weights.w[t];
    sent_s += msg.s_share;
    sent_w += msg.w_share;
    out.messages.push_back(msg);
  }
  out.retained.s = state.s - sent_s;
  out.retained.w = state.w - sent_w;
  return out;
}

NodeState apply_round(const NodeState& state,
                      std::span<const ShareMessage> received,
                      const RetainedShares& retained,
                      std::span<const NodeId> in_neighbors) {
  std::vector<const ShareMessage*> sorted;
  sorted.reserve(received.size());
  for (const ShareMessage& m : received) {
    if (m.round != state.round || m.receiver != state.node) {
      throw Error(ErrorCode::kRoundMismatch,
                  "node " + std::to_string(state.node) + " at round " +
                      std::to_string(state.round) + " got share for node " +
                      std::to_string(m.receiver) + " round " +
                      std::to_string(m.round));
    }
    sorted.push_back(&m);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const ShareMessage* a, const ShareMessage* b) {
              return a->sender < b->sender;
            });

  std::size_t next = 0;
  Extended s = retained.s;
  Extended w = retained.w;
  for (NodeId j : in_neighbors) {
    if (next >= sorted.size() || sorted[next]->sender != j) {
      throw Error(ErrorCode::kMissingShare,
                  "node " + std::to_string(state.node) + " round " +
                      std::to_string(state.round) + " has no share from in-neighbour " +
                      std::to_string(j));
    }
    s += sorted[next]->s_share;
    w += sorted[next]->w_share;
    ++next;
  }
  if (next != sorted.size()) {
    throw Error(ErrorCode::kMissingShare,
                "node " + std::to_string(state.node) +
                    " got a share from non-neighbour " +
                    std::to_string(sorted[next]->sender));
  }
  if (w.hi == 0.0) {
    throw Error(ErrorCode::kDivisionByZero,
                "w of node " + std::to_string(state.node) + " became zero at round " +
                    std::to_string(state.round + 1));
  }

  NodeState next_state = state;
  next_state.s = s;
  next_state.w = w;
  next_state.pi = (s / w).to_double();
  next_state.round = state.round + 1;
  return next_state;
}

ExecutionTrace run_synchronous(const DirectedGraph& g, std::span<const double> x0,
                               WeightSchedule& schedule, const RunOptions& options,
                               ShareChannel* channel) {
  const std::size_t n = g.size();
  if (x0.size() != n) {
    throw Error(ErrorCode::kInvalidConfig,
                "x0 has " + std::to_string(x0.size()) + " entries for " +
                    std::to_string(n) + " nodes");
  }
  ExecutionTrace trace{g, {x0.begin(), x0.end()}, {}, {}, {}};
  trace.states.reserve(options.iterations + 1);
  trace.weights.reserve(options.iterations);
  trace.messages.reserve(options.iterations);

  std::vector<NodeState> current(n);
  for (NodeId i = 0; i < n; ++i) current[i] = initial_state(i, x0[i]);
  trace.states.push_back(current);

  unsigned calm_rounds = 0;
  std::vector<std::vector<ShareMessage>> inbox(n);
  for (Round k = 0; k < options.iterations; ++k) {
    std::vector<RoundWeights> round_weights;
    std::vector<OutgoingShares> outgoing;
    round_weights.reserve(n);
    outgoing.reserve(n);
    for (NodeId i = 0; i < n; ++i) {
      round_weights.push_back(schedule.next(i, k));
      outgoing.push_back(outgoing_shares(current[i], round_weights.back()));
    }
    if (channel != nullptr) channel->deliver(k, outgoing);

    std::vector<ShareMessage> delivered;
    for (auto& box : inbox) box.clear();
    for (const OutgoingShares& o : outgoing) {
      for (const ShareMessage& m : o.messages) {
        delivered.push_back(m);
        inbox.at(m.receiver).push_back(m);
      }
    }

    std::vector<NodeState> next(n);
    double max_change = 0.0;
    for (NodeId i = 0; i < n; ++i) {
      next[i] = apply_round(current[i], inbox[i], outgoing[i].retained,
                            g.in_neighbors(i));
      max_change = std::max(max_change, std::abs(next[i].pi - current[i].pi));
    }

    trace.weights.push_back(std::move(round_weights));
    trace.messages.push_back(std::move(delivered));
    trace.states.push_back(next);
    current = std::move(next);

    if (options.stop_tol > 0.0 && k + 1 >= options.stop_from) {
      calm_rounds = max_change < options.stop_tol ? calm_rounds + 1 : 0;
      if (calm_rounds >= options.stop_window) break;
    }
  }
  return trace;
}

Eigen::MatrixXd uniform_push_matrix(const DirectedGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (NodeId j = 0; j < g.size(); ++j) {
    const RoundWeights rw = uniform_push_weights(j, 0, g.out_neighbors(j));
    for (std::size_t t = 0; t < rw.targets.size(); ++t) p(rw.targets[t], j) = rw.s[t];
  }
  return p;
}

namespace {

class FixedSchedule final : public WeightSchedule {
 public:
  FixedSchedule(const DirectedGraph& g, const Eigen::MatrixXd& p) : g_(g), p_(p) {}

  RoundWeights next(NodeId node, Round round) override {
    RoundWeights rw;
    rw.node = node;
    rw.round = round;
    rw.targets.push_back(node);
    for (NodeId j : g_.out_neighbors(node)) rw.targets.push_back(j);
    for (NodeId t : rw.targets) rw.s.push_back(p_(t, node));
    rw.w = rw.s;
    return rw;
  }

 private:
  const DirectedGraph& g_;
  const Eigen::MatrixXd& p_;
};

void check_push_matrix(const DirectedGraph& g, const Eigen::MatrixXd& p) {
  const auto n = static_cast<Eigen::Index>(g.size());
  if (p.rows() != n || p.cols() != n) {
    throw Error(ErrorCode::kInvalidConfig, "weight matrix has wrong shape");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool supported =
          i == j || g.can_send(static_cast<NodeId>(j), static_cast<NodeId>(i));
      const double v = p(i, j);
      // A single-node graph has the trivial column [1].
      const bool ok = supported ? (v > 0.0 && (v < 1.0 || n == 1)) : v == 0.0;
      if (!ok) {
        throw Error(ErrorCode::kInvalidConfig,
                    "weight p(" + std::to_string(i) + "," + std::to_string(j) +
                        ") = " + std::to_string(v) + " violates the support rule");
      }
    }
    if (std::abs(p.col(j).sum() - 1.0) > 1e-12) {
      throw Error(ErrorCode::kInvalidConfig,
                  "column " + std::to_string(j) + " does not sum to 1");
    }
  }
}

}  // namespace

ExecutionTrace run_algorithm0(const DirectedGraph& g, std::span<const double> x0,
                              const Eigen::MatrixXd& fixed_weights, Round rounds,
                              bool allow_disconnected) {
  if (!allow_disconnected && !is_strongly_connected(g)) {
    throw Error(ErrorCode::kNotStronglyConnected,
                "push-sum convergence requires a strongly connected graph");
  }
  check_push_matrix(g, fixed_weights);
  FixedSchedule schedule(g, fixed_weights);
  RunOptions options;
  options.iterations = rounds;
  return run_synchronous(g, x0, schedule, options);
}

}  // namespace pushsum
