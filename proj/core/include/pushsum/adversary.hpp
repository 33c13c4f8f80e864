#pragma once

#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pushsum/consensus.hpp"
#include "pushsum/paillier.hpp"

namespace pushsum {

/// One member's own (s, w) at the start of a round.
struct ObservedState {
  Round round = 0;
  Extended s;
  Extended w;
};

/// Everything a set of colluding honest-but-curious nodes can see: their
/// own states, the weights they chose, every share they sent or received,
/// and the public facts (topology, K, w_m(k) = 1 for k <= K+1).
/// Attacks take only this type; ground-truth node state never reaches them.
struct AdversaryView {
  DirectedGraph topology;
  Round big_k = 0;
  std::vector<NodeId> members;  // ascending
  Round rounds_observed = 0;    // rounds 0..rounds_observed-1 are covered
  std::map<NodeId, std::vector<ObservedState>> state_log;
  std::vector<RoundWeights> member_weights;
  std::vector<ShareMessage> sent_log;
  std::vector<ShareMessage> recv_log;

  bool is_member(NodeId node) const;
};

/// Extracts the view of `members` from a full trace.
AdversaryView collect_view(const ExecutionTrace& trace, std::span<const NodeId> members,
                           Round big_k);

/// Largest absolute difference between two views of the same member set,
/// over states, member weights and all logged shares. Infinity when the
/// views do not line up structurally.
double view_discrepancy(const AdversaryView& a, const AdversaryView& b);

struct PlainPayload {
  Extended s_share;
  Extended w_share;
};

struct EncryptedPayload {
  paillier::Ciphertext s_share;
  paillier::Ciphertext w_share;
};

/// One share pair as seen on the wire.
struct TappedShare {
  NodeId sender = 0;
  NodeId receiver = 0;
  Round round = 0;
  std::variant<PlainPayload, EncryptedPayload> payload;
};

/// What an external wiretapper holds: every link's traffic, the topology,
/// the protocol constants and the flooded public keys. No private keys and
/// no node-internal state.
struct EavesdropperLog {
  DirectedGraph topology;
  WeightParams params;
  std::map<NodeId, paillier::PublicKey> public_keys;
  std::vector<TappedShare> records;

  /// Shares readable without a private key (the plaintext records).
  std::vector<ShareMessage> readable_shares() const;
};

/// Algorithm-0 leak: each member reads x_j^0 = s_share / w_share off the
/// round-0 share of every in-neighbour j outside the coalition. Throws
/// kTraceIncomplete when a round-0 share is missing or carries w_share = 0
/// (not an Algorithm-0 trace).
std::map<NodeId, double> attack_pushsum_baseline(const AdversaryView& view);

/// Exact recovery of the target's trajectory from the shares on all of its
/// links. w(k) for k = 0..R and s(k) for k >= K+1 are rebuilt; x0 is the
/// back-solved s(0).
struct Reconstruction {
  double x0 = 0.0;
  std::vector<Extended> w;         // w(0..rounds_observed)
  std::vector<Extended> s_tail;    // s(K+1..rounds_observed-1)
};

/// Single adversary j that is the target's only in- and out-neighbour.
/// Throws kTopologyConditionUnmet otherwise, kTraceIncomplete when the view
/// stops before round K+1.
double attack_sole_neighbor(const AdversaryView& view, NodeId target);

/// Coalition containing every in- and out-neighbour of the target.
double attack_colluding_full_neighborhood(const AdversaryView& view, NodeId target);
Reconstruction reconstruct_full_neighborhood(const AdversaryView& view, NodeId target);

/// A wiretapper of plaintext traffic sees every link, so it can run the
/// same telescoping recovery on any node. Throws kTraceIncomplete when the
/// target's traffic is encrypted.
double attack_eavesdropper(const EavesdropperLog& log, NodeId target);

/// Linear system a coalition builds about a target whose neighbourhood it
/// does not fully cover. Unknown layout: s(0..M+1), ds(0..M), w(K+2..M+1),
/// dw(K+1..M), where ds(k)/dw(k) aggregate the shares on target links the
/// coalition cannot see.
struct LeastSquaresSystem {
  Round m = 0;
  Round big_k = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> a;
  Eigen::VectorXd b;

  Eigen::Index rows() const { return a.rows(); }
  Eigen::Index cols() const { return a.cols(); }
  Eigen::Index s_col(Round k) const;
  Eigen::Index ds_col(Round k) const;
  Eigen::Index w_col(Round k) const;
  Eigen::Index dw_col(Round k) const;
  std::vector<std::string> labels() const;
};

/// Throws kTraceIncomplete unless the view covers rounds 0..m and m >= K+1,
/// and kTopologyConditionUnmet when the coalition sees none of the target's
/// outgoing links or contains the target.
LeastSquaresSystem build_least_squares_system(const AdversaryView& view, NodeId target,
                                              Round m);

/// Minimum-norm solution of a full-row-rank system, via A^T (A A^T)^{-1} b.
Eigen::VectorXd solve_min_norm(const LeastSquaresSystem& system);

/// s(0) component of the minimum-norm solution.
double attack_least_squares(const AdversaryView& view, NodeId target, Round m);

/// Alternative execution that reproduces a coalition's view exactly while
/// the target starts from alt_x0. The helper (a neighbour of the target
/// outside the coalition) absorbs the difference; only round-0 s-weights of
/// target and helper change.
struct IndistinguishabilityWitness {
  enum class Case { kHelperIsOutNeighbor, kHelperIsInNeighbor };

  NodeId target = 0;
  NodeId helper = 0;
  Case which = Case::kHelperIsOutNeighbor;
  std::vector<double> x0;
  RoundWeights target_round0;
  RoundWeights helper_round0;
};

/// Throws kTopologyConditionUnmet when helper is not a neighbour of target or
/// either of them belongs to `adversary`, and kDegenerateDenominator when
/// alt_x0 == 0 or x_target + x_helper - alt_x0 == 0. When the helper is both
/// an in- and out-neighbour the out-neighbour construction is used.
IndistinguishabilityWitness build_indistinguishability_witness(
    const ExecutionTrace& trace, NodeId target, double alt_x0, NodeId helper,
    std::span<const NodeId> adversary);

}  // namespace pushsum
