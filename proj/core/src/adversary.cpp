#include "pushsum/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SparseCholesky>

#include "pushsum/errors.hpp"

namespace pushsum {

namespace {

std::string node_name(NodeId n) { return "node " + std::to_string(n); }

bool contains(std::span<const NodeId> set, NodeId n) {
  return std::find(set.begin(), set.end(), n) != set.end();
}

double rel_diff(const Extended& a, const Extended& b) {
  const double d = (a - b).to_double();
  return std::abs(d) / std::max(1.0, std::abs(a.to_double()));
}

/// Shares on the target's links grouped by round.
struct LinkTraffic {
  Round rounds = 0;
  std::vector<std::vector<const ShareMessage*>> inbound;
  std::vector<std::vector<const ShareMessage*>> outbound;
};

LinkTraffic group_links(std::span<const ShareMessage> shares, NodeId target, Round rounds) {
  LinkTraffic t;
  t.rounds = rounds;
  t.inbound.resize(rounds);
  t.outbound.resize(rounds);
  for (const ShareMessage& m : shares) {
    if (m.round >= rounds) continue;
    if (m.receiver == target) t.inbound[m.round].push_back(&m);
    if (m.sender == target) t.outbound[m.round].push_back(&m);
  }
  return t;
}

Extended ratio_of(const ShareMessage& m) {
  if (m.w_share == Extended(0.0)) {
    throw Error(ErrorCode::kDivisionByZero,
                "share from " + node_name(m.sender) + " at round " + std::to_string(m.round) +
                    " has zero w component");
  }
  return m.s_share / m.w_share;
}

/// Telescoping recovery when every link of the target is visible.
Reconstruction telescope(const LinkTraffic& t, std::size_t in_degree, std::size_t out_degree,
                         Round big_k, NodeId target) {
  if (t.rounds < big_k + 2) {
    throw Error(ErrorCode::kTraceIncomplete,
                "recovery of " + node_name(target) + " needs rounds 0.." +
                    std::to_string(big_k + 1) + ", only " + std::to_string(t.rounds) +
                    " observed");
  }
  for (Round k = 0; k < t.rounds; ++k) {
    if (t.inbound[k].size() != in_degree || t.outbound[k].size() != out_degree) {
      throw Error(ErrorCode::kTraceIncomplete,
                  "traffic of " + node_name(target) + " at round " + std::to_string(k) +
                      " is incomplete");
    }
  }

  std::vector<Extended> net_s(t.rounds);
  Reconstruction r;
  r.w.assign(t.rounds + 1, Extended(0.0));
  r.w[0] = Extended(1.0);
  for (Round k = 0; k < t.rounds; ++k) {
    Extended ds, dw;
    for (const ShareMessage* m : t.inbound[k]) {
      ds += m->s_share;
      dw += m->w_share;
    }
    for (const ShareMessage* m : t.outbound[k]) {
      ds -= m->s_share;
      dw -= m->w_share;
    }
    net_s[k] = ds;
    r.w[k + 1] = r.w[k] + dw;
  }

  for (Round k = big_k + 1; k < t.rounds; ++k) {
    r.s_tail.push_back(ratio_of(*t.outbound[k].front()) * r.w[k]);
  }
  Extended s0 = r.s_tail.front();
  for (Round l = 0; l <= big_k; ++l) s0 -= net_s[l];
  r.x0 = s0.to_double();
  return r;
}

Reconstruction reconstruct_from_view(const AdversaryView& view, NodeId target) {
  std::vector<ShareMessage> visible;
  visible.reserve(view.sent_log.size() + view.recv_log.size());
  for (const ShareMessage& m : view.sent_log) {
    if (m.receiver == target) visible.push_back(m);
  }
  for (const ShareMessage& m : view.recv_log) {
    if (m.sender == target) visible.push_back(m);
  }
  const LinkTraffic t = group_links(visible, target, view.rounds_observed);
  return telescope(t, view.topology.in_degree(target), view.topology.out_degree(target),
                   view.big_k, target);
}

}  // namespace

bool AdversaryView::is_member(NodeId node) const {
  return std::binary_search(members.begin(), members.end(), node);
}

AdversaryView collect_view(const ExecutionTrace& trace, std::span<const NodeId> members,
                           Round big_k) {
  AdversaryView v{trace.graph, big_k, {members.begin(), members.end()}, trace.iterations(),
                  {}, {}, {}, {}};
  std::sort(v.members.begin(), v.members.end());
  v.members.erase(std::unique(v.members.begin(), v.members.end()), v.members.end());
  for (NodeId m : v.members) {
    if (m >= trace.graph.size()) {
      throw Error(ErrorCode::kInvalidConfig, "adversary member " + node_name(m) +
                                                 " is outside the graph");
    }
    auto& log = v.state_log[m];
    for (const auto& round_states : trace.states) {
      const NodeState& st = round_states[m];
      log.push_back({st.round, st.s, st.w});
    }
  }
  for (Round k = 0; k < trace.iterations(); ++k) {
    for (NodeId m : v.members) v.member_weights.push_back(trace.weights[k][m]);
    for (const ShareMessage& msg : trace.messages[k]) {
      if (v.is_member(msg.sender)) v.sent_log.push_back(msg);
      if (v.is_member(msg.receiver)) v.recv_log.push_back(msg);
    }
  }
  return v;
}

double view_discrepancy(const AdversaryView& a, const AdversaryView& b) {
  constexpr double kMismatch = std::numeric_limits<double>::infinity();
  if (a.members != b.members || a.rounds_observed != b.rounds_observed ||
      a.sent_log.size() != b.sent_log.size() || a.recv_log.size() != b.recv_log.size() ||
      a.member_weights.size() != b.member_weights.size()) {
    return kMismatch;
  }
  double worst = 0.0;
  for (NodeId m : a.members) {
    const auto& la = a.state_log.at(m);
    const auto& lb = b.state_log.at(m);
    if (la.size() != lb.size()) return kMismatch;
    for (std::size_t k = 0; k < la.size(); ++k) {
      worst = std::max({worst, rel_diff(la[k].s, lb[k].s), rel_diff(la[k].w, lb[k].w)});
    }
  }
  for (std::size_t i = 0; i < a.member_weights.size(); ++i) {
    const RoundWeights& wa = a.member_weights[i];
    const RoundWeights& wb = b.member_weights[i];
    if (wa.targets != wb.targets) return kMismatch;
    for (std::size_t t = 0; t < wa.targets.size(); ++t) {
      worst = std::max({worst, std::abs(wa.s[t] - wb.s[t]), std::abs(wa.w[t] - wb.w[t])});
    }
  }
  auto compare_logs = [&](const std::vector<ShareMessage>& x,
                          const std::vector<ShareMessage>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].sender != y[i].sender || x[i].receiver != y[i].receiver ||
          x[i].round != y[i].round) {
        return false;
      }
      worst = std::max({worst, rel_diff(x[i].s_share, y[i].s_share),
                        rel_diff(x[i].w_share, y[i].w_share)});
    }
    return true;
  };
  if (!compare_logs(a.sent_log, b.sent_log) || !compare_logs(a.recv_log, b.recv_log)) {
    return kMismatch;
  }
  return worst;
}

std::vector<ShareMessage> EavesdropperLog::readable_shares() const {
  std::vector<ShareMessage> out;
  for (const TappedShare& r : records) {
    if (const auto* p = std::get_if<PlainPayload>(&r.payload)) {
      out.push_back({r.sender, r.receiver, r.round, p->s_share, p->w_share});
    }
  }
  return out;
}

std::map<NodeId, double> attack_pushsum_baseline(const AdversaryView& view) {
  std::map<NodeId, double> found;
  for (NodeId m : view.members) {
    for (NodeId j : view.topology.in_neighbors(m)) {
      if (view.is_member(j) || found.contains(j)) continue;
      auto it = std::find_if(view.recv_log.begin(), view.recv_log.end(),
                             [&](const ShareMessage& s) {
                               return s.round == 0 && s.sender == j && s.receiver == m;
                             });
      if (it == view.recv_log.end()) {
        throw Error(ErrorCode::kTraceIncomplete,
                    "no round-0 share from " + node_name(j) + " to " + node_name(m));
      }
      if (it->w_share == Extended(0.0)) {
        throw Error(ErrorCode::kTraceIncomplete,
                    "round-0 share from " + node_name(j) +
                        " has zero w component; not a conventional push-sum run");
      }
      found[j] = (it->s_share / it->w_share).to_double();
    }
  }
  return found;
}

double attack_sole_neighbor(const AdversaryView& view, NodeId target) {
  const auto out = view.topology.out_neighbors(target);
  const auto in = view.topology.in_neighbors(target);
  if (view.members.size() != 1 || out.size() != 1 || in.size() != 1 ||
      out[0] != view.members[0] || in[0] != view.members[0]) {
    throw Error(ErrorCode::kTopologyConditionUnmet,
                "the sole-neighbour attack needs a single adversary that is the only in- and "
                "out-neighbour of " +
                    node_name(target));
  }
  return reconstruct_from_view(view, target).x0;
}

Reconstruction reconstruct_full_neighborhood(const AdversaryView& view, NodeId target) {
  if (view.is_member(target)) {
    throw Error(ErrorCode::kTopologyConditionUnmet,
                node_name(target) + " is itself an adversary");
  }
  for (auto nbrs : {view.topology.out_neighbors(target), view.topology.in_neighbors(target)}) {
    for (NodeId n : nbrs) {
      if (!view.is_member(n)) {
        throw Error(ErrorCode::kTopologyConditionUnmet,
                    "neighbour " + node_name(n) + " of " + node_name(target) +
                        " is not in the coalition");
      }
    }
  }
  return reconstruct_from_view(view, target);
}

double attack_colluding_full_neighborhood(const AdversaryView& view, NodeId target) {
  return reconstruct_full_neighborhood(view, target).x0;
}

double attack_eavesdropper(const EavesdropperLog& log, NodeId target) {
  Round rounds = 0;
  for (const TappedShare& r : log.records) {
    if (r.sender != target && r.receiver != target) continue;
    if (std::holds_alternative<EncryptedPayload>(r.payload)) {
      throw Error(ErrorCode::kTraceIncomplete,
                  "traffic of " + node_name(target) + " is encrypted");
    }
    rounds = std::max(rounds, r.round + 1);
  }
  const std::vector<ShareMessage> shares = log.readable_shares();
  const LinkTraffic t = group_links(shares, target, rounds);
  return telescope(t, log.topology.in_degree(target), log.topology.out_degree(target),
                   log.params.big_k, target)
      .x0;
}

Eigen::Index LeastSquaresSystem::s_col(Round k) const { return k; }
Eigen::Index LeastSquaresSystem::ds_col(Round k) const { return Eigen::Index(m) + 2 + k; }
Eigen::Index LeastSquaresSystem::w_col(Round k) const {
  return 2 * Eigen::Index(m) + 3 + (Eigen::Index(k) - big_k - 2);
}
Eigen::Index LeastSquaresSystem::dw_col(Round k) const {
  return 2 * Eigen::Index(m) + 3 + (Eigen::Index(m) - big_k) + (Eigen::Index(k) - big_k - 1);
}

std::vector<std::string> LeastSquaresSystem::labels() const {
  std::vector<std::string> out(static_cast<std::size_t>(cols()));
  for (Round k = 0; k <= m + 1; ++k) out[s_col(k)] = "s(" + std::to_string(k) + ")";
  for (Round k = 0; k <= m; ++k) out[ds_col(k)] = "ds(" + std::to_string(k) + ")";
  for (Round k = big_k + 2; k <= m + 1; ++k) out[w_col(k)] = "w(" + std::to_string(k) + ")";
  for (Round k = big_k + 1; k <= m; ++k) out[dw_col(k)] = "dw(" + std::to_string(k) + ")";
  return out;
}

LeastSquaresSystem build_least_squares_system(const AdversaryView& view, NodeId target,
                                              Round m) {
  const Round big_k = view.big_k;
  if (m < big_k + 1 || view.rounds_observed < m + 1) {
    throw Error(ErrorCode::kTraceIncomplete,
                "least squares over rounds 0.." + std::to_string(m) + " with K=" +
                    std::to_string(big_k) + " but the view covers " +
                    std::to_string(view.rounds_observed) + " rounds");
  }
  if (view.is_member(target)) {
    throw Error(ErrorCode::kTopologyConditionUnmet,
                node_name(target) + " is itself an adversary");
  }
  NodeId observer = 0;
  bool have_observer = false;
  for (NodeId o : view.topology.out_neighbors(target)) {
    if (view.is_member(o)) {
      observer = o;
      have_observer = true;
      break;
    }
  }
  if (!have_observer) {
    throw Error(ErrorCode::kTopologyConditionUnmet,
                "no adversary receives from " + node_name(target));
  }

  // Visible net flow per round and the ratio seen on the observer link.
  std::vector<Extended> in_s(m + 1), in_w(m + 1);
  std::vector<double> ratio(m + 1, 0.0);
  for (const ShareMessage& s : view.sent_log) {
    if (s.receiver != target || s.round > m) continue;
    in_s[s.round] += s.s_share;
    in_w[s.round] += s.w_share;
  }
  for (const ShareMessage& s : view.recv_log) {
    if (s.sender != target || s.round > m) continue;
    in_s[s.round] -= s.s_share;
    in_w[s.round] -= s.w_share;
    if (s.receiver == observer && s.round > big_k) ratio[s.round] = ratio_of(s).to_double();
  }

  LeastSquaresSystem sys;
  sys.m = m;
  sys.big_k = big_k;
  const Eigen::Index n_rows = 3 * Eigen::Index(m) - 2 * Eigen::Index(big_k) + 1;
  const Eigen::Index n_cols = 4 * Eigen::Index(m) - 2 * Eigen::Index(big_k) + 3;
  sys.b = Eigen::VectorXd::Zero(n_rows);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::Index row = 0;

  for (Round k = 0; k <= m; ++k, ++row) {
    trip.emplace_back(row, sys.s_col(k + 1), 1.0);
    trip.emplace_back(row, sys.s_col(k), -1.0);
    trip.emplace_back(row, sys.ds_col(k), 1.0);
    sys.b[row] = in_s[k].to_double();
  }
  for (Round k = big_k + 1; k <= m; ++k, ++row) {
    trip.emplace_back(row, sys.w_col(k + 1), 1.0);
    trip.emplace_back(row, sys.dw_col(k), 1.0);
    double rhs = in_w[k].to_double();
    if (k == big_k + 1) {
      rhs += 1.0;  // w(K+1) = 1 is public
    } else {
      trip.emplace_back(row, sys.w_col(k), -1.0);
    }
    sys.b[row] = rhs;
  }
  for (Round k = big_k + 1; k <= m; ++k, ++row) {
    trip.emplace_back(row, sys.s_col(k), 1.0);
    if (k == big_k + 1) {
      sys.b[row] = ratio[k];
    } else {
      trip.emplace_back(row, sys.w_col(k), -ratio[k]);
    }
  }

  sys.a.resize(n_rows, n_cols);
  sys.a.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

Eigen::VectorXd solve_min_norm(const LeastSquaresSystem& system) {
  const Eigen::SparseMatrix<double> a = system.a;
  const Eigen::SparseMatrix<double> normal = a * a.transpose();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(normal);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::kTopologyConditionUnmet,
                "least-squares system is rank deficient");
  }
  const Eigen::VectorXd y = ldlt.solve(system.b);
  return a.transpose() * y;
}

double attack_least_squares(const AdversaryView& view, NodeId target, Round m) {
  const LeastSquaresSystem sys = build_least_squares_system(view, target, m);
  return solve_min_norm(sys)[sys.s_col(0)];
}

IndistinguishabilityWitness build_indistinguishability_witness(
    const ExecutionTrace& trace, NodeId target, double alt_x0, NodeId helper,
    std::span<const NodeId> adversary) {
  const DirectedGraph& g = trace.graph;
  if (target >= g.size() || helper >= g.size() || target == helper) {
    throw Error(ErrorCode::kTopologyConditionUnmet, "target and helper must be distinct nodes");
  }
  if (contains(adversary, target) || contains(adversary, helper)) {
    throw Error(ErrorCode::kTopologyConditionUnmet,
                "target and helper must both lie outside the coalition");
  }
  if (trace.iterations() == 0) {
    throw Error(ErrorCode::kTraceIncomplete, "trace has no rounds");
  }

  IndistinguishabilityWitness wit;
  wit.target = target;
  wit.helper = helper;
  if (g.can_send(target, helper)) {
    wit.which = IndistinguishabilityWitness::Case::kHelperIsOutNeighbor;
  } else if (g.can_send(helper, target)) {
    wit.which = IndistinguishabilityWitness::Case::kHelperIsInNeighbor;
  } else {
    throw Error(ErrorCode::kTopologyConditionUnmet,
                node_name(helper) + " is not a neighbour of " + node_name(target));
  }

  const double xi = trace.x0[target];
  const double xl = trace.x0[helper];
  const double alt_l = xi + xl - alt_x0;
  if (alt_x0 == 0.0 || alt_l == 0.0) {
    throw Error(ErrorCode::kDegenerateDenominator,
                "alternative initial values for the target and helper must be non-zero");
  }
  const double delta = alt_x0 - xi;  // mass moved onto the target

  wit.x0 = trace.x0;
  wit.x0[target] = alt_x0;
  wit.x0[helper] = alt_l;
  wit.target_round0 = trace.weights[0][target];
  wit.helper_round0 = trace.weights[0][helper];

  // The distinguished entry of each column carries the transfer; every other
  // share keeps its original value.
  const NodeId target_special =
      wit.which == IndistinguishabilityWitness::Case::kHelperIsOutNeighbor ? helper : target;
  const NodeId helper_special =
      wit.which == IndistinguishabilityWitness::Case::kHelperIsOutNeighbor ? helper : target;

  RoundWeights& ti = wit.target_round0;
  for (std::size_t t = 0; t < ti.targets.size(); ++t) {
    const double p = ti.s[t];
    ti.s[t] = ti.targets[t] == target_special ? (p * xi + delta) / alt_x0 : p * xi / alt_x0;
  }
  RoundWeights& hl = wit.helper_round0;
  for (std::size_t t = 0; t < hl.targets.size(); ++t) {
    const double p = hl.s[t];
    hl.s[t] = hl.targets[t] == helper_special ? (p * xl - delta) / alt_l : p * xl / alt_l;
  }
  return wit;
}

}  // namespace pushsum
