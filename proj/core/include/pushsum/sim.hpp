#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pushsum/adversary.hpp"
#include "pushsum/consensus.hpp"
#include "pushsum/paillier.hpp"
#include "pushsum/weights.hpp"

namespace pushsum {

enum class Mode { kAlgorithm0, kAlgorithm1, kAlgorithm2 };

enum class AttackKind { kNone, kBaseline, kSoleNeighbor, kColludingNeighborhood, kLeastSquares };

const char* to_string(Mode mode);
const char* to_string(AttackKind attack);

struct AdversarySpec {
  std::vector<NodeId> members;
  std::optional<NodeId> target;
  AttackKind attack = AttackKind::kNone;
};

struct CryptoParams {
  unsigned key_bits = 256;
  unsigned fractional_bits = 32;
};

struct ExperimentConfig {
  DirectedGraph graph = reference_graph();
  std::vector<double> x0 = {10, 15, 20, 25, 30};
  WeightParams weights;
  Round max_rounds = 100;  // index of the last iteration, M
  double stop_tol = 1e-12;
  std::uint64_t seed = 1;
  Mode mode = Mode::kAlgorithm1;
  std::optional<AdversarySpec> adversary;
  CryptoParams crypto;

  /// Throws kInvalidGraph / kNotStronglyConnected / kInvalidEpsilon /
  /// kInvalidConfig for the first violated requirement.
  void validate() const;
};

struct MetricsSeries {
  double alpha = 0.0;
  std::vector<double> error;             // e(k) = ||pi(k) - alpha 1||
  std::vector<std::vector<double>> pi;   // pi[k][i]
};

MetricsSeries error_series(const ExecutionTrace& trace);

struct LatencyStats {
  std::size_t count = 0;
  double total_ms = 0.0;
  double max_ms = 0.0;

  void add(double ms);
  double mean_ms() const { return count == 0 ? 0.0 : total_ms / double(count); }
};

struct CryptoStats {
  LatencyStats encrypt;
  LatencyStats decrypt;
  /// Largest |delivered share - share the sender computed| over all links
  /// and rounds, i.e. the fixed-point rounding actually incurred.
  double max_share_error = 0.0;
};

struct ExperimentResult {
  ExecutionTrace trace;
  MetricsSeries metrics;
  std::optional<AdversaryView> view;
  EavesdropperLog eavesdropper;
  std::optional<double> attack_estimate;
  std::map<NodeId, double> baseline_recovered;
  CryptoStats crypto;
};

/// Runs iterations k = 0..M with early stopping from round K+2 on. Config
/// errors are raised before any round executes.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const WeightGenerator& generator = generate_round_weights);

/// Draws each node's weights from its own seeded stream.
class SeededSchedule : public WeightSchedule {
 public:
  SeededSchedule(const DirectedGraph& g, WeightParams params, std::uint64_t seed,
                 WeightGenerator generator = generate_round_weights);
  RoundWeights next(NodeId node, Round round) override;

 private:
  const DirectedGraph& graph_;
  WeightParams params_;
  WeightGenerator generator_;
  std::vector<Rng> rngs_;
};

/// Replays a recorded weight stream, optionally with some entries replaced.
class RecordedSchedule : public WeightSchedule {
 public:
  explicit RecordedSchedule(const std::vector<std::vector<RoundWeights>>& stream);
  void override_weights(const RoundWeights& w);
  RoundWeights next(NodeId node, Round round) override;

 private:
  std::vector<std::vector<RoundWeights>> stream_;
};

/// Re-executes the protocol on `x0` with a recorded weight stream.
ExecutionTrace replay(const DirectedGraph& g, std::span<const double> x0,
                      const std::vector<std::vector<RoundWeights>>& stream);

/// Replays `original` with the witness's initial values and round-0 weights.
ExecutionTrace replay_witness(const ExecutionTrace& original,
                              const IndistinguishabilityWitness& witness);

enum class WhichWeights { kS, kW };

/// P(k) assembled from one round of per-node weights.
Eigen::MatrixXd round_matrix(std::span<const RoundWeights> round, std::size_t n,
                             WhichWeights which);

/// Phi(to:from) = P(to) ... P(from). Throws kRangeUncovered unless
/// from <= to < stream.size().
Eigen::MatrixXd transition_product(const std::vector<std::vector<RoundWeights>>& stream,
                                   Round from, Round to, WhichWeights which);

/// Worst-case contraction factor (1 - eps^(N-1))^(1/(N-1)).
double theorem_gamma(double epsilon, std::size_t n);

/// Per-round contraction of e(k) from a log-linear fit over the last half of
/// the rounds k >= K+2 whose error is above floor_rel * max(1, |alpha|).
/// Returns nullopt when fewer than three rounds qualify.
std::optional<double> fitted_contraction(const MetricsSeries& m, Round big_k,
                                         double floor_rel = 1e-12);

/// Quantizes, encrypts under the receiver's key and decrypts every share.
/// The rounding remainder stays with the sender, so mass is conserved.
class EncryptedChannel : public ShareChannel {
 public:
  EncryptedChannel(std::vector<paillier::Keypair> keys, std::uint64_t seed,
                   unsigned fractional_bits, EavesdropperLog* tap);
  void deliver(Round round, std::vector<OutgoingShares>& per_node) override;
  const CryptoStats& stats() const { return stats_; }

 private:
  std::vector<paillier::Keypair> keys_;
  std::vector<paillier::FixedPointCodec> codecs_;
  std::vector<Rng> rngs_;
  EavesdropperLog* tap_;
  CryptoStats stats_;
};

/// Keypair of `node` derived from the run seed.
paillier::Keypair node_keypair(std::uint64_t seed, NodeId node, unsigned bits);

/// CSV with header round,e,pi_0..pi_{N-1}; values at 17 significant digits.
void write_error_csv(std::ostream& out, const MetricsSeries& m);

struct AttackTrial {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double true_x0 = 0.0;
  double estimate = 0.0;
};

void write_attack_csv(std::ostream& out, std::span<const AttackTrial> trials);

/// Repeated attack runs: for every target value, `trials` runs with fresh
/// weight seeds and non-target initial values drawn from (x0_low, x0_high).
struct TrialSpec {
  std::size_t trials = 1000;
  std::vector<double> target_values = {40.0, -40.0};
  double x0_low = 0.0;
  double x0_high = 50.0;
};

/// Seed of trial number `trial` derived from a base seed.
std::uint64_t trial_seed(std::uint64_t base, std::size_t trial);

/// n values uniform on (lo, hi) from the initial-value stream of `seed`.
std::vector<double> draw_initial_values(std::size_t n, double lo, double hi,
                                        std::uint64_t seed);

/// Runs `base` once per (target value, trial) with early stopping disabled.
/// base.adversary must name a target and an attack producing an estimate.
std::vector<AttackTrial> run_attack_trials(const ExperimentConfig& base,
                                           const TrialSpec& spec);

}  // namespace pushsum
