#include "pushsum/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "pushsum/errors.hpp"

namespace pushsum {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kAlgorithm0: return "algorithm0";
    case Mode::kAlgorithm1: return "algorithm1";
    case Mode::kAlgorithm2: return "algorithm2";
  }
  return "unknown";
}

const char* to_string(AttackKind attack) {
  switch (attack) {
    case AttackKind::kNone: return "none";
    case AttackKind::kBaseline: return "baseline";
    case AttackKind::kSoleNeighbor: return "sole_neighbor";
    case AttackKind::kColludingNeighborhood: return "colluding_neighborhood";
    case AttackKind::kLeastSquares: return "least_squares";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  const std::size_t n = graph.size();
  if (x0.size() != n) {
    throw Error(ErrorCode::kInvalidConfig, "x0 has " + std::to_string(x0.size()) +
                                               " entries but the graph has " +
                                               std::to_string(n) + " nodes");
  }
  for (double v : x0) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidConfig, "x0 entries must be finite");
  }
  if (!is_strongly_connected(graph)) {
    throw Error(ErrorCode::kNotStronglyConnected, "graph is not strongly connected");
  }
  if (mode != Mode::kAlgorithm0) pushsum::validate(weights, graph);
  if (max_rounds < weights.big_k + 2) {
    throw Error(ErrorCode::kInvalidConfig,
                "max_rounds must be at least K+2 = " + std::to_string(weights.big_k + 2));
  }
  if (!(stop_tol >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "stop_tol must be >= 0");
  if (mode == Mode::kAlgorithm2) {
    if (crypto.key_bits < 16) {
      throw Error(ErrorCode::kInvalidConfig, "key_bits must be at least 16");
    }
    if (crypto.fractional_bits == 0 || crypto.fractional_bits + 8 > crypto.key_bits) {
      throw Error(ErrorCode::kInvalidConfig,
                  "fractional_bits must lie in [1, key_bits - 8]");
    }
  }
  if (adversary) {
    for (NodeId m : adversary->members) {
      if (m >= n) {
        throw Error(ErrorCode::kInvalidConfig,
                    "adversary member " + std::to_string(m) + " is outside the graph");
      }
    }
    const bool needs_target = adversary->attack != AttackKind::kNone &&
                              adversary->attack != AttackKind::kBaseline;
    if (needs_target && !adversary->target) {
      throw Error(ErrorCode::kInvalidConfig,
                  std::string("attack ") + to_string(adversary->attack) + " needs a target");
    }
    if (adversary->target) {
      const NodeId t = *adversary->target;
      if (t >= n) throw Error(ErrorCode::kInvalidConfig, "adversary target is outside the graph");
      if (std::find(adversary->members.begin(), adversary->members.end(), t) !=
          adversary->members.end()) {
        throw Error(ErrorCode::kInvalidConfig, "adversary target is also a member");
      }
    }
  }
}

MetricsSeries error_series(const ExecutionTrace& trace) {
  MetricsSeries m;
  const std::size_t n = trace.x0.size();
  Extended total;
  for (double v : trace.x0) total += v;
  m.alpha = (total / Extended(static_cast<double>(n))).to_double();
  m.error.reserve(trace.states.size());
  m.pi.reserve(trace.states.size());
  for (const auto& round : trace.states) {
    std::vector<double> pi(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pi[i] = round[i].pi;
      const double d = pi[i] - m.alpha;
      sq += d * d;
    }
    m.error.push_back(std::sqrt(sq));
    m.pi.push_back(std::move(pi));
  }
  return m;
}

void LatencyStats::add(double ms) {
  ++count;
  total_ms += ms;
  max_ms = std::max(max_ms, ms);
}

SeededSchedule::SeededSchedule(const DirectedGraph& g, WeightParams params,
                               std::uint64_t seed, WeightGenerator generator)
    : graph_(g), params_(params), generator_(std::move(generator)) {
  rngs_.reserve(g.size());
  for (NodeId i = 0; i < g.size(); ++i) rngs_.push_back(Rng::derive(seed, i, Stream::kWeights));
}

RoundWeights SeededSchedule::next(NodeId node, Round round) {
  return generator_(node, round, graph_.out_neighbors(node), params_, rngs_.at(node));
}

RecordedSchedule::RecordedSchedule(const std::vector<std::vector<RoundWeights>>& stream)
    : stream_(stream) {}

void RecordedSchedule::override_weights(const RoundWeights& w) {
  if (w.round >= stream_.size() || w.node >= stream_[w.round].size()) {
    throw Error(ErrorCode::kRangeUncovered, "override outside the recorded stream");
  }
  stream_[w.round][w.node] = w;
}

RoundWeights RecordedSchedule::next(NodeId node, Round round) {
  if (round >= stream_.size() || node >= stream_[round].size()) {
    throw Error(ErrorCode::kRangeUncovered,
                "no recorded weights for node " + std::to_string(node) + " round " +
                    std::to_string(round));
  }
  return stream_[round][node];
}

ExecutionTrace replay(const DirectedGraph& g, std::span<const double> x0,
                      const std::vector<std::vector<RoundWeights>>& stream) {
  RecordedSchedule schedule(stream);
  RunOptions options;
  options.iterations = static_cast<Round>(stream.size());
  return run_synchronous(g, x0, schedule, options);
}

ExecutionTrace replay_witness(const ExecutionTrace& original,
                              const IndistinguishabilityWitness& witness) {
  RecordedSchedule schedule(original.weights);
  schedule.override_weights(witness.target_round0);
  schedule.override_weights(witness.helper_round0);
  RunOptions options;
  options.iterations = original.iterations();
  return run_synchronous(original.graph, witness.x0, schedule, options);
}

Eigen::MatrixXd round_matrix(std::span<const RoundWeights> round, std::size_t n,
                             WhichWeights which) {
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size, size);
  for (const RoundWeights& rw : round) {
    const auto& values = which == WhichWeights::kS ? rw.s : rw.w;
    for (std::size_t t = 0; t < rw.targets.size(); ++t) p(rw.targets[t], rw.node) = values[t];
  }
  return p;
}

Eigen::MatrixXd transition_product(const std::vector<std::vector<RoundWeights>>& stream,
                                   Round from, Round to, WhichWeights which) {
  if (from > to || to >= stream.size()) {
    throw Error(ErrorCode::kRangeUncovered,
                "product over rounds " + std::to_string(from) + ".." + std::to_string(to) +
                    " but the stream has " + std::to_string(stream.size()) + " rounds");
  }
  const std::size_t n = stream[from].size();
  Eigen::MatrixXd phi = round_matrix(stream[from], n, which);
  for (Round k = from + 1; k <= to; ++k) phi = round_matrix(stream[k], n, which) * phi;
  return phi;
}

double theorem_gamma(double epsilon, std::size_t n) {
  const double d = static_cast<double>(n - 1);
  return std::exp(std::log1p(-std::pow(epsilon, d)) / d);
}

std::optional<double> fitted_contraction(const MetricsSeries& m, Round big_k,
                                         double floor_rel) {
  const double floor = floor_rel * std::max(1.0, std::abs(m.alpha));
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = big_k + 2; k < m.error.size(); ++k) {
    if (m.error[k] > floor) pts.emplace_back(double(k), std::log(m.error[k]));
  }
  if (pts.size() < 6) return std::nullopt;
  const std::size_t start = pts.size() / 2;
  const double count = double(pts.size() - start);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = start; i < pts.size(); ++i) {
    sx += pts[i].first;
    sy += pts[i].second;
    sxx += pts[i].first * pts[i].first;
    sxy += pts[i].first * pts[i].second;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return std::exp(slope);
}

paillier::Keypair node_keypair(std::uint64_t seed, NodeId node, unsigned bits) {
  Rng rng = Rng::derive(seed, node, Stream::kKeygen);
  return paillier::keygen(bits, rng);
}

EncryptedChannel::EncryptedChannel(std::vector<paillier::Keypair> keys, std::uint64_t seed,
                                   unsigned fractional_bits, EavesdropperLog* tap)
    : keys_(std::move(keys)), tap_(tap) {
  for (NodeId i = 0; i < keys_.size(); ++i) {
    codecs_.emplace_back(keys_[i].public_key().n(), fractional_bits);
    rngs_.push_back(Rng::derive(seed, i, Stream::kCrypto));
  }
}

void EncryptedChannel::deliver(Round round, std::vector<OutgoingShares>& per_node) {
  using Clock = std::chrono::steady_clock;
  auto elapsed_ms = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  for (NodeId sender = 0; sender < per_node.size(); ++sender) {
    OutgoingShares& out = per_node[sender];
    for (ShareMessage& msg : out.messages) {
      const paillier::Keypair& key = keys_.at(msg.receiver);
      const paillier::FixedPointCodec& codec = codecs_.at(msg.receiver);
      const Extended original_s = msg.s_share;
      const Extended original_w = msg.w_share;
      const Extended qs = codec.quantize(msg.s_share);
      const Extended qw = codec.quantize(msg.w_share);
      out.retained.s += msg.s_share - qs;
      out.retained.w += msg.w_share - qw;

      auto t0 = Clock::now();
      paillier::Ciphertext cs = paillier::encrypt(key.public_key(), codec.encode(qs), rngs_[sender]);
      auto t1 = Clock::now();
      paillier::Ciphertext cw = paillier::encrypt(key.public_key(), codec.encode(qw), rngs_[sender]);
      auto t2 = Clock::now();
      stats_.encrypt.add(elapsed_ms(t0, t1));
      stats_.encrypt.add(elapsed_ms(t1, t2));

      if (tap_ != nullptr) {
        tap_->records.push_back({msg.sender, msg.receiver, round, EncryptedPayload{cs, cw}});
      }

      t0 = Clock::now();
      msg.s_share = codec.decode(paillier::decrypt(key, cs));
      t1 = Clock::now();
      msg.w_share = codec.decode(paillier::decrypt(key, cw));
      t2 = Clock::now();
      stats_.decrypt.add(elapsed_ms(t0, t1));
      stats_.decrypt.add(elapsed_ms(t1, t2));
      stats_.max_share_error =
          std::max({stats_.max_share_error, std::abs((msg.s_share - original_s).to_double()),
                    std::abs((msg.w_share - original_w).to_double())});
    }
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const WeightGenerator& generator) {
  config.validate();
  const DirectedGraph& g = config.graph;
  ExperimentResult result{
      ExecutionTrace{g, {}, {}, {}, {}}, {}, std::nullopt,
      EavesdropperLog{g, config.weights, {}, {}}, std::nullopt, {}, {}};

  const Round iterations = config.max_rounds + 1;
  if (config.mode == Mode::kAlgorithm0) {
    result.trace = run_algorithm0(g, config.x0, uniform_push_matrix(g), iterations);
  } else {
    SeededSchedule schedule(g, config.weights, config.seed, generator);
    RunOptions options;
    options.iterations = iterations;
    options.stop_tol = config.stop_tol;
    options.stop_from = config.weights.big_k + 2;
    if (config.mode == Mode::kAlgorithm2) {
      std::vector<paillier::Keypair> keys;
      for (NodeId i = 0; i < g.size(); ++i) {
        keys.push_back(node_keypair(config.seed, i, config.crypto.key_bits));
        result.eavesdropper.public_keys.emplace(i, keys.back().public_key());
      }
      EncryptedChannel channel(std::move(keys), config.seed, config.crypto.fractional_bits,
                               &result.eavesdropper);
      result.trace = run_synchronous(g, config.x0, schedule, options, &channel);
      result.crypto = channel.stats();
    } else {
      result.trace = run_synchronous(g, config.x0, schedule, options);
    }
  }
  if (config.mode != Mode::kAlgorithm2) {
    for (const auto& round : result.trace.messages) {
      for (const ShareMessage& m : round) {
        result.eavesdropper.records.push_back(
            {m.sender, m.receiver, m.round, PlainPayload{m.s_share, m.w_share}});
      }
    }
  }
  result.metrics = error_series(result.trace);

  if (config.adversary) {
    const AdversarySpec& spec = *config.adversary;
    result.view = collect_view(result.trace, spec.members, config.weights.big_k);
    const AdversaryView& view = *result.view;
    switch (spec.attack) {
      case AttackKind::kNone: break;
      case AttackKind::kBaseline:
        result.baseline_recovered = attack_pushsum_baseline(view);
        break;
      case AttackKind::kSoleNeighbor:
        result.attack_estimate = attack_sole_neighbor(view, *spec.target);
        break;
      case AttackKind::kColludingNeighborhood:
        result.attack_estimate = attack_colluding_full_neighborhood(view, *spec.target);
        break;
      case AttackKind::kLeastSquares:
        result.attack_estimate =
            attack_least_squares(view, *spec.target, result.trace.iterations() - 1);
        break;
    }
  }
  return result;
}

void write_error_csv(std::ostream& out, const MetricsSeries& m) {
  const std::size_t n = m.pi.empty() ? 0 : m.pi.front().size();
  out << "round,e";
  for (std::size_t i = 0; i < n; ++i) out << ",pi_" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < m.error.size(); ++k) {
    out << k << ',' << m.error[k];
    for (double v : m.pi[k]) out << ',' << v;
    out << '\n';
  }
}

void write_attack_csv(std::ostream& out, std::span<const AttackTrial> trials) {
  out << "trial,seed,true_x0,estimate\n" << std::setprecision(17);
  for (const AttackTrial& t : trials) {
    out << t.trial << ',' << t.seed << ',' << t.true_x0 << ',' << t.estimate << '\n';
  }
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t trial) {
  return splitmix64(base ^ splitmix64(0x747269616cULL + trial));
}

std::vector<double> draw_initial_values(std::size_t n, double lo, double hi,
                                        std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0, Stream::kInitialValues);
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(lo, hi);
  return x;
}

std::vector<AttackTrial> run_attack_trials(const ExperimentConfig& base,
                                           const TrialSpec& spec) {
  if (!base.adversary || !base.adversary->target ||
      base.adversary->attack == AttackKind::kNone ||
      base.adversary->attack == AttackKind::kBaseline) {
    throw Error(ErrorCode::kInvalidConfig,
                "attack trials need an adversary with a target and a targeted attack");
  }
  const NodeId target = *base.adversary->target;
  std::vector<AttackTrial> out;
  out.reserve(spec.trials * spec.target_values.size());
  std::size_t index = 0;
  for (double value : spec.target_values) {
    for (std::size_t t = 0; t < spec.trials; ++t, ++index) {
      ExperimentConfig cfg = base;
      cfg.seed = trial_seed(base.seed, index);
      cfg.x0 = draw_initial_values(cfg.graph.size(), spec.x0_low, spec.x0_high, cfg.seed);
      cfg.x0[target] = value;
      cfg.stop_tol = 0.0;
      const ExperimentResult r = run_experiment(cfg);
      out.push_back({index, cfg.seed, value, *r.attack_estimate});
    }
  }
  return out;
}

}  // namespace pushsum
