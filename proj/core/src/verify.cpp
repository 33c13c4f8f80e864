#include "pushsum/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pushsum/errors.hpp"

namespace pushsum {

namespace {

std::string describe(Round k, NodeId i) {
  return "round " + std::to_string(k) + " node " + std::to_string(i);
}

}  // namespace

CheckResult check_mass_conservation(const ExecutionTrace& trace) {
  CheckResult r{"mass-conservation", true, ""};
  Extended expected;
  for (double v : trace.x0) expected += v;
  const double tol = 1e-9 * (1.0 + std::abs(expected.to_double()));
  double worst = 0.0;
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    Extended total;
    for (const NodeState& st : trace.states[k]) total += st.s;
    const double dev = std::abs((total - expected).to_double());
    worst = std::max(worst, dev);
    if (dev > tol && r.passed) {
      r.passed = false;
      r.detail = "round " + std::to_string(k) + " deviates by " + std::to_string(dev);
    }
  }
  if (r.passed) {
    std::ostringstream os;
    os << "max deviation " << worst << " over " << trace.states.size() << " states";
    r.detail = os.str();
  }
  return r;
}

CheckResult check_column_stochastic(const ExecutionTrace& trace, double tol) {
  CheckResult r{"column-stochasticity", true, ""};
  for (const auto& round : trace.weights) {
    for (const RoundWeights& rw : round) {
      for (const auto* values : {&rw.s, &rw.w}) {
        double sum = 0.0;
        for (double v : *values) sum += v;
        if (std::abs(sum - 1.0) > tol) {
          r.passed = false;
          r.detail = describe(rw.round, rw.node) + " column sums to " + std::to_string(sum);
          return r;
        }
      }
    }
  }
  r.detail = std::to_string(trace.iterations()) + " rounds checked";
  return r;
}

CheckResult check_phase_separation(const ExecutionTrace& trace, const WeightParams& params) {
  CheckResult r{"phase-separation", true, ""};
  for (const auto& round : trace.weights) {
    for (const RoundWeights& rw : round) {
      for (std::size_t t = 0; t < rw.targets.size(); ++t) {
        bool ok;
        if (in_phase_a(rw.round, params)) {
          ok = rw.w[t] == (t == 0 ? 1.0 : 0.0);
        } else {
          ok = rw.s[t] == rw.w[t] && rw.s[t] > params.epsilon && rw.s[t] < 1.0;
        }
        if (!ok) {
          r.passed = false;
          r.detail = describe(rw.round, rw.node) + " weight towards node " +
                     std::to_string(rw.targets[t]) + " breaks the phase rule";
          return r;
        }
      }
    }
  }
  r.detail = "K = " + std::to_string(params.big_k);
  return r;
}

CheckResult check_lemma1(const ExecutionTrace& trace, const WeightParams& params) {
  CheckResult r{"lemma1-w-bounds", true, ""};
  const double floor = std::pow(params.epsilon, static_cast<double>(trace.graph.size()));
  double min_w = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    for (const NodeState& st : trace.states[k]) {
      if (k <= params.big_k + 1) {
        if (!(st.w == Extended(1.0))) {
          r.passed = false;
          r.detail = describe(Round(k), st.node) + " has w != 1 before mixing starts";
          return r;
        }
      } else {
        min_w = std::min(min_w, st.w.to_double());
        if (st.w.to_double() < floor) {
          r.passed = false;
          r.detail = describe(Round(k), st.node) + " has w below eps^N";
          return r;
        }
      }
    }
  }
  std::ostringstream os;
  os << "min w after K+1 = " << min_w << ", eps^N = " << floor;
  r.detail = os.str();
  return r;
}

CheckResult check_witness_replay(const ExecutionTrace& trace, Round big_k,
                                 std::span<const NodeId> adversary, std::size_t count,
                                 std::uint64_t seed) {
  CheckResult r{"witness-replay", true, ""};
  const DirectedGraph& g = trace.graph;
  const AdversaryView original = collect_view(trace, adversary, big_k);
  auto outside = [&](NodeId n) {
    return std::find(adversary.begin(), adversary.end(), n) == adversary.end();
  };

  // Every (target, helper) pair the construction applies to.
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId t = 0; t < g.size(); ++t) {
    if (!outside(t)) continue;
    for (NodeId h = 0; h < g.size(); ++h) {
      if (h != t && outside(h) && (g.can_send(t, h) || g.can_send(h, t))) pairs.emplace_back(t, h);
    }
  }
  if (pairs.empty()) {
    r.passed = false;
    r.detail = "no target/helper pair lies outside the coalition";
    return r;
  }

  Rng rng = Rng::derive(seed, 0, Stream::kTopology);
  double worst = 0.0;
  std::size_t done = 0;
  while (done < count) {
    const auto [target, helper] = pairs[rng.below(pairs.size())];
    const double alt = rng.uniform(-100.0, 100.0);
    if (alt == 0.0 || trace.x0[target] + trace.x0[helper] - alt == 0.0) continue;
    const auto wit = build_indistinguishability_witness(trace, target, alt, helper, adversary);
    const ExecutionTrace replayed = replay_witness(trace, wit);
    const double d = view_discrepancy(original, collect_view(replayed, adversary, big_k));
    worst = std::max(worst, d);
    if (!(d <= 1e-9)) {
      r.passed = false;
      std::ostringstream os;
      os << "target " << target << " helper " << helper << " alt " << alt << " differs by " << d;
      r.detail = os.str();
      return r;
    }
    ++done;
  }
  std::ostringstream os;
  os << count << " witnesses, max view difference " << worst;
  r.detail = os.str();
  return r;
}

CheckResult check_crypto_roundtrip(std::uint64_t seed, unsigned key_bits, std::size_t samples) {
  using namespace paillier;
  CheckResult r{"crypto-roundtrip", true, ""};
  auto fail = [&](const std::string& why) {
    r.passed = false;
    r.detail = why;
    return r;
  };

  const Keypair toy = keypair_from_primes(5, 7);
  if (toy.public_key().n() != 35 || toy.public_key().g() != 36 || toy.lambda() != 24 ||
      toy.mu() != 19) {
    return fail("toy key constants differ");
  }

  Rng key_rng = Rng::derive(seed, 0, Stream::kKeygen);
  const Keypair key = keygen(key_bits, key_rng);
  const PublicKey& pub = key.public_key();
  Rng rng = Rng::derive(seed, 0, Stream::kCrypto);
  for (std::size_t i = 0; i < samples; ++i) {
    const BigInt a = random_below(pub.n(), rng);
    const BigInt b = random_below(pub.n(), rng);
    const Ciphertext ca = encrypt(pub, a, rng);
    const Ciphertext cb = encrypt(pub, b, rng);
    if (decrypt(key, ca) != a) return fail("decrypt(encrypt(m)) != m");
    const BigInt sum = (a + b) % pub.n();
    if (decrypt(key, add(pub, ca, cb)) != sum) return fail("homomorphic addition failed");
  }
  const FixedPointCodec codec(pub.n());
  for (std::size_t i = 0; i < samples; ++i) {
    const double v = rng.uniform(-1e6, 1e6);
    const double back = codec.decode(decrypt(key, encrypt(pub, codec.encode(v), rng))).to_double();
    if (std::abs(back - v) > std::ldexp(1.0, -33) * 1.0000001) {
      return fail("codec round trip error above half a quantum");
    }
  }
  r.detail = std::to_string(samples) + " samples at " + std::to_string(key_bits) + " bits";
  return r;
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

VerifyReport run_verify_suites(const ExperimentConfig& config,
                               const WeightGenerator& generator) {
  config.validate();
  VerifyReport report;

  ExperimentConfig alg1 = config;
  alg1.mode = Mode::kAlgorithm1;
  alg1.adversary.reset();
  const ExecutionTrace trace = run_experiment(alg1, generator).trace;

  ExperimentConfig alg0 = alg1;
  alg0.mode = Mode::kAlgorithm0;
  const ExecutionTrace baseline = run_experiment(alg0).trace;

  CheckResult mass = check_mass_conservation(trace);
  const CheckResult mass0 = check_mass_conservation(baseline);
  if (!mass0.passed) mass = mass0;
  report.checks.push_back(mass);
  report.checks.push_back(check_lemma1(trace, config.weights));
  report.checks.push_back(check_column_stochastic(trace));
  report.checks.push_back(check_phase_separation(trace, config.weights));

  std::vector<NodeId> coalition;
  if (config.adversary && !config.adversary->members.empty()) {
    coalition = config.adversary->members;
  } else if (trace.graph.size() > 2) {
    // Largest coalition the construction tolerates: everyone but one
    // neighbouring pair.
    const NodeId helper = trace.graph.out_neighbors(0).front();
    for (NodeId i = 0; i < trace.graph.size(); ++i) {
      if (i != 0 && i != helper) coalition.push_back(i);
    }
  }
  try {
    report.checks.push_back(check_witness_replay(trace, config.weights.big_k, coalition, 20,
                                                 config.seed));
  } catch (const Error& e) {
    report.checks.push_back({"witness-replay", false, e.what()});
  }

  report.checks.push_back(check_crypto_roundtrip(config.seed, config.crypto.key_bits, 50));
  return report;
}

}  // namespace pushsum
