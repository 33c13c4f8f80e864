#pragma once

#include <string>
#include <vector>

#include "pushsum/sim.hpp"

namespace pushsum {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// |sum_i s_i(k) - sum_i x_i0| <= 1e-9 (1 + |sum x0|) for every k.
CheckResult check_mass_conservation(const ExecutionTrace& trace);

/// Every recorded weight column sums to one within `tol`.
CheckResult check_column_stochastic(const ExecutionTrace& trace, double tol = 1e-12);

/// P_w(k) = I for k <= K; P_s(k) = P_w(k) with entries in (eps, 1) after.
CheckResult check_phase_separation(const ExecutionTrace& trace, const WeightParams& params);

/// w_i(k) == 1 for k <= K+1 and w_i(k) >= eps^N afterwards.
CheckResult check_lemma1(const ExecutionTrace& trace, const WeightParams& params);

/// Builds `count` witnesses against `adversary` on the trace and checks that
/// each replay reproduces the adversary's view within 1e-9. Targets, helpers
/// and alternative values are drawn from `seed`.
CheckResult check_witness_replay(const ExecutionTrace& trace, Round big_k,
                                 std::span<const NodeId> adversary, std::size_t count,
                                 std::uint64_t seed);

/// Toy-key constants, decrypt(encrypt(m)) = m and homomorphic addition on
/// `samples` random plaintexts, and codec round trips.
CheckResult check_crypto_roundtrip(std::uint64_t seed, unsigned key_bits, std::size_t samples);

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

/// Runs every suite against `config` (the protocol trace comes from
/// Algorithm 1 with `generator`; Algorithm 0 is added for mass conservation).
VerifyReport run_verify_suites(const ExperimentConfig& config,
                               const WeightGenerator& generator = generate_round_weights);

}  // namespace pushsum
