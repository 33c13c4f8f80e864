#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pushsum/sim.hpp"

namespace pushsum {

/// Several runs that differ only in K.
struct SweepSpec {
  std::vector<Round> big_k_values;
};

/// A parsed configuration file.
///
/// Layout (JSON):
///   name        optional label
///   graph       "reference" or {"nodes": N, "edges": [[i, j], ...]} where
///               the pair [i, j] means node j sends to node i
///   x0          initial values; may be omitted when experiment.x0_range is
///               given, in which case they are drawn from the seed
///   protocol    mode, K, epsilon, phase_a_range, max_rounds, stop_tol
///   seed        unsigned 64-bit integer
///   crypto      key_bits, fractional_bits
///   adversary   members, target, attack
///   experiment  sweep_K, trials, target_values, x0_range
struct RunDescription {
  std::string name;
  ExperimentConfig experiment;
  std::optional<SweepSpec> sweep;
  std::optional<TrialSpec> trials;
  std::optional<std::pair<double, double>> x0_range;
  std::uint64_t config_hash = 0;
};

/// FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text);

/// Parses and validates. Errors carry kInvalidConfig (or the validation
/// code, e.g. kInvalidEpsilon) and a message of the form
/// "<origin>:<line>: <problem>" whenever the offending key can be located.
RunDescription parse_run_description(std::string_view text,
                                     std::string_view origin = "<config>");

/// Reads a file and parses it; kIo when the file cannot be read.
RunDescription load_run_description(const std::filesystem::path& path);

Mode parse_mode(std::string_view text);
AttackKind parse_attack(std::string_view text);

}  // namespace pushsum
