#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pushsum {

enum class ErrorCode {
  kInvalidGraph,
  kNotStronglyConnected,
  kInvalidEpsilon,
  kRoundMismatch,
  kMissingShare,
  kDivisionByZero,
  kPlaintextOutOfRange,
  kMalformedCiphertext,
  kMagnitudeOverflow,
  kTraceIncomplete,
  kTopologyConditionUnmet,
  kDegenerateDenominator,
  kRangeUncovered,
  kInvalidConfig,
  kTimeout,
  kPeerDisconnected,
  kDecryptFailure,
  kMalformedFrame,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for every contract violation in the library. The
// code identifies the failure class; what() carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pushsum
