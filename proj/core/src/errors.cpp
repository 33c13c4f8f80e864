#include "pushsum/errors.hpp"

namespace pushsum {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidGraph: return "InvalidGraph";
    case ErrorCode::kNotStronglyConnected: return "NotStronglyConnected";
    case ErrorCode::kInvalidEpsilon: return "InvalidEpsilon";
    case ErrorCode::kRoundMismatch: return "RoundMismatch";
    case ErrorCode::kMissingShare: return "MissingShare";
    case ErrorCode::kDivisionByZero: return "DivisionByZero";
    case ErrorCode::kPlaintextOutOfRange: return "PlaintextOutOfRange";
    case ErrorCode::kMalformedCiphertext: return "MalformedCiphertext";
    case ErrorCode::kMagnitudeOverflow: return "MagnitudeOverflow";
    case ErrorCode::kTraceIncomplete: return "TraceIncomplete";
    case ErrorCode::kTopologyConditionUnmet: return "TopologyConditionUnmet";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kRangeUncovered: return "RangeUncovered";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kPeerDisconnected: return "PeerDisconnected";
    case ErrorCode::kDecryptFailure: return "DecryptFailure";
    case ErrorCode::kMalformedFrame: return "MalformedFrame";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace pushsum
