#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pushsum/consensus.hpp"
#include "pushsum/paillier.hpp"
#include "pushsum/sim.hpp"

namespace pushsum::net {

enum class MsgType : std::uint8_t {
  kKeyAnnounce = 1,
  kSharePlain = 2,
  kShareEnc = 3,
  kRoundSync = 4,
};

inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {'P', 'S', 'U', 'M'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kHeaderSize = 18;
inline constexpr std::uint32_t kMaxPayload = 1u << 20;

/// Header layout, all integers big-endian:
///   magic[4] version[1] msg_type[1] sender_id[4] round[4] payload_len[4]
/// For KEY_ANNOUNCE, sender_id names the node that owns the key, which may
/// differ from the neighbour that forwarded the frame.
struct WireFrame {
  MsgType type = MsgType::kRoundSync;
  NodeId sender = 0;
  Round round = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const WireFrame&, const WireFrame&) = default;
};

std::vector<std::uint8_t> encode_frame(const WireFrame& frame);

/// Decodes exactly one frame occupying all of `bytes`. Throws
/// kMalformedFrame on bad magic, version, type, length or trailing bytes.
WireFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete frame, if any. Throws kMalformedFrame on a bad header.
  std::optional<WireFrame> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::deque<std::uint8_t> buffer_;
};

/// SHARE_PLAIN payload: s.hi, s.lo, w.hi, w.lo as big-endian IEEE-754 doubles.
std::vector<std::uint8_t> encode_plain_share(const Extended& s, const Extended& w);
std::pair<Extended, Extended> decode_plain_share(std::span<const std::uint8_t> payload);

/// SHARE_ENC payload: two length-prefixed big-endian integers.
std::vector<std::uint8_t> encode_encrypted_share(const paillier::BigInt& s,
                                                 const paillier::BigInt& w);
std::pair<paillier::BigInt, paillier::BigInt> decode_encrypted_share(
    std::span<const std::uint8_t> payload);

/// Node id -> public key, filled by flooding. Re-inserting the same key is
/// a no-op; a different key for a known node is rejected.
class KeyDirectory {
 public:
  /// True when the entry is new. Throws kMalformedFrame on a conflicting key.
  bool insert(NodeId node, const paillier::PublicKey& key);
  bool contains(NodeId node) const { return keys_.contains(node); }
  std::size_t size() const { return keys_.size(); }
  const paillier::PublicKey& at(NodeId node) const;
  /// Nodes in [0, n) without a key.
  std::vector<NodeId> missing(std::size_t n) const;

 private:
  std::map<NodeId, paillier::PublicKey> keys_;
};

struct PeerAddress {
  NodeId id = 0;
  std::string host;
  std::uint16_t port = 0;
};

/// One peer per line: "<id> <host>:<port>". Blank lines and '#' comments are
/// ignored. Throws kInvalidConfig with the line number on malformed input.
std::vector<PeerAddress> parse_peers(std::string_view text);
std::vector<PeerAddress> load_peers(const std::filesystem::path& path);

struct NodeConfig {
  NodeId id = 0;
  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 0;
  std::vector<PeerAddress> peers;  // must cover at least the out-neighbours
  ExperimentConfig experiment;     // graph, x0, weights, seed, crypto, mode
  std::chrono::milliseconds connect_timeout{15000};
  std::chrono::milliseconds key_timeout{15000};
  std::chrono::milliseconds round_timeout{15000};
  /// Called with every frame this node writes, and the receiving peer.
  std::function<void(const WireFrame&, NodeId)> on_send;
};

struct NodeOutcome {
  std::vector<NodeState> history;  // states at the start of rounds 0..M+1
  std::vector<ShareMessage> received;  // decrypted shares, in round order
  KeyDirectory keys;
  CryptoStats crypto;
};

/// Runs one node to completion: connects to out-neighbours, accepts
/// in-neighbours, floods public keys (encrypted mode), then executes rounds
/// 0..M in lockstep with its neighbours. Algorithm 2 sends SHARE_ENC frames;
/// any other mode sends SHARE_PLAIN. Throws kPeerDisconnected when a peer
/// is unreachable or hangs up while its shares are still needed, kTimeout
/// when keys or shares do not arrive in time, kDecryptFailure on a bad
/// ciphertext.
NodeOutcome run_networked(const NodeConfig& config);

}  // namespace pushsum::net
