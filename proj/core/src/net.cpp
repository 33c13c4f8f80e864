#include "pushsum/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <memory>
#include <mutex>
#include <poll.h>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "pushsum/errors.hpp"
#include "socket.hpp"

namespace pushsum::net {

namespace {

using Clock = std::chrono::steady_clock;
using detail::Socket;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(std::uint8_t(v >> shift));
}

template <typename Bytes>
std::uint32_t get_u32(const Bytes& in, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | in[at + i];
  return v;
}

void put_double(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(std::uint8_t(bits >> shift));
}

double get_double(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < 8; ++i) bits = (bits << 8) | in[at + i];
  return std::bit_cast<double>(bits);
}

/// Validates a header and returns the payload length.
template <typename Bytes>
std::uint32_t check_header(const Bytes& h) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (h[i] != kFrameMagic[i]) throw Error(ErrorCode::kMalformedFrame, "bad frame magic");
  }
  if (h[4] != kFrameVersion) {
    throw Error(ErrorCode::kMalformedFrame, "unsupported frame version " + std::to_string(h[4]));
  }
  if (h[5] < 1 || h[5] > 4) {
    throw Error(ErrorCode::kMalformedFrame, "unknown frame type " + std::to_string(h[5]));
  }
  const std::uint32_t len = get_u32(h, 14);
  if (len > kMaxPayload) {
    throw Error(ErrorCode::kMalformedFrame, "frame payload of " + std::to_string(len) + " bytes");
  }
  return len;
}

std::string join_ids(const std::vector<NodeId>& ids) {
  std::string out;
  for (NodeId id : ids) out += (out.empty() ? "" : ", ") + std::to_string(id);
  return out;
}

struct Event {
  enum class Kind { kFrame, kClosed, kError };
  Kind kind = Kind::kFrame;
  std::optional<NodeId> peer;
  WireFrame frame;
  std::string error;
};

/// Hand-off between the receive loop and the protocol driver.
class Inbox {
 public:
  void push(Event e) {
    {
      std::lock_guard lock(mu_);
      events_.push_back(std::move(e));
    }
    cv_.notify_one();
  }

  std::optional<Event> pop(Clock::time_point deadline) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_until(lock, deadline, [&] { return !events_.empty(); })) return std::nullopt;
    Event e = std::move(events_.front());
    events_.pop_front();
    return e;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Event> events_;
};

/// Receive loop over all inbound connections. A connection's first frame
/// must be the ROUND_SYNC hello that names the sending neighbour.
class Receiver {
 public:
  Receiver(std::vector<Socket> sockets, Inbox& inbox) : sockets_(std::move(sockets)), inbox_(inbox) {
    if (::pipe(wake_) != 0) throw Error(ErrorCode::kIo, "pipe failed");
    thread_ = std::thread([this] { loop(); });
  }

  ~Receiver() {
    const std::uint8_t b = 0;
    [[maybe_unused]] auto n = ::write(wake_[1], &b, 1);
    thread_.join();
    ::close(wake_[0]);
    ::close(wake_[1]);
  }

 private:
  void loop() {
    const std::size_t count = sockets_.size();
    std::vector<FrameReader> readers(count);
    std::vector<std::optional<NodeId>> peers(count);
    std::vector<bool> open(count, true);
    std::vector<std::uint8_t> buf(1 << 16);
    while (true) {
      std::vector<pollfd> fds;
      std::vector<std::size_t> index;
      for (std::size_t i = 0; i < count; ++i) {
        if (open[i]) {
          fds.push_back({sockets_[i].fd(), POLLIN, 0});
          index.push_back(i);
        }
      }
      fds.push_back({wake_[0], POLLIN, 0});
      if (::poll(fds.data(), fds.size(), -1) < 0) {
        if (errno == EINTR) continue;
        inbox_.push({Event::Kind::kError, std::nullopt, {}, "poll failed"});
        return;
      }
      if (fds.back().revents != 0) return;
      for (std::size_t p = 0; p + 1 < fds.size(); ++p) {
        if (fds[p].revents == 0) continue;
        const std::size_t i = index[p];
        try {
          const std::size_t n = sockets_[i].receive_some(buf);
          if (n == 0) {
            open[i] = false;
            inbox_.push({Event::Kind::kClosed, peers[i], {}, ""});
            continue;
          }
          readers[i].feed(std::span(buf.data(), n));
          while (auto frame = readers[i].next()) {
            if (!peers[i]) {
              if (frame->type != MsgType::kRoundSync) {
                throw Error(ErrorCode::kMalformedFrame, "connection did not start with a hello");
              }
              peers[i] = frame->sender;
            } else if (frame->type != MsgType::kKeyAnnounce && frame->sender != *peers[i]) {
              throw Error(ErrorCode::kMalformedFrame,
                          "frame claims sender " + std::to_string(frame->sender) +
                              " on the connection from " + std::to_string(*peers[i]));
            }
            inbox_.push({Event::Kind::kFrame, peers[i], std::move(*frame), ""});
          }
        } catch (const std::exception& e) {
          open[i] = false;
          inbox_.push({Event::Kind::kError, peers[i], {}, e.what()});
        }
      }
    }
  }

  std::vector<Socket> sockets_;
  Inbox& inbox_;
  int wake_[2] = {-1, -1};
  std::thread thread_;
};

}  // namespace

std::vector<std::uint8_t> encode_frame(const WireFrame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    throw Error(ErrorCode::kMalformedFrame, "payload too large");
  }
  std::vector<std::uint8_t> out(kFrameMagic.begin(), kFrameMagic.end());
  out.reserve(kHeaderSize + frame.payload.size());
  out.push_back(kFrameVersion);
  out.push_back(static_cast<std::uint8_t>(frame.type));
  put_u32(out, frame.sender);
  put_u32(out, frame.round);
  put_u32(out, static_cast<std::uint32_t>(frame.payload.size()));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

WireFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::kMalformedFrame, "truncated header");
  const std::uint32_t len = check_header(bytes);
  if (bytes.size() != kHeaderSize + len) {
    throw Error(ErrorCode::kMalformedFrame, "payload length does not match the frame size");
  }
  WireFrame f;
  f.type = static_cast<MsgType>(bytes[5]);
  f.sender = get_u32(bytes, 6);
  f.round = get_u32(bytes, 10);
  f.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return f;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<WireFrame> FrameReader::next() {
  if (buffer_.size() < kHeaderSize) return std::nullopt;
  const std::uint32_t len = check_header(buffer_);
  if (buffer_.size() < kHeaderSize + len) return std::nullopt;
  WireFrame f;
  f.type = static_cast<MsgType>(buffer_[5]);
  f.sender = get_u32(buffer_, 6);
  f.round = get_u32(buffer_, 10);
  f.payload.assign(buffer_.begin() + kHeaderSize, buffer_.begin() + kHeaderSize + len);
  buffer_.erase(buffer_.begin(), buffer_.begin() + kHeaderSize + len);
  return f;
}

std::vector<std::uint8_t> encode_plain_share(const Extended& s, const Extended& w) {
  std::vector<std::uint8_t> out;
  out.reserve(32);
  for (double d : {s.hi, s.lo, w.hi, w.lo}) put_double(out, d);
  return out;
}

std::pair<Extended, Extended> decode_plain_share(std::span<const std::uint8_t> payload) {
  if (payload.size() != 32) {
    throw Error(ErrorCode::kMalformedFrame, "plain share payload must be 32 bytes");
  }
  return {Extended(get_double(payload, 0), get_double(payload, 8)),
          Extended(get_double(payload, 16), get_double(payload, 24))};
}

std::vector<std::uint8_t> encode_encrypted_share(const paillier::BigInt& s,
                                                 const paillier::BigInt& w) {
  std::vector<std::uint8_t> out;
  for (const paillier::BigInt* v : {&s, &w}) {
    const auto bytes = paillier::to_bytes(*v);
    put_u32(out, static_cast<std::uint32_t>(bytes.size()));
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

std::pair<paillier::BigInt, paillier::BigInt> decode_encrypted_share(
    std::span<const std::uint8_t> payload) {
  std::size_t at = 0;
  auto read_one = [&] {
    if (payload.size() - at < 4) {
      throw Error(ErrorCode::kMalformedFrame, "truncated ciphertext length");
    }
    const std::uint32_t len = get_u32(payload, at);
    at += 4;
    if (payload.size() - at < len) throw Error(ErrorCode::kMalformedFrame, "truncated ciphertext");
    const paillier::BigInt v = paillier::from_bytes(payload.subspan(at, len));
    at += len;
    return v;
  };
  paillier::BigInt s = read_one();
  paillier::BigInt w = read_one();
  if (at != payload.size()) {
    throw Error(ErrorCode::kMalformedFrame, "trailing bytes after ciphertexts");
  }
  return {std::move(s), std::move(w)};
}

bool KeyDirectory::insert(NodeId node, const paillier::PublicKey& key) {
  auto it = keys_.find(node);
  if (it == keys_.end()) {
    keys_.emplace(node, key);
    return true;
  }
  if (!(it->second == key)) {
    throw Error(ErrorCode::kMalformedFrame,
                "conflicting public keys announced for node " + std::to_string(node));
  }
  return false;
}

const paillier::PublicKey& KeyDirectory::at(NodeId node) const {
  auto it = keys_.find(node);
  if (it == keys_.end()) {
    throw Error(ErrorCode::kTimeout, "no public key for node " + std::to_string(node));
  }
  return it->second;
}

std::vector<NodeId> KeyDirectory::missing(std::size_t n) const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < n; ++i) {
    if (!keys_.contains(i)) out.push_back(i);
  }
  return out;
}

std::vector<PeerAddress> parse_peers(std::string_view text) {
  std::vector<PeerAddress> peers;
  std::istringstream in{std::string(text)};
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string id_text, address;
    if (!(fields >> id_text)) continue;
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::kInvalidConfig,
                  "peers line " + std::to_string(line_no) + ": " + why);
    };
    std::string extra;
    if (!(fields >> address) || (fields >> extra)) fail("expected '<id> <host>:<port>'");
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0) fail("address must be host:port");
    PeerAddress p;
    try {
      std::size_t used = 0;
      const unsigned long id = std::stoul(id_text, &used);
      if (used != id_text.size()) fail("bad node id");
      const unsigned long port = std::stoul(address.substr(colon + 1), &used);
      if (used != address.size() - colon - 1 || port == 0 || port > 65535) fail("bad port");
      p.id = static_cast<NodeId>(id);
      p.port = static_cast<std::uint16_t>(port);
    } catch (const std::logic_error&) {
      fail("bad number");
    }
    p.host = address.substr(0, colon);
    peers.push_back(p);
  }
  return peers;
}

std::vector<PeerAddress> load_peers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read peers file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_peers(buf.str());
}

NodeOutcome run_networked(const NodeConfig& config) {
  const ExperimentConfig& exp = config.experiment;
  exp.validate();
  const DirectedGraph& g = exp.graph;
  const NodeId me = config.id;
  if (me >= g.size()) {
    throw Error(ErrorCode::kInvalidConfig, "node id " + std::to_string(me) + " is outside the graph");
  }
  const bool encrypted = exp.mode == Mode::kAlgorithm2;
  const auto outs = g.out_neighbors(me);
  const auto ins = g.in_neighbors(me);

  // Links: connect to every out-neighbour, accept one link per in-neighbour.
  Socket listener = detail::listen_tcp(config.listen_host, config.listen_port);
  const auto connect_deadline = Clock::now() + config.connect_timeout;
  std::map<NodeId, Socket> outbound;
  for (NodeId o : outs) {
    auto it = std::find_if(config.peers.begin(), config.peers.end(),
                           [&](const PeerAddress& p) { return p.id == o; });
    if (it == config.peers.end()) {
      throw Error(ErrorCode::kInvalidConfig, "no address for out-neighbour " + std::to_string(o));
    }
    outbound.emplace(o, detail::connect_tcp(it->host, it->port, connect_deadline,
                                            "node " + std::to_string(o)));
  }

  auto send = [&](NodeId to, const WireFrame& f) {
    if (config.on_send) config.on_send(f, to);
    outbound.at(to).send_all(encode_frame(f));
  };
  for (NodeId o : outs) send(o, WireFrame{MsgType::kRoundSync, me, 0, {}});

  std::vector<Socket> inbound;
  while (inbound.size() < ins.size()) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(connect_deadline -
                                                                            Clock::now());
    if (left.count() <= 0) {
      throw Error(ErrorCode::kPeerDisconnected,
                  "only " + std::to_string(inbound.size()) + " of " + std::to_string(ins.size()) +
                      " in-neighbours connected to node " + std::to_string(me));
    }
    Socket s = detail::accept_tcp(listener, left);
    if (s.valid()) inbound.push_back(std::move(s));
  }
  listener.close();

  Inbox inbox;
  NodeOutcome outcome;
  std::map<std::pair<Round, NodeId>, WireFrame> pending;
  std::set<NodeId> closed;

  std::optional<paillier::Keypair> keypair;
  std::optional<paillier::FixedPointCodec> own_codec;
  std::map<NodeId, paillier::FixedPointCodec> codecs;

  // Applies one event; returns false on timeout.
  auto pump = [&](Clock::time_point deadline) {
    std::optional<Event> ev = inbox.pop(deadline);
    if (!ev) return false;
    switch (ev->kind) {
      case Event::Kind::kError:
        throw Error(ErrorCode::kMalformedFrame,
                    "link from " + (ev->peer ? "node " + std::to_string(*ev->peer) : "unknown peer") +
                        ": " + ev->error);
      case Event::Kind::kClosed:
        if (ev->peer) closed.insert(*ev->peer);
        return true;
      case Event::Kind::kFrame: break;
    }
    WireFrame& f = ev->frame;
    switch (f.type) {
      case MsgType::kRoundSync: break;
      case MsgType::kKeyAnnounce: {
        std::size_t used = 0;
        const auto key = paillier::PublicKey::deserialize(f.payload, &used);
        if (used != f.payload.size()) {
          throw Error(ErrorCode::kMalformedFrame, "trailing bytes after public key");
        }
        if (outcome.keys.insert(f.sender, key)) {
          for (NodeId o : outs) send(o, f);
        }
        break;
      }
      case MsgType::kSharePlain:
      case MsgType::kShareEnc: {
        const bool expected_type = (f.type == MsgType::kShareEnc) == encrypted;
        if (!expected_type) throw Error(ErrorCode::kMalformedFrame, "share frame of the wrong mode");
        pending.insert_or_assign({f.round, f.sender}, std::move(f));
        break;
      }
    }
    return true;
  };

  if (encrypted) {
    keypair = node_keypair(exp.seed, me, exp.crypto.key_bits);
    own_codec.emplace(keypair->public_key().n(), exp.crypto.fractional_bits);
    outcome.keys.insert(me, keypair->public_key());
    const WireFrame announce{MsgType::kKeyAnnounce, me, 0, keypair->public_key().serialize()};
    for (NodeId o : outs) send(o, announce);
  }
  auto receiver = std::make_unique<Receiver>(std::move(inbound), inbox);
  if (encrypted) {
    const auto key_deadline = Clock::now() + config.key_timeout;
    while (outcome.keys.size() < g.size()) {
      if (!pump(key_deadline)) {
        throw Error(ErrorCode::kTimeout, "node " + std::to_string(me) +
                                             " is missing public keys of nodes " +
                                             join_ids(outcome.keys.missing(g.size())));
      }
    }
    for (NodeId o : outs) {
      codecs.emplace(o, paillier::FixedPointCodec(outcome.keys.at(o).n(), exp.crypto.fractional_bits));
    }
  }

  Rng weight_rng = Rng::derive(exp.seed, me, Stream::kWeights);
  Rng crypto_rng = Rng::derive(exp.seed, me, Stream::kCrypto);
  NodeState state = initial_state(me, exp.x0[me]);
  outcome.history.push_back(state);
  const Round iterations = exp.max_rounds + 1;

  for (Round k = 0; k < iterations; ++k) {
    const RoundWeights weights =
        exp.mode == Mode::kAlgorithm0 ? uniform_push_weights(me, k, outs)
                                      : generate_round_weights(me, k, outs, exp.weights, weight_rng);
    OutgoingShares out = outgoing_shares(state, weights);
    for (ShareMessage& msg : out.messages) {
      WireFrame f{encrypted ? MsgType::kShareEnc : MsgType::kSharePlain, me, k, {}};
      if (encrypted) {
        const paillier::FixedPointCodec& codec = codecs.at(msg.receiver);
        const paillier::PublicKey& key = outcome.keys.at(msg.receiver);
        const Extended qs = codec.quantize(msg.s_share);
        const Extended qw = codec.quantize(msg.w_share);
        out.retained.s += msg.s_share - qs;
        out.retained.w += msg.w_share - qw;
        auto t0 = Clock::now();
        const auto cs = paillier::encrypt(key, codec.encode(qs), crypto_rng);
        auto t1 = Clock::now();
        const auto cw = paillier::encrypt(key, codec.encode(qw), crypto_rng);
        auto t2 = Clock::now();
        outcome.crypto.encrypt.add(std::chrono::duration<double, std::milli>(t1 - t0).count());
        outcome.crypto.encrypt.add(std::chrono::duration<double, std::milli>(t2 - t1).count());
        f.payload = encode_encrypted_share(cs.value, cw.value);
        outcome.crypto.max_share_error =
            std::max({outcome.crypto.max_share_error, std::abs((msg.s_share - qs).to_double()),
                      std::abs((msg.w_share - qw).to_double())});
      } else {
        f.payload = encode_plain_share(msg.s_share, msg.w_share);
      }
      send(msg.receiver, f);
    }

    const auto round_deadline = Clock::now() + config.round_timeout;
    auto missing = [&] {
      std::vector<NodeId> m;
      for (NodeId j : ins) {
        if (!pending.contains({k, j})) m.push_back(j);
      }
      return m;
    };
    for (auto absent = missing(); !absent.empty(); absent = missing()) {
      for (NodeId j : absent) {
        if (closed.contains(j)) {
          throw Error(ErrorCode::kPeerDisconnected,
                      "node " + std::to_string(j) + " hung up before sending its round " +
                          std::to_string(k) + " share");
        }
      }
      if (!pump(round_deadline)) {
        throw Error(ErrorCode::kTimeout, "node " + std::to_string(me) + " round " +
                                             std::to_string(k) + " still waits for nodes " +
                                             join_ids(absent));
      }
    }

    std::vector<ShareMessage> received;
    for (NodeId j : ins) {
      auto node = pending.extract({k, j});
      const WireFrame& f = node.mapped();
      ShareMessage msg{j, me, k, {}, {}};
      if (encrypted) {
        const auto [cs, cw] = decode_encrypted_share(f.payload);
        const std::uint64_t id = keypair->public_key().id();
        try {
          auto t0 = Clock::now();
          msg.s_share = own_codec->decode(paillier::decrypt(*keypair, {cs, id}));
          auto t1 = Clock::now();
          msg.w_share = own_codec->decode(paillier::decrypt(*keypair, {cw, id}));
          auto t2 = Clock::now();
          outcome.crypto.decrypt.add(std::chrono::duration<double, std::milli>(t1 - t0).count());
          outcome.crypto.decrypt.add(std::chrono::duration<double, std::milli>(t2 - t1).count());
        } catch (const Error& e) {
          throw Error(ErrorCode::kDecryptFailure,
                      "share from node " + std::to_string(j) + ": " + e.what());
        }
      } else {
        std::tie(msg.s_share, msg.w_share) = decode_plain_share(f.payload);
      }
      received.push_back(msg);
      outcome.received.push_back(msg);
    }
    state = apply_round(state, received, out.retained, ins);
    outcome.history.push_back(state);
  }

  for (auto& [id, s] : outbound) s.shutdown_write();
  receiver.reset();
  return outcome;
}

}  // namespace pushsum::net
