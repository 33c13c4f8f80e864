#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <future>
#include <mutex>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "pushsum/errors.hpp"
#include "pushsum/net.hpp"
#include "test_support.hpp"

namespace pushsum::net {
namespace {

TEST(Frame, RoundTrip) {
  const WireFrame f{MsgType::kSharePlain, 7, 123456, {1, 2, 3, 250}};
  const auto bytes = encode_frame(f);
  ASSERT_EQ(bytes.size(), kHeaderSize + 4);
  EXPECT_EQ(bytes[0], 'P');
  EXPECT_EQ(bytes[4], kFrameVersion);
  EXPECT_EQ(bytes[5], 2);
  // sender 7, big-endian
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(bytes[9], 7);
  EXPECT_EQ(bytes[17], 4);
  EXPECT_EQ(decode_frame(bytes), f);
}

TEST(Frame, MalformedInputs) {
  auto good = encode_frame(WireFrame{MsgType::kRoundSync, 1, 0, {}});
  auto expect_malformed = [](std::vector<std::uint8_t> b) {
    try {
      decode_frame(b);
      ADD_FAILURE() << "accepted a malformed frame";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kMalformedFrame);
    }
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  expect_malformed(bad_magic);
  auto bad_version = good;
  bad_version[4] = 9;
  expect_malformed(bad_version);
  auto bad_type = good;
  bad_type[5] = 0;
  expect_malformed(bad_type);
  auto trailing = good;
  trailing.push_back(0);
  expect_malformed(trailing);
  auto truncated = good;
  truncated.pop_back();
  expect_malformed(truncated);
  auto huge = good;
  huge[14] = 0x7f;
  expect_malformed(huge);
}

TEST(Frame, ReaderHandlesSplitsAndBatches) {
  std::vector<std::uint8_t> stream;
  std::vector<WireFrame> frames;
  for (std::uint32_t i = 0; i < 20; ++i) {
    frames.push_back({MsgType::kShareEnc, i, i * 3, std::vector<std::uint8_t>(i * 7, std::uint8_t(i))});
    const auto b = encode_frame(frames.back());
    stream.insert(stream.end(), b.begin(), b.end());
  }
  FrameReader reader;
  std::vector<WireFrame> got;
  Rng rng(3);
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t chunk = std::min<std::size_t>(1 + rng.below(40), stream.size() - pos);
    reader.feed(std::span(stream).subspan(pos, chunk));
    pos += chunk;
    while (auto f = reader.next()) got.push_back(*f);
  }
  EXPECT_EQ(got, frames);
  EXPECT_EQ(reader.buffered(), 0u);

  FrameReader bad;
  const std::vector<std::uint8_t> junk(kHeaderSize, 0xAB);
  bad.feed(junk);
  EXPECT_THROW(bad.next(), Error);
}

TEST(Payload, PlainAndEncryptedCodecs) {
  const Extended s(1.5, 1e-20), w(-0.25, 3e-19);
  const auto p = encode_plain_share(s, w);
  EXPECT_EQ(p.size(), 32u);
  const auto [s2, w2] = decode_plain_share(p);
  EXPECT_EQ(s2, s);
  EXPECT_EQ(w2, w);
  EXPECT_THROW(decode_plain_share(std::span(p).first(31)), Error);

  const paillier::BigInt a("123456789012345678901234567890"), b(0);
  const auto e = encode_encrypted_share(a, b);
  const auto [a2, b2] = decode_encrypted_share(e);
  EXPECT_EQ(a2, a);
  EXPECT_EQ(b2, b);
  auto cut = e;
  cut.pop_back();
  EXPECT_THROW(decode_encrypted_share(cut), Error);
}

TEST(Keys, DirectoryIsIdempotentAndRejectsConflicts) {
  const auto k1 = node_keypair(1, 0, 64).public_key();
  const auto k2 = node_keypair(1, 1, 64).public_key();
  KeyDirectory d;
  EXPECT_TRUE(d.insert(0, k1));
  EXPECT_FALSE(d.insert(0, k1));
  EXPECT_THROW(d.insert(0, k2), Error);
  EXPECT_EQ(d.missing(3), (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(d.at(0), k1);
}

TEST(Peers, Parsing) {
  const auto peers = parse_peers("# cluster\n0 127.0.0.1:4000\n\n1 localhost:4001  # second\n");
  ASSERT_EQ(peers.size(), 2u);
  EXPECT_EQ(peers[1].id, 1u);
  EXPECT_EQ(peers[1].host, "localhost");
  EXPECT_EQ(peers[1].port, 4001);
  try {
    parse_peers("0 127.0.0.1:4000\n1 nohostport\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_peers("0 host:99999\n"), Error);
}

struct Cluster {
  std::vector<NodeConfig> configs;
};

Cluster make_cluster(const ExperimentConfig& exp) {
  Cluster c;
  std::vector<PeerAddress> peers;
  for (NodeId i = 0; i < exp.graph.size(); ++i) {
    peers.push_back({i, "127.0.0.1", testing::free_port()});
  }
  for (NodeId i = 0; i < exp.graph.size(); ++i) {
    NodeConfig nc;
    nc.id = i;
    nc.listen_port = peers[i].port;
    nc.peers = peers;
    nc.experiment = exp;
    c.configs.push_back(nc);
  }
  return c;
}

std::vector<NodeOutcome> run_cluster(const Cluster& c) {
  std::vector<std::future<NodeOutcome>> futures;
  for (const NodeConfig& nc : c.configs) {
    futures.push_back(std::async(std::launch::async, [nc] { return run_networked(nc); }));
  }
  std::vector<NodeOutcome> out;
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

ExperimentConfig small_experiment(Mode mode) {
  ExperimentConfig e;
  e.mode = mode;
  e.max_rounds = 40;
  e.stop_tol = 0.0;
  e.seed = 31;
  e.crypto.key_bits = 128;
  return e;
}

void expect_matches_simulation(const std::vector<NodeOutcome>& nodes, const ExecutionTrace& t) {
  for (NodeId i = 0; i < nodes.size(); ++i) {
    ASSERT_EQ(nodes[i].history.size(), t.states.size());
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      EXPECT_EQ(nodes[i].history[k].s, t.states[k][i].s) << "node " << i << " round " << k;
      EXPECT_EQ(nodes[i].history[k].w, t.states[k][i].w) << "node " << i << " round " << k;
    }
  }
}

TEST(Networked, PlaintextMatchesSimulatorBitwise) {
  const ExperimentConfig exp = small_experiment(Mode::kAlgorithm1);
  const auto nodes = run_cluster(make_cluster(exp));
  expect_matches_simulation(nodes, run_experiment(exp).trace);
}

TEST(Networked, Algorithm0MatchesSimulator) {
  const ExperimentConfig exp = small_experiment(Mode::kAlgorithm0);
  const auto nodes = run_cluster(make_cluster(exp));
  expect_matches_simulation(nodes, run_experiment(exp).trace);
}

TEST(Networked, EncryptedMatchesSimulatorAndKeepsWireClean) {
  const ExperimentConfig exp = small_experiment(Mode::kAlgorithm2);
  Cluster c = make_cluster(exp);
  std::mutex mu;
  std::vector<WireFrame> sent;
  for (NodeConfig& nc : c.configs) {
    nc.on_send = [&](const WireFrame& f, NodeId) {
      std::lock_guard lock(mu);
      sent.push_back(f);
    };
  }
  const auto nodes = run_cluster(c);
  const ExperimentResult sim = run_experiment(exp);
  expect_matches_simulation(nodes, sim.trace);

  for (const NodeOutcome& n : nodes) {
    EXPECT_EQ(n.keys.size(), 5u);
    EXPECT_LE(n.crypto.max_share_error, std::ldexp(1.0, -30));
  }

  // Needles: each share's double encoding and, when at least four bytes
  // long, its fixed-point integer.
  std::vector<std::vector<std::uint8_t>> needles;
  for (const auto& round : sim.trace.messages) {
    for (const ShareMessage& m : round) {
      for (const Extended& v : {m.s_share, m.w_share}) {
        if (v.hi == 0.0) continue;
        const auto bits = std::bit_cast<std::uint64_t>(v.hi);
        std::vector<std::uint8_t> be(8);
        for (int b = 0; b < 8; ++b) be[b] = std::uint8_t(bits >> (56 - 8 * b));
        needles.push_back(be);
        const paillier::FixedPointCodec codec(nodes[m.receiver].keys.at(m.receiver).n(), 32);
        const auto fixed = paillier::to_bytes(codec.encode(v));
        if (fixed.size() >= 4) needles.push_back(fixed);
      }
    }
  }
  ASSERT_FALSE(needles.empty());
  std::size_t share_frames = 0;
  for (const WireFrame& f : sent) {
    EXPECT_NE(f.type, MsgType::kSharePlain);
    if (f.type != MsgType::kShareEnc) continue;
    ++share_frames;
    for (const auto& needle : needles) {
      const auto hit = std::search(f.payload.begin(), f.payload.end(), needle.begin(), needle.end());
      ASSERT_EQ(hit, f.payload.end()) << "plaintext visible in frame from node " << f.sender;
    }
  }
  EXPECT_EQ(share_frames, 8u * (exp.max_rounds + 1));
}

// Minimal blocking TCP helpers for a scripted peer.
int raw_listen(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

int raw_connect(std::uint16_t port) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) return fd;
    ::close(fd);
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return -1;
}

TEST(Networked, MissingKeysTimeOutNamingTheNodes) {
  ExperimentConfig exp = small_experiment(Mode::kAlgorithm2);
  exp.graph = testing::from_links(2, {{0, 1}, {1, 0}});
  exp.x0 = {1.0, 2.0};
  Cluster c = make_cluster(exp);
  NodeConfig cfg = c.configs[0];
  cfg.key_timeout = std::chrono::milliseconds(300);

  // Scripted node 1: completes the handshake but never announces a key.
  const int listener = raw_listen(c.configs[1].listen_port);
  ASSERT_GE(listener, 0);
  auto node0 = std::async(std::launch::async, [cfg] { return run_networked(cfg); });
  const int in_fd = ::accept(listener, nullptr, nullptr);
  const int out_fd = raw_connect(cfg.listen_port);
  ASSERT_GE(out_fd, 0);
  const auto hello = encode_frame(WireFrame{MsgType::kRoundSync, 1, 0, {}});
  ASSERT_EQ(::send(out_fd, hello.data(), hello.size(), MSG_NOSIGNAL),
            static_cast<ssize_t>(hello.size()));
  try {
    node0.get();
    ADD_FAILURE() << "expected a timeout";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout) << e.what();
    EXPECT_NE(std::string(e.what()).find("missing public keys of nodes 1"), std::string::npos)
        << e.what();
  }
  ::close(out_fd);
  ::close(in_fd);
  ::close(listener);
}

TEST(Networked, UnreachablePeerIsReported) {
  ExperimentConfig exp = small_experiment(Mode::kAlgorithm1);
  exp.graph = testing::from_links(2, {{0, 1}, {1, 0}});
  exp.x0 = {1.0, 2.0};
  Cluster c = make_cluster(exp);
  c.configs[0].connect_timeout = std::chrono::milliseconds(400);
  try {
    run_networked(c.configs[0]);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPeerDisconnected);
    EXPECT_NE(std::string(e.what()).find("node 1"), std::string::npos) << e.what();
  }
}

TEST(Networked, PeerHangingUpMidRun) {
  ExperimentConfig exp = small_experiment(Mode::kAlgorithm1);
  exp.graph = testing::from_links(2, {{0, 1}, {1, 0}});
  exp.x0 = {1.0, 2.0};
  Cluster c = make_cluster(exp);
  ExperimentConfig shorter = exp;
  shorter.max_rounds = 5;
  c.configs[1].experiment = shorter;
  auto node1 = std::async(std::launch::async, [cfg = c.configs[1]] { return run_networked(cfg); });
  try {
    run_networked(c.configs[0]);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPeerDisconnected) << e.what();
  }
  node1.get();
}

}  // namespace
}  // namespace pushsum::net
