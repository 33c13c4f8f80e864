#include "pushsum/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "pushsum/errors.hpp"

namespace pushsum {

namespace {

using nlohmann::json;

/// Line of every key and array element, keyed by JSON pointer. The text has
/// already been accepted by the JSON parser, so the scan can be lenient.
std::map<std::string, int> locate_keys(std::string_view text) {
  struct Frame {
    bool object;
    std::string path;
    std::size_t index = 0;
    bool expect_key = true;
    std::string key;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  bool in_scalar = false;

  auto value_path = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.object ? f.path + "/" + f.key : f.path + "/" + std::to_string(f.index);
  };
  auto value_start = [&]() { lines.emplace(value_path(), line); };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') ++line;
    if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s.push_back(text[i]);
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
        lines.emplace(value_path(), line);
      } else {
        value_start();
      }
      in_scalar = false;
      continue;
    }
    switch (c) {
      case '{':
      case '[': {
        value_start();
        const std::string path = value_path();
        stack.push_back(Frame{c == '{', path, 0, true, {}});
        in_scalar = false;
        break;
      }
      case '}':
      case ']':
        if (!stack.empty()) stack.pop_back();
        in_scalar = false;
        break;
      case ',':
        if (!stack.empty()) {
          if (stack.back().object) {
            stack.back().expect_key = true;
          } else {
            ++stack.back().index;
          }
        }
        in_scalar = false;
        break;
      case ':':
      case ' ':
      case '\t':
      case '\r':
      case '\n':
        in_scalar = false;
        break;
      default:
        if (!in_scalar) value_start();
        in_scalar = true;
    }
  }
  return lines;
}

class Reader {
 public:
  Reader(std::string_view origin, std::map<std::string, int> lines)
      : origin_(origin), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message,
                         ErrorCode code = ErrorCode::kInvalidConfig) const {
    std::string where(origin_);
    std::string probe = path;
    while (true) {
      auto it = lines_.find(probe);
      if (it != lines_.end()) {
        where += ":" + std::to_string(it->second);
        break;
      }
      const auto slash = probe.rfind('/');
      if (slash == std::string::npos || probe.empty()) break;
      probe.erase(slash);
    }
    throw Error(code, where + ": " + (path.empty() ? "" : path + ": ") + message);
  }

  void allow_keys(const json& obj, const std::string& path,
                  std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
      bool known = false;
      for (std::string_view a : allowed) known = known || a == key;
      if (!known) fail(path + "/" + key, "unknown key");
    }
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_int(const json& v, const std::string& path) const {
    if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  Round round_value(const json& v, const std::string& path) const {
    const std::uint64_t r = unsigned_int(v, path);
    if (r > 1'000'000'000ULL) fail(path, "value is too large");
    return static_cast<Round>(r);
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  const json& array(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
  }

 private:
  std::string_view origin_;
  std::map<std::string, int> lines_;
};

DirectedGraph read_graph(const Reader& r, const json& g) {
  if (g.is_string()) {
    if (g.get<std::string>() != "reference") r.fail("/graph", "unknown named graph");
    return reference_graph();
  }
  r.allow_keys(g, "/graph", {"nodes", "edges"});
  if (!g.contains("nodes")) r.fail("/graph", "missing key 'nodes'");
  const std::uint64_t n = r.unsigned_int(g["nodes"], "/graph/nodes");
  if (n == 0 || n > 4096) r.fail("/graph/nodes", "node count must lie in [1, 4096]");
  std::vector<Edge> edges;
  if (g.contains("edges")) {
    const json& list = r.array(g["edges"], "/graph/edges");
    for (std::size_t e = 0; e < list.size(); ++e) {
      const std::string path = "/graph/edges/" + std::to_string(e);
      const json& pair = r.array(list[e], path);
      if (pair.size() != 2) r.fail(path, "an edge is a pair [receiver, sender]");
      const auto i = r.unsigned_int(pair[0], path);
      const auto j = r.unsigned_int(pair[1], path);
      if (i >= n || j >= n) r.fail(path, "edge endpoint outside the graph");
      if (i == j) r.fail(path, "self-edges are not allowed");
      edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  }
  return DirectedGraph(n, std::move(edges));
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Mode parse_mode(std::string_view text) {
  if (text == "algorithm0") return Mode::kAlgorithm0;
  if (text == "algorithm1") return Mode::kAlgorithm1;
  if (text == "algorithm2") return Mode::kAlgorithm2;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown mode '" + std::string(text) +
                  "' (expected algorithm0, algorithm1 or algorithm2)");
}

AttackKind parse_attack(std::string_view text) {
  for (AttackKind a : {AttackKind::kNone, AttackKind::kBaseline, AttackKind::kSoleNeighbor,
                       AttackKind::kColludingNeighborhood, AttackKind::kLeastSquares}) {
    if (text == to_string(a)) return a;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown attack '" + std::string(text) + "'");
}

RunDescription parse_run_description(std::string_view text, std::string_view origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string(origin) + ": " + e.what());
  }
  const Reader r(origin, locate_keys(text));
  r.allow_keys(root, "",
               {"name", "graph", "x0", "protocol", "seed", "crypto", "adversary", "experiment"});

  RunDescription d;
  d.config_hash = fnv1a64(text);
  ExperimentConfig& cfg = d.experiment;
  if (root.contains("name")) d.name = r.string(root["name"], "/name");
  if (root.contains("graph")) cfg.graph = read_graph(r, root["graph"]);
  if (root.contains("seed")) cfg.seed = r.unsigned_int(root["seed"], "/seed");

  if (root.contains("protocol")) {
    const json& p = root["protocol"];
    r.allow_keys(p, "/protocol",
                 {"mode", "K", "epsilon", "phase_a_range", "max_rounds", "stop_tol"});
    if (p.contains("mode")) {
      try {
        cfg.mode = parse_mode(r.string(p["mode"], "/protocol/mode"));
      } catch (const Error& e) {
        r.fail("/protocol/mode", e.what());
      }
    }
    if (p.contains("K")) cfg.weights.big_k = r.round_value(p["K"], "/protocol/K");
    if (p.contains("epsilon")) cfg.weights.epsilon = r.number(p["epsilon"], "/protocol/epsilon");
    if (p.contains("phase_a_range")) {
      cfg.weights.phase_a_range = r.number(p["phase_a_range"], "/protocol/phase_a_range");
    }
    if (p.contains("max_rounds")) {
      cfg.max_rounds = r.round_value(p["max_rounds"], "/protocol/max_rounds");
    }
    if (p.contains("stop_tol")) cfg.stop_tol = r.number(p["stop_tol"], "/protocol/stop_tol");
  }

  if (root.contains("crypto")) {
    const json& c = root["crypto"];
    r.allow_keys(c, "/crypto", {"key_bits", "fractional_bits"});
    if (c.contains("key_bits")) {
      cfg.crypto.key_bits = static_cast<unsigned>(r.round_value(c["key_bits"], "/crypto/key_bits"));
    }
    if (c.contains("fractional_bits")) {
      cfg.crypto.fractional_bits =
          static_cast<unsigned>(r.round_value(c["fractional_bits"], "/crypto/fractional_bits"));
    }
  }

  if (root.contains("adversary")) {
    const json& a = root["adversary"];
    r.allow_keys(a, "/adversary", {"members", "target", "attack"});
    AdversarySpec spec;
    if (a.contains("members")) {
      const json& m = r.array(a["members"], "/adversary/members");
      for (std::size_t i = 0; i < m.size(); ++i) {
        spec.members.push_back(r.round_value(m[i], "/adversary/members/" + std::to_string(i)));
      }
    }
    if (a.contains("target")) spec.target = r.round_value(a["target"], "/adversary/target");
    if (a.contains("attack")) {
      try {
        spec.attack = parse_attack(r.string(a["attack"], "/adversary/attack"));
      } catch (const Error& e) {
        r.fail("/adversary/attack", e.what());
      }
    }
    cfg.adversary = spec;
  }

  if (root.contains("experiment")) {
    const json& e = root["experiment"];
    r.allow_keys(e, "/experiment", {"sweep_K", "trials", "target_values", "x0_range"});
    if (e.contains("sweep_K")) {
      SweepSpec sweep;
      const json& ks = r.array(e["sweep_K"], "/experiment/sweep_K");
      for (std::size_t i = 0; i < ks.size(); ++i) {
        sweep.big_k_values.push_back(
            r.round_value(ks[i], "/experiment/sweep_K/" + std::to_string(i)));
      }
      if (sweep.big_k_values.empty()) r.fail("/experiment/sweep_K", "list is empty");
      d.sweep = sweep;
    }
    if (e.contains("x0_range")) {
      const json& range = r.array(e["x0_range"], "/experiment/x0_range");
      if (range.size() != 2) r.fail("/experiment/x0_range", "expected [low, high]");
      const double lo = r.number(range[0], "/experiment/x0_range");
      const double hi = r.number(range[1], "/experiment/x0_range");
      if (!(lo < hi)) r.fail("/experiment/x0_range", "low must be below high");
      d.x0_range = {lo, hi};
    }
    if (e.contains("trials") || e.contains("target_values")) {
      TrialSpec t;
      if (e.contains("trials")) t.trials = r.unsigned_int(e["trials"], "/experiment/trials");
      if (e.contains("target_values")) {
        t.target_values.clear();
        const json& v = r.array(e["target_values"], "/experiment/target_values");
        for (std::size_t i = 0; i < v.size(); ++i) {
          t.target_values.push_back(
              r.number(v[i], "/experiment/target_values/" + std::to_string(i)));
        }
      }
      if (d.x0_range) std::tie(t.x0_low, t.x0_high) = *d.x0_range;
      if (!cfg.adversary || !cfg.adversary->target) {
        r.fail("/experiment/trials", "attack trials need an adversary target");
      }
      d.trials = t;
    }
  }

  if (root.contains("x0")) {
    const json& x = r.array(root["x0"], "/x0");
    cfg.x0.clear();
    for (std::size_t i = 0; i < x.size(); ++i) {
      cfg.x0.push_back(r.number(x[i], "/x0/" + std::to_string(i)));
    }
  } else if (d.x0_range) {
    cfg.x0 = draw_initial_values(cfg.graph.size(), d.x0_range->first, d.x0_range->second,
                                 cfg.seed);
  } else if (cfg.x0.size() != cfg.graph.size()) {
    r.fail("", "x0 is required unless experiment.x0_range is given");
  }

  try {
    cfg.validate();
    if (d.sweep) {
      for (Round k : d.sweep->big_k_values) {
        ExperimentConfig alt = cfg;
        alt.weights.big_k = k;
        alt.validate();
      }
    }
  } catch (const Error& e) {
    std::string path;
    switch (e.code()) {
      case ErrorCode::kInvalidEpsilon: path = "/protocol/epsilon"; break;
      case ErrorCode::kInvalidGraph:
      case ErrorCode::kNotStronglyConnected: path = "/graph"; break;
      default: break;
    }
    if (path.empty()) {
      const std::string msg = e.what();
      if (msg.find("x0") != std::string::npos) path = "/x0";
      else if (msg.find("max_rounds") != std::string::npos) path = "/protocol/max_rounds";
      else if (msg.find("adversary") != std::string::npos) path = "/adversary";
      else if (msg.find("bits") != std::string::npos) path = "/crypto";
    }
    r.fail(path, e.what(), e.code());
  }
  return d;
}

RunDescription load_run_description(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_description(buf.str(), path.string());
}

}  // namespace pushsum
