#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "presets.hpp"

#include "pushsum/config.hpp"
#include "pushsum/errors.hpp"
#include "pushsum/net.hpp"
#include "pushsum/sim.hpp"
#include "pushsum/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pushsum;

namespace {

constexpr double kConvergenceTol = 1e-6;

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out_dir = "pushsum-out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  auto* cfg = cmd->add_option("--config", o.config_path, "Experiment config (JSON)");
  auto* pre = cmd->add_option("--preset", o.preset, "Built-in config: default, fig2, fig3, fig7");
  cfg->excludes(pre);
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--mode", o.mode, "Override the mode: algorithm0, algorithm1, algorithm2");
  cmd->add_option("--out-dir", o.out_dir, "Directory for CSV outputs and the manifest");
}

std::string preset_text(const std::string& name) {
  for (const auto& [key, text] : cli::kPresets) {
    if (key == name) return std::string(text);
  }
  std::string known;
  for (const auto& [key, text] : cli::kPresets) known += (known.empty() ? "" : ", ") + std::string(key);
  throw Error(ErrorCode::kInvalidConfig, "unknown preset '" + name + "' (known: " + known + ")");
}

/// Loads the config, applies overrides and re-validates. Redrawn x0 keeps
/// the seed override meaningful for presets without explicit values.
RunDescription load(const CommonOptions& o, std::string& source_text) {
  RunDescription d;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot read config file " + o.config_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    source_text = buf.str();
    d = parse_run_description(source_text, o.config_path);
  } else {
    source_text = preset_text(o.preset.empty() ? "default" : o.preset);
    d = parse_run_description(source_text, "preset:" + (o.preset.empty() ? "default" : o.preset));
  }
  if (o.seed) {
    d.experiment.seed = *o.seed;
    if (d.x0_range && d.experiment.x0.size() == d.experiment.graph.size()) {
      d.experiment.x0 = draw_initial_values(d.experiment.graph.size(), d.x0_range->first,
                                            d.x0_range->second, *o.seed);
    }
  }
  if (!o.mode.empty()) d.experiment.mode = parse_mode(o.mode);
  d.experiment.validate();
  return d;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

json dispersion(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const auto positive = std::count_if(values.begin(), values.end(), [](double v) { return v > 0; });
  return {{"count", values.size()},
          {"mean", mean},
          {"stddev", values.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0},
          {"min", *std::min_element(values.begin(), values.end())},
          {"max", *std::max_element(values.begin(), values.end())},
          {"positive_fraction", double(positive) / n}};
}

/// Writes the manifest after checking that every listed output is non-empty.
void write_manifest(const fs::path& dir, json manifest) {
  for (const auto& name : manifest["outputs"]) {
    const fs::path p = dir / name.get<std::string>();
    if (!fs::exists(p) || fs::file_size(p) == 0) {
      throw Error(ErrorCode::kIo, "output " + p.string() + " is missing or empty");
    }
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_simulate(const CommonOptions& o, bool attack_only) {
  std::string text;
  const RunDescription d = load(o, text);
  const ExperimentConfig& cfg = d.experiment;
  if (attack_only && !cfg.adversary) {
    throw Error(ErrorCode::kInvalidConfig, "the attack command needs an adversary section");
  }
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);

  json manifest = {{"config_hash", hex64(d.config_hash)},
                   {"name", d.name},
                   {"seed", cfg.seed},
                   {"mode", to_string(cfg.mode)},
                   {"outputs", json::array()},
                   {"summary", json::object()}};
  bool ok = true;
  json& summary = manifest["summary"];

  if (d.trials) {
    const auto trials = run_attack_trials(cfg, *d.trials);
    std::ostringstream csv;
    write_attack_csv(csv, trials);
    write_file(dir / "attack.csv", csv.str());
    manifest["outputs"].push_back("attack.csv");
    json per_value = json::array();
    for (double v : d.trials->target_values) {
      std::vector<double> est;
      for (const AttackTrial& t : trials) {
        if (t.true_x0 == v) est.push_back(t.estimate);
      }
      json stats = dispersion(est);
      stats["true_x0"] = v;
      per_value.push_back(stats);
      std::cout << "target " << v << ": " << stats.dump() << "\n";
    }
    summary["attack_dispersion"] = per_value;
  } else {
    std::vector<Round> ks =
        d.sweep ? d.sweep->big_k_values : std::vector<Round>{cfg.weights.big_k};
    json runs = json::array();
    for (Round k : ks) {
      ExperimentConfig run_cfg = cfg;
      run_cfg.weights.big_k = k;
      const ExperimentResult r = run_experiment(run_cfg);
      const std::string name = d.sweep ? "error_K" + std::to_string(k) + ".csv" : "error.csv";
      std::ostringstream csv;
      write_error_csv(csv, r.metrics);
      write_file(dir / name, csv.str());
      manifest["outputs"].push_back(name);

      const CheckResult mass = check_mass_conservation(r.trace);
      const double final_e = r.metrics.error.back();
      const bool converged = final_e < kConvergenceTol;
      json run = {{"K", k},
                  {"alpha", r.metrics.alpha},
                  {"final_error", final_e},
                  {"rounds", r.trace.iterations()},
                  {"converged", converged},
                  {"mass_conservation", mass.passed}};
      if (run_cfg.mode == Mode::kAlgorithm2) {
        run["mean_encryption_ms"] = r.crypto.encrypt.mean_ms();
        run["max_share_error"] = r.crypto.max_share_error;
      }
      if (r.attack_estimate) {
        run["attack"] = {{"kind", to_string(cfg.adversary->attack)},
                         {"target", *cfg.adversary->target},
                         {"true_x0", run_cfg.x0[*cfg.adversary->target]},
                         {"estimate", *r.attack_estimate}};
      }
      if (!r.baseline_recovered.empty()) {
        json rec = json::object();
        for (const auto& [node, value] : r.baseline_recovered) rec[std::to_string(node)] = value;
        run["baseline_recovered"] = rec;
      }
      ok = ok && converged && mass.passed;
      std::cout << "K=" << k << " final e=" << final_e << " rounds=" << r.trace.iterations()
                << (converged ? "" : " (not converged)") << "\n";
      runs.push_back(run);
    }
    summary["runs"] = runs;
    summary["final_error"] = runs.back()["final_error"];
    summary["rounds"] = runs.back()["rounds"];
  }
  write_manifest(dir, manifest);
  std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
  return ok ? 0 : 1;
}

struct NodeOptions {
  NodeId id = 0;
  std::string listen = "127.0.0.1:0";
  std::string peers;
  std::string out;
  int timeout_ms = 15000;
};

int cmd_node(const CommonOptions& o, const NodeOptions& n) {
  std::string text;
  const RunDescription d = load(o, text);
  net::NodeConfig cfg;
  cfg.id = n.id;
  const auto colon = n.listen.rfind(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "--listen must be host:port");
  }
  cfg.listen_host = n.listen.substr(0, colon);
  cfg.listen_port = static_cast<std::uint16_t>(std::stoul(n.listen.substr(colon + 1)));
  cfg.peers = net::load_peers(n.peers);
  cfg.experiment = d.experiment;
  cfg.connect_timeout = cfg.key_timeout = cfg.round_timeout = std::chrono::milliseconds(n.timeout_ms);

  const net::NodeOutcome outcome = net::run_networked(cfg);

  const fs::path out = n.out.empty() ? fs::path(o.out_dir) / ("node" + std::to_string(n.id) + ".csv")
                                     : fs::path(n.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ostringstream csv;
  csv << "round,s,w,pi\n" << std::setprecision(17);
  for (const NodeState& st : outcome.history) {
    csv << st.round << ',' << st.s.to_double() << ',' << st.w.to_double() << ',' << st.pi << '\n';
  }
  write_file(out, csv.str());

  double alpha = 0.0;
  for (double v : d.experiment.x0) alpha += v;
  alpha /= double(d.experiment.x0.size());
  const double final_pi = outcome.history.back().pi;
  const bool converged = std::abs(final_pi - alpha) < kConvergenceTol;
  json manifest = {{"config_hash", hex64(d.config_hash)},
                   {"seed", d.experiment.seed},
                   {"mode", to_string(d.experiment.mode)},
                   {"node", n.id},
                   {"outputs", {out.filename().string()}},
                   {"summary",
                    {{"alpha", alpha},
                     {"final_pi", final_pi},
                     {"final_error", std::abs(final_pi - alpha)},
                     {"rounds", outcome.history.size() - 1},
                     {"converged", converged},
                     {"encryptions", outcome.crypto.encrypt.count},
                     {"mean_encryption_ms", outcome.crypto.encrypt.mean_ms()},
                     {"max_encryption_ms", outcome.crypto.encrypt.max_ms},
                     {"mean_decryption_ms", outcome.crypto.decrypt.mean_ms()}}}};
  const fs::path manifest_path = out.string() + ".manifest.json";
  write_file(manifest_path, manifest.dump(2) + "\n");
  std::cout << "node " << n.id << " final pi " << std::setprecision(12) << final_pi
            << " mean encryption " << outcome.crypto.encrypt.mean_ms() << " ms\n";
  return converged ? 0 : 1;
}

int cmd_verify(const CommonOptions& o, bool corrupt) {
  std::string text;
  const RunDescription d = load(o, text);
  WeightGenerator generator = generate_round_weights;
  if (corrupt) {
    generator = [](NodeId node, Round round, std::span<const NodeId> outs,
                   const WeightParams& p, Rng& rng) {
      RoundWeights w = generate_round_weights(node, round, outs, p, rng);
      if (node == 0) w.s.front() += 0.25;
      return w;
    };
  }
  const VerifyReport report = run_verify_suites(d.experiment, generator);
  for (const CheckResult& c : report.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  }
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving push-sum average consensus"};
  app.require_subcommand(1);

  CommonOptions sim_opts, attack_opts, node_opts, verify_opts;
  auto* simulate = app.add_subcommand("simulate", "Run a simulated experiment");
  add_common(simulate, sim_opts);
  auto* attack = app.add_subcommand("attack", "Simulate with the config's adversary and attack");
  add_common(attack, attack_opts);

  NodeOptions node_args;
  auto* node = app.add_subcommand("node", "Run one networked node");
  add_common(node, node_opts);
  node->add_option("--id", node_args.id, "Node id")->required();
  node->add_option("--listen", node_args.listen, "Listen address host:port");
  node->add_option("--peers", node_args.peers, "Peers file: '<id> <host>:<port>' per line")->required();
  node->add_option("--out", node_args.out, "CSV of this node's trajectory");
  node->add_option("--timeout-ms", node_args.timeout_ms, "Connect/key/round deadline");

  bool corrupt = false;
  auto* verify = app.add_subcommand("verify", "Run the invariant suites");
  add_common(verify, verify_opts);
  verify->add_flag("--corrupt-weights", corrupt, "Test hook: perturb node 0's weights")
      ->group("");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*simulate) return cmd_simulate(sim_opts, false);
    if (*attack) return cmd_simulate(attack_opts, true);
    if (*node) return cmd_node(node_opts, node_args);
    if (*verify) return cmd_verify(verify_opts, corrupt);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
