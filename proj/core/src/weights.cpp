#include "pushsum/weights.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "pushsum/errors.hpp"

namespace pushsum {
namespace {

void check_epsilon(double epsilon, std::size_t m) {
  if (!(epsilon > 0.0) || !(epsilon < epsilon_bound(m))) {
    std::ostringstream os;
    os << "epsilon = " << epsilon << " must satisfy 0 < epsilon < 1/" << m
       << " = " << epsilon_bound(m);
    throw Error(ErrorCode::kInvalidEpsilon, os.str());
  }
}

std::vector<NodeId> support(NodeId node, std::span<const NodeId> out) {
  std::vector<NodeId> t;
  t.reserve(out.size() + 1);
  t.push_back(node);
  t.insert(t.end(), out.begin(), out.end());
  return t;
}

double lookup(const std::vector<NodeId>& targets, const std::vector<double>& v,
              NodeId target) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == target) return v[i];
  }
  return 0.0;
}

void close_column(std::vector<double>& v) {
  double others = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) others += v[i];
  v[0] = 1.0 - others;
}

}  // namespace

void validate(const WeightParams& params, const DirectedGraph& g) {
  if (!(params.phase_a_range > 0.0)) {
    throw Error(ErrorCode::kInvalidEpsilon, "phase_a_range must be positive");
  }
  const std::size_t m = max_out_degree(g) + 1;
  if (!(params.epsilon > 0.0) || !(params.epsilon < epsilon_bound(m))) {
    std::ostringstream os;
    os << "epsilon = " << params.epsilon
       << " violates epsilon < 1/(max out-degree + 1) = 1/" << m << " = "
       << epsilon_bound(m);
    throw Error(ErrorCode::kInvalidEpsilon, os.str());
  }
}

double RoundWeights::s_weight(NodeId target) const {
  return lookup(targets, s, target);
}

double RoundWeights::w_weight(NodeId target) const {
  return lookup(targets, w, target);
}

std::vector<double> phase_b_map(std::span<const double> simplex_point,
                                double epsilon) {
  const std::size_t m = simplex_point.size();
  check_epsilon(epsilon, m);
  const double scale = 1.0 - static_cast<double>(m) * epsilon;
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = epsilon + simplex_point[j] * scale;
  return out;
}

std::vector<double> sample_simplex(std::size_t m, Rng& rng) {
  std::vector<double> cuts(m - 1);
  for (double& c : cuts) c = rng.uniform01();
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> d(m);
  double prev = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    d[j] = cuts[j] - prev;
    prev = cuts[j];
  }
  d[m - 1] = 1.0 - prev;
  return d;
}

RoundWeights generate_round_weights(NodeId node, Round round,
                                    std::span<const NodeId> out_neighbors,
                                    const WeightParams& params, Rng& rng) {
  const std::size_t m = out_neighbors.size() + 1;
  check_epsilon(params.epsilon, m);

  RoundWeights rw;
  rw.node = node;
  rw.round = round;
  rw.targets = support(node, out_neighbors);

  if (in_phase_a(round, params)) {
    const double b = params.phase_a_range;
    rw.s.resize(m);
    for (double& v : rw.s) v = rng.uniform(-b, b);
    const double sum = std::accumulate(rw.s.begin(), rw.s.end(), 0.0);
    const double correction = (1.0 - sum) / static_cast<double>(m);
    for (double& v : rw.s) v += correction;
    close_column(rw.s);
    rw.w.assign(m, 0.0);
    rw.w[0] = 1.0;
    return rw;
  }

  // Resampling only triggers when a gap is so small that rounding the self
  // weight lands on the boundary.
  for (;;) {
    rw.s = phase_b_map(sample_simplex(m, rng), params.epsilon);
    close_column(rw.s);
    const bool open = std::all_of(rw.s.begin(), rw.s.end(), [&](double v) {
      return v > params.epsilon && v < 1.0;
    });
    if (open) break;
  }
  rw.w = rw.s;
  return rw;
}

RoundWeights uniform_push_weights(NodeId node, Round round,
                                  std::span<const NodeId> out_neighbors) {
  RoundWeights rw;
  rw.node = node;
  rw.round = round;
  rw.targets = support(node, out_neighbors);
  const double p = 1.0 / static_cast<double>(rw.targets.size());
  rw.s.assign(rw.targets.size(), p);
  close_column(rw.s);
  rw.w = rw.s;
  return rw;
}

}  // namespace pushsum
