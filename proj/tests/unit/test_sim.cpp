#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pushsum/errors.hpp"
#include "pushsum/sim.hpp"
#include "test_support.hpp"

namespace pushsum {
namespace {

Eigen::VectorXd state_vector(const std::vector<NodeState>& states, bool s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = (s ? states[i].s : states[i].w).to_double();
  }
  return v;
}

ExperimentConfig reference_config(Round big_k = 1) {
  ExperimentConfig c;
  c.weights.big_k = big_k;
  c.max_rounds = 60;
  c.stop_tol = 0.0;
  c.seed = 11;
  return c;
}

TEST(Sim, SingleRoundProductIsTheRoundMatrix) {
  const ExperimentResult r = run_experiment(reference_config());
  const auto& stream = r.trace.weights;
  for (Round k : {0u, 1u, 7u}) {
    const Eigen::MatrixXd p = round_matrix(stream[k], 5, WhichWeights::kS);
    EXPECT_TRUE(transition_product(stream, k, k, WhichWeights::kS).isApprox(p));
  }
}

TEST(Sim, PhaseAWProductIsIdentity) {
  const ExperimentResult r = run_experiment(reference_config(3));
  const Eigen::MatrixXd phi = transition_product(r.trace.weights, 0, 3, WhichWeights::kW);
  EXPECT_TRUE(phi.isApprox(Eigen::MatrixXd::Identity(5, 5)));
}

TEST(Sim, RoundMatricesAreColumnStochastic) {
  const ExperimentResult r = run_experiment(reference_config(2));
  for (const auto& round : r.trace.weights) {
    for (WhichWeights which : {WhichWeights::kS, WhichWeights::kW}) {
      const Eigen::MatrixXd p = round_matrix(round, 5, which);
      const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(5);
      EXPECT_LT(((ones * p) - ones).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Sim, TransitionProductPropagatesState) {
  const ExperimentResult r = run_experiment(reference_config(2));
  const auto& states = r.trace.states;
  const Eigen::MatrixXd phi_s = transition_product(r.trace.weights, 0, 2, WhichWeights::kS);
  const Eigen::VectorXd predicted = phi_s * state_vector(states[0], true);
  EXPECT_LT((predicted - state_vector(states[3], true)).cwiseAbs().maxCoeff(), 1e-9);

  const Eigen::MatrixXd phi_w = transition_product(r.trace.weights, 0, 10, WhichWeights::kW);
  EXPECT_LT((phi_w * state_vector(states[0], false) - state_vector(states[11], false))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Sim, TransitionProductRangeChecks) {
  const ExperimentResult r = run_experiment(reference_config());
  try {
    transition_product(r.trace.weights, 5, 4, WhichWeights::kS);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRangeUncovered);
  }
  EXPECT_THROW(transition_product(r.trace.weights, 0, r.trace.iterations(), WhichWeights::kS),
               Error);
}

TEST(Sim, ErrorSeriesTwoNodeExample) {
  const DirectedGraph g = testing::from_links(2, {{0, 1}, {1, 0}});
  ExecutionTrace t{g, {0.0, 2.0}, {}, {}, {}};
  t.states.push_back({initial_state(0, 0.0), initial_state(1, 2.0)});
  const MetricsSeries m = error_series(t);
  EXPECT_DOUBLE_EQ(m.alpha, 1.0);
  ASSERT_EQ(m.error.size(), 1u);
  EXPECT_DOUBLE_EQ(m.error[0], std::sqrt(2.0));
}

TEST(Sim, ReferenceRunConvergesAndConservesMass) {
  ExperimentConfig c = reference_config();
  c.max_rounds = 100;
  c.stop_tol = 1e-12;
  const ExperimentResult r = run_experiment(c);
  EXPECT_DOUBLE_EQ(r.metrics.alpha, 20.0);
  EXPECT_LT(r.metrics.error.back(), 1e-9);
  for (const auto& round : r.trace.states) {
    Extended s, w;
    for (const NodeState& st : round) {
      s += st.s;
      w += st.w;
    }
    EXPECT_NEAR((s - Extended(100.0)).to_double(), 0.0, 1e-20);
    EXPECT_NEAR((w - Extended(5.0)).to_double(), 0.0, 1e-20);
  }
}

TEST(Sim, ExperimentIsDeterministic) {
  const ExperimentResult a = run_experiment(reference_config());
  const ExperimentResult b = run_experiment(reference_config());
  ASSERT_EQ(a.metrics.error.size(), b.metrics.error.size());
  for (std::size_t k = 0; k < a.metrics.error.size(); ++k) {
    EXPECT_EQ(a.metrics.error[k], b.metrics.error[k]);
  }
  ExperimentConfig other = reference_config();
  other.seed = 12;
  EXPECT_NE(run_experiment(other).metrics.error[3], a.metrics.error[3]);
}

TEST(Sim, ConfigValidation) {
  ExperimentConfig c = reference_config(5);
  c.max_rounds = 6;
  EXPECT_THROW(run_experiment(c), Error);
  c = reference_config();
  c.weights.epsilon = 0.4;
  try {
    run_experiment(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidEpsilon);
  }
  c = reference_config();
  c.x0.pop_back();
  EXPECT_THROW(run_experiment(c), Error);
  c = reference_config();
  c.graph = testing::from_links(3, {{0, 1}, {1, 2}});
  c.x0 = {1, 2, 3};
  EXPECT_THROW(run_experiment(c), Error);
}

TEST(Sim, ConstantStartIsPerturbedByPhaseA) {
  ExperimentConfig c = reference_config(2);
  c.x0.assign(5, 7.0);
  c.max_rounds = 150;
  const ExperimentResult r = run_experiment(c);
  EXPECT_EQ(r.metrics.error[0], 0.0);
  // Phase A moves s while w stays 1, so the ratios leave the constant and
  // only return once mixing starts.
  EXPECT_GT(r.metrics.error[c.weights.big_k + 1], 1e-3);
  EXPECT_LT(r.metrics.error.back(), 1e-9);
}

TEST(Sim, ThetaGammaFormula) {
  EXPECT_NEAR(theorem_gamma(0.01, 5), std::pow(1.0 - std::pow(0.01, 4), 0.25), 1e-15);
  EXPECT_LT(theorem_gamma(0.2, 3), 1.0);
  EXPECT_NEAR(theorem_gamma(0.5, 2), 0.5, 1e-15);
}

TEST(Sim, FittedContractionOfGeometricSeries) {
  MetricsSeries m;
  m.alpha = 1.0;
  for (int k = 0; k < 40; ++k) m.error.push_back(3.0 * std::pow(0.7, k));
  const auto rate = fitted_contraction(m, 1);
  ASSERT_TRUE(rate.has_value());
  EXPECT_NEAR(*rate, 0.7, 1e-9);
  m.error.assign(3, 1.0);
  EXPECT_FALSE(fitted_contraction(m, 1).has_value());
}

TEST(Sim, ReplayReproducesTrace) {
  const ExperimentResult r = run_experiment(reference_config());
  const ExecutionTrace again = replay(r.trace.graph, r.trace.x0, r.trace.weights);
  ASSERT_EQ(again.states.size(), r.trace.states.size());
  for (std::size_t k = 0; k < again.states.size(); ++k) {
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(again.states[k][i].s, r.trace.states[k][i].s);
      EXPECT_EQ(again.states[k][i].w, r.trace.states[k][i].w);
    }
  }
}

TEST(Sim, EncryptedModeTracksPlaintext) {
  ExperimentConfig c = reference_config();
  c.max_rounds = 80;
  c.crypto.key_bits = 128;
  const ExperimentResult plain = run_experiment(c);
  c.mode = Mode::kAlgorithm2;
  const ExperimentResult enc = run_experiment(c);
  EXPECT_LE(enc.crypto.max_share_error, std::ldexp(1.0, -30));
  EXPECT_GT(enc.crypto.encrypt.count, 0u);
  EXPECT_EQ(enc.crypto.encrypt.count, enc.crypto.decrypt.count);
  // The weight stream does not depend on the transport.
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(enc.trace.weights[k][i].s, plain.trace.weights[k][i].s);
    }
  }
  EXPECT_LT(enc.metrics.error.back(), 1e-6);
  EXPECT_FALSE(enc.eavesdropper.records.empty());
  EXPECT_TRUE(enc.eavesdropper.readable_shares().empty());
}

TEST(Sim, ErrorCsvFormat) {
  MetricsSeries m;
  m.alpha = 1.0;
  m.error = {0.1, 0.01};
  m.pi = {{1.1, 0.9}, {1.01, 0.99}};
  std::ostringstream os;
  write_error_csv(os, m);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "round,e,pi_0,pi_1");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 2), "0,");
}

TEST(Sim, TrialSeedsAndInitialValues) {
  EXPECT_NE(trial_seed(3, 0), trial_seed(3, 1));
  EXPECT_EQ(trial_seed(3, 9), trial_seed(3, 9));
  const auto x = draw_initial_values(200, 0.0, 50.0, 17);
  for (double v : x) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 50.0);
  }
  EXPECT_EQ(x, draw_initial_values(200, 0.0, 50.0, 17));
}

}  // namespace
}  // namespace pushsum
