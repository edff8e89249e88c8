#include <gtest/gtest.h>

#include "oracles.hpp"
#include "virel/em_exact.hpp"
#include "virel/errors.hpp"
#include "virel/merl.hpp"

using namespace virel;

TEST(EmExact, PolicyEvaluationMatchesHSystem) {
  const DiscreteMdp mdp = random_mdp(6, 3, 1, 0.9);
  const std::vector<std::size_t> pi{0, 1, 2, 0, 1, 2};
  QTable table = QTable::Zero(6, 3);
  for (std::size_t s = 0; s < 6; ++s) table(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(pi[s])) = 1.0;
  const QTable q = policy_evaluation_exact(mdp, ExactPolicy::from_table(table));
  EXPECT_LT((q - oracle::evaluate_deterministic(mdp, pi)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmExact, ValueIterationOracleAgrees) {
  const DiscreteMdp mdp = random_mdp(5, 2, 2, 0.9);
  EXPECT_LT((value_iteration_oracle(mdp).q - oracle::value_iteration(mdp)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(EmExact, PolicyIterationStopsWhenStable) {
  const EmTrace tr = em_policy_iteration(random_mdp(8, 3, 3, 0.9));
  ASSERT_TRUE(tr.converged);
  EXPECT_FALSE(tr.iterates.back().policy_changed);
  EXPECT_EQ(tr.iterates.back().fingerprint, policy_fingerprint(tr.iterates.back().policy));
}

TEST(EmExact, PolicyIterationThrowsWhenBudgetExhausted) {
  const DiscreteMdp mdp = random_mdp(10, 4, 4, 0.99);
  const std::size_t needed = em_policy_iteration(mdp).iterates.size();
  if (needed > 1) EXPECT_THROW(em_policy_iteration(mdp, needed - 1), ConvergenceError);
}

TEST(EmExact, QLearningFirstStepUsesUniform) {
  const DiscreteMdp mdp = random_mdp(4, 3, 5, 0.9);
  std::mt19937_64 rng(5);
  const QTable q0 = oracle::gaussian(4, 3, rng);
  const auto it = em_q_learning(mdp, q0, 3);
  ASSERT_EQ(it.size(), 4u);
  EXPECT_EQ((it[0] - q0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((it[1] - oracle::bellman_policy(mdp, q0, QTable::Constant(4, 3, 1.0 / 3))).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(Merl, ObjectiveMaximisedAtClosedForm) {
  for (auto [k1, g, c] : {std::tuple{1ul, 0.5, 1.0}, std::tuple{20ul, 0.9, 0.3}, std::tuple{100ul, 0.99, 1.0}}) {
    const double p = oracle::p1_closed(static_cast<double>(k1), g, c);
    const double best = j_merl_counterexample(CounterexamplePolicy::uniform_branch(p, k1), c, g);
    for (double dp : {-1e-3, 1e-3}) {
      const double q = std::clamp(p + dp, 1e-9, 1 - 1e-9);
      EXPECT_GE(best, j_merl_counterexample(CounterexamplePolicy::uniform_branch(q, k1), c, g));
    }
  }
}

TEST(Merl, MonteCarloAgreesWithObjective) {
  const CounterexampleParams params{3, 50, 0.9, 1.0};
  const auto pol = CounterexamplePolicy::uniform_branch(0.4, 3);
  Rng rng(7);
  const MonteCarloEstimate mc = merl_monte_carlo(pol, params, 20000, rng);
  EXPECT_NEAR(mc.mean, j_merl_counterexample(pol, 1.0, 0.9), 5 * mc.std_error + 1e-9);
}

TEST(Merl, PolicyValidation) {
  CounterexamplePolicy pol = CounterexamplePolicy::uniform_branch(0.5, 2);
  pol.p1i(0) = 0.9;
  EXPECT_ANY_THROW(pol.validate());
  EXPECT_ANY_THROW(CounterexamplePolicy::uniform_branch(1.5, 2).validate());
}

TEST(Merl, SoftEvaluationSatisfiesSoftBellman) {
  const DiscreteMdp mdp = random_mdp(4, 3, 8, 0.8);
  std::mt19937_64 rng(8);
  const QTable pi = oracle::random_stochastic(4, 3, rng);
  const QTable q = soft_policy_evaluation(mdp, pi, 0.5);
  QTable shifted = q;
  for (Eigen::Index s = 0; s < 4; ++s) {
    for (Eigen::Index a = 0; a < 3; ++a) shifted(s, a) -= 0.5 * std::log(pi(s, a));
  }
  EXPECT_LT((oracle::bellman_policy(mdp, shifted, pi) - q).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Merl, SweepCoversGrid) {
  CounterexampleGrid grid;
  grid.k1 = {1, 100};
  grid.gamma = {0.5, 0.99};
  grid.c = {1.0};
  const auto rows = counterexample_sweep(grid);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.p1_closed, r.p1_numeric, 1e-8);
    EXPECT_EQ(r.hard_optimal_action, CounterexampleLayout::a2);
  }
}
