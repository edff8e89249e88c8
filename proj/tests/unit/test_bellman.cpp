#include <gtest/gtest.h>

#include "oracles.hpp"
#include "virel/bellman.hpp"
#include "virel/errors.hpp"

using namespace virel;

TEST(Bellman, OptimalBackupBitwiseOracle) {
  const DiscreteMdp mdp = random_mdp(5, 3, 1, 0.9);
  std::mt19937_64 rng(1);
  const QTable q = oracle::gaussian(5, 3, rng);
  EXPECT_EQ((optimal_backup(mdp, q) - oracle::bellman_optimal(mdp, q)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Bellman, PolicyBackupMatchesOracle) {
  const DiscreteMdp mdp = random_mdp(5, 3, 2, 0.9);
  std::mt19937_64 rng(2);
  const QTable q = oracle::gaussian(5, 3, rng);
  const QTable pi = oracle::random_stochastic(5, 3, rng);
  EXPECT_LT((policy_backup(mdp, q, pi) - oracle::bellman_policy(mdp, q, pi)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Bellman, SoftBackupAddsEntropy) {
  const DiscreteMdp mdp = random_mdp(4, 2, 3, 0.9);
  std::mt19937_64 rng(3);
  const QTable q = oracle::gaussian(4, 2, rng);
  const QTable pi = oracle::random_stochastic(4, 2, rng);
  QTable shifted = q;
  for (Eigen::Index s = 0; s < 4; ++s) {
    for (Eigen::Index a = 0; a < 2; ++a) shifted(s, a) -= 0.3 * std::log(pi(s, a));
  }
  EXPECT_LT((soft_backup(mdp, q, pi, 0.3) - oracle::bellman_policy(mdp, shifted, pi)).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(Bellman, ResidualOfFixedPointIsZero) {
  const DiscreteMdp mdp = random_mdp(4, 2, 4, 0.8);
  const QTable q = oracle::value_iteration(mdp);
  EXPECT_LT(residual_error(q, OperatorSpec::optimal(), mdp).epsilon, 1e-20);
}

TEST(Bellman, ResidualUsesCAndP) {
  QTable beta(1, 2);
  beta << 1.0, -3.0;
  EXPECT_DOUBLE_EQ(residual_from_beta(beta, 2.0, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(residual_from_beta(beta, 1.0, 1.0), 2.0);
}

TEST(Bellman, OperatorSpecValidation) {
  EXPECT_ANY_THROW(OperatorSpec::diminishing(-1.0).validate());
  EXPECT_ANY_THROW(OperatorSpec::boltzmann(-0.1).validate());
  EXPECT_NO_THROW(OperatorSpec::soft(1.0).validate());
}

TEST(Bellman, SelfConsistentEpsilonIsFixedPoint) {
  const DiscreteMdp mdp = random_mdp(4, 3, 5, 0.9);
  std::mt19937_64 rng(5);
  const QTable q = oracle::gaussian(4, 3, rng);
  const SelfConsistentResult r = solve_self_consistent_eps(q, mdp);
  const QTable target = oracle::bellman_policy(mdp, q, oracle::boltzmann_rows(q, r.epsilon));
  EXPECT_NEAR(oracle::residual(target, q), r.epsilon, 1e-9);
}

TEST(Bellman, MembershipFlagsSoftAsNonMember) {
  const DiscreteMdp mdp = random_mdp(3, 3, 6, 0.9);
  std::mt19937_64 rng(6);
  const QTable q = oracle::gaussian(3, 3, rng);
  const std::vector<double> temps{1.0, 1e-2, 1e-4, 1e-6};
  EXPECT_TRUE(check_membership(OperatorKind::kBoltzmann, q, mdp, temps).member);
  EXPECT_TRUE(check_membership(OperatorKind::kDiminishingTemp, q, mdp, temps).member);
  EXPECT_FALSE(check_membership(OperatorKind::kSoft, q, mdp, temps).member);
}

TEST(Bellman, TdFixedPointMatchesLstd) {
  const DiscreteMdp mdp = random_mdp(3, 2, 7, 0.9);
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd phi = oracle::gaussian(6, 3, rng);
  const QTable pi = oracle::random_stochastic(3, 2, rng);
  EXPECT_LT((td_fixed_point(phi, mdp, pi) - oracle::lstd(phi, mdp, pi)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Bellman, ProjectedResidualRejectsSingularFeatures) {
  const DiscreteMdp mdp = random_mdp(3, 2, 8, 0.9);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(6, 2);
  phi.col(0).setOnes();
  phi.col(1).setOnes();
  const QApproximator q = QApproximator::linear(phi, 3, 2);
  EXPECT_THROW(projected_residual_linear(q, OperatorSpec::optimal(), mdp), SingularMatrixError);
}

TEST(Bellman, IncrementalLimitShrinks) {
  const DiscreteMdp mdp = random_mdp(4, 2, 9, 0.8);
  std::mt19937_64 rng(9);
  const QTable q = oracle::gaussian(4, 2, rng);
  const IncrementalTrace tr = incremental_limit(q, mdp, {1.0, 0.1, 1e-3, 1e-6});
  EXPECT_NEAR(tr.eps_omega, oracle::residual(oracle::bellman_optimal(mdp, q), q), 1e-14);
  EXPECT_LT(tr.steps.back().gap, 1e-6);
  EXPECT_GT(tr.steps.front().gap, tr.steps.back().gap);
}
