#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "virel/actor_critic.hpp"
#include "virel/mdp.hpp"

namespace virel {

/// MERL policy on the counterexample: p1 = pi(a1|s0), p1i = pi(a1^i|s1).
struct CounterexamplePolicy {
  double p1 = 0.5;
  Eigen::VectorXd p1i;

  static CounterexamplePolicy uniform_branch(double p1, std::size_t k1);
  void validate() const;
};

/// (1 - p1)(1 - c log(1 - p1)) - p1 (c log p1 + gamma c sum_i p1i log p1i)
double j_merl_counterexample(const CounterexamplePolicy& pol, double c, double gamma);

struct ClosedFormP1 {
  double p1 = 0.0;
  /// k1^{-gamma} e^{1/c} < 1, the region where p1* > 1/2.
  bool indicator = false;
};

/// p1* = 1 / (k1^{-gamma} e^{1/c} + 1)
ClosedFormP1 optimal_p1_closed(std::size_t k1, double gamma, double c);

/// Golden-section maximiser of j_merl over p1 in (1e-9, 1 - 1e-9) with the
/// branch probabilities uniform. Throws NonUnimodalError when a coarse scan
/// does not bracket a single peak.
double optimal_p1_numeric(std::size_t k1, double gamma, double c, double tol = 1e-12);

/// Monte-Carlo estimate of J_merl by rollouts on build_counterexample, with
/// the entropy bonus counted only at the decision states s0 and s1.
struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t episodes = 0;
};
MonteCarloEstimate merl_monte_carlo(const CounterexamplePolicy& pol,
                                    const CounterexampleParams& params, std::size_t episodes,
                                    Rng& rng);

/// Fixed point of Q = r + gamma E[ sum_a' pi (Q - c log pi) ], iterated until
/// the implied error bound drops below tol.
QTable soft_policy_evaluation(const DiscreteMdp& mdp, const QTable& pi, double c,
                              double tol = 1e-10, std::size_t max_iters = 10000000);

struct CounterexampleRow {
  std::size_t k1 = 0;
  double gamma = 0.0;
  double c = 0.0;
  double p1_closed = 0.0;
  double p1_numeric = 0.0;
  bool indicator = false;
  /// Greedy action at s0 from exact policy iteration on the counterexample MDP.
  std::size_t hard_optimal_action = 0;
};

struct CounterexampleGrid {
  std::vector<std::size_t> k1{1, 2, 5, 20, 100};
  std::vector<double> gamma{0.0, 0.25, 0.5, 0.9, 0.99};
  std::vector<double> c{0.1, 0.3, 1.0, 3.0, 10.0};
  std::size_t k2 = 5;
};

std::vector<CounterexampleRow> counterexample_sweep(const CounterexampleGrid& grid);

/// The actor-critic loop with V trained against E[Q - w log pi], w = config.soft_weight.
TrainResult train_soft_baseline(const ContinuousEnv& env, const TrainConfig& config,
                                std::uint64_t seed);

}  // namespace virel
