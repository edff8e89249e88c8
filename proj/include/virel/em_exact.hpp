#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "virel/mdp.hpp"

namespace virel {

/// Row-stochastic per-state action distribution.
struct ExactPolicy {
  QTable table;
  bool deterministic = false;

  static ExactPolicy from_table(QTable table);
  static ExactPolicy uniform(std::size_t n_states, std::size_t n_actions);
  static ExactPolicy greedy(const QTable& q);
  /// Action with the largest probability in each state (lowest index on ties).
  std::vector<std::size_t> mode() const;
};

/// FNV-1a over the per-state mode actions.
std::uint64_t policy_fingerprint(const ExactPolicy& policy);

/// Exact Q^pi from the linear Bellman system. Solved on the state space,
/// then lifted to H with one backup.
QTable policy_evaluation_exact(const DiscreteMdp& mdp, const ExactPolicy& policy);

struct ValueIterationResult {
  QTable q;
  ExactPolicy policy;
  std::size_t sweeps = 0;
};

/// Iterates T* until the sup-norm change drops below tol (1 - gamma) / (2 gamma).
ValueIterationResult value_iteration_oracle(const DiscreteMdp& mdp, double tol = 1e-10);

struct EmIterate {
  std::size_t iteration = 0;
  QTable q;                  // M-step output
  ExactPolicy policy;        // E-step output
  Eigen::VectorXd values;    // V(s) = sum_a pi(a|s) Q(s, a) under the evaluated policy
  std::uint64_t fingerprint = 0;
  bool policy_changed = false;
};

struct EmTrace {
  std::vector<EmIterate> iterates;
  bool converged = false;
};

/// EM with the omega-dependent target: the M-step evaluates the previous
/// policy exactly and the E-step takes the Dirac limit at argmax Q. Stops
/// when the policy no longer changes. Throws ConvergenceError past max_iters.
EmTrace em_policy_iteration(const DiscreteMdp& mdp, std::size_t max_iters = 1000,
                            std::optional<ExactPolicy> initial = std::nullopt);

/// EM with a fixed target. iterates[0] = q0, iterates[1] = T^{pi0} q0, and
/// each later M-step backs up under the greedy E-step policy.
std::vector<QTable> em_q_learning(const DiscreteMdp& mdp, const QTable& q0, std::size_t n_steps,
                                  std::optional<ExactPolicy> pi0 = std::nullopt);

}  // namespace virel
