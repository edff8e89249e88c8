#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "virel/approximator.hpp"
#include "virel/mdp.hpp"
#include "virel/params.hpp"

namespace virel {

enum class OperatorKind {
  kOnPolicy,         // T^pi for an explicit policy table
  kBoltzmann,        // T^{pi_omega}, pi_omega Boltzmann in Q-hat
  kOptimal,          // T*
  kDiminishingTemp,  // T_{omega,k} at temperature eps_k
  kSoft,             // soft backup with entropy weight
};

const char* to_string(OperatorKind kind);

struct OperatorSpec {
  OperatorKind kind = OperatorKind::kOptimal;
  /// kOnPolicy: the policy. kSoft: the policy, or empty for softmax(Q / entropy_weight).
  QTable policy;
  /// kBoltzmann: fixed temperature; empty means solve the self-consistent one.
  std::optional<double> temperature;
  /// kDiminishingTemp only.
  double eps_k = 1.0;
  /// kSoft only.
  double entropy_weight = 1.0;
  double p = 2.0;
  double c = 1.0;

  static OperatorSpec optimal();
  static OperatorSpec on_policy(QTable pi);
  static OperatorSpec boltzmann(std::optional<double> temperature = std::nullopt);
  static OperatorSpec diminishing(double eps_k);
  static OperatorSpec soft(double entropy_weight, QTable pi = {});

  void validate() const;
};

/// r + gamma * E_{s'}[ sum_a' pi(a'|s') q(s', a') ]
QTable policy_backup(const DiscreteMdp& mdp, const QTable& q, const QTable& pi);
/// r + gamma * E_{s'}[ max_a' q(s', a') ]. Explicit loops in a fixed order.
QTable optimal_backup(const DiscreteMdp& mdp, const QTable& q);
/// r + gamma * E_{s'}[ sum_a' pi (q - w log pi) ]
QTable soft_backup(const DiscreteMdp& mdp, const QTable& q, const QTable& pi, double weight);

/// Policy used by the operator at the next state, given Q-hat.
QTable operator_policy(const OperatorSpec& op, const QTable& q, const DiscreteMdp& mdp);

QTable apply_operator(const OperatorSpec& op, const QTable& q, const DiscreteMdp& mdp);
QTable apply_operator(const OperatorSpec& op, const QApproximator& q, const DiscreteMdp& mdp);

struct ResidualReport {
  double epsilon = 0.0;
  QTable beta;  // T Q - Q per (s, a)
};

/// (c/p) * mean_H |beta|^p
double residual_from_beta(const QTable& beta, double c, double p);
ResidualReport residual_error(const QTable& q, const OperatorSpec& op, const DiscreteMdp& mdp);
ResidualReport residual_error(const QApproximator& q, const OperatorSpec& op,
                              const DiscreteMdp& mdp);
nlohmann::json to_json(const ResidualReport& report);

struct SelfConsistentResult {
  double epsilon = 0.0;
  std::size_t iterations = 0;
  bool damped = false;
  bool greedy = false;  // epsilon fell below the temperature floor
  std::vector<double> trace;
};

/// Fixed point of eps = residual_error(q, T^{Boltzmann(q, eps)}). Throws
/// ConvergenceError after max_iters.
SelfConsistentResult solve_self_consistent_eps(const QTable& q, const DiscreteMdp& mdp,
                                               double c = 1.0, double p = 2.0,
                                               double tol = 1e-10, std::size_t max_iters = 10000);

/// Stopgrad gradient of the residual error: -c * mean(|beta|^{p-1} sign(beta) grad Q)
/// with the target frozen.
ParamVector residual_grad_direct(const QApproximator& q, const OperatorSpec& op,
                                 const DiscreteMdp& mdp);
/// Batch form: mean_i (Q(h_i) - target_i) grad Q(h_i).
ParamVector residual_grad_direct(const QApproximator& q, const std::vector<StateAction>& batch,
                                 const Eigen::VectorXd& targets);

/// eps_{omega,k} = (c/p) mean |T_{omega,k} Q - Q|^p + eps_k
double incremental_residual(const QApproximator& q, double eps_k, const DiscreteMdp& mdp,
                            double c = 1.0, double p = 2.0);
/// Exact gradient of eps_{omega,k}, differentiating through p_{omega,k}.
ParamVector residual_grad_twk(const QApproximator& q, double eps_k, const DiscreteMdp& mdp,
                              double c = 1.0, double p = 2.0);

/// Linear approximators with a feature table. Expectations are uniform over H.
struct ProjectedMoments {
  Eigen::MatrixXd second_moment;  // E[b b^T]
  Eigen::VectorXd beta_b;         // E[beta b]
  double condition_number = 0.0;
};
ProjectedMoments projected_moments(const QApproximator& q, const OperatorSpec& op,
                                   const DiscreteMdp& mdp);
/// (c/2) E[beta b]^T E[b b^T]^{-1} E[beta b]. Throws SingularMatrixError when
/// E[b b^T] has condition number above max_condition.
double projected_residual_linear(const QApproximator& q, const OperatorSpec& op,
                                 const DiscreteMdp& mdp, double max_condition = 1e12);

struct GtdState {
  Eigen::VectorXd zeta;
  Eigen::VectorXd omega;
};

/// One two-timescale update from a single sample: feature b, expected next
/// feature b_next under the target policy, and residual beta.
GtdState gtd_update(const GtdState& state, const Eigen::VectorXd& b, const Eigen::VectorXd& b_next,
                    double beta, double gamma, double alpha_zeta, double alpha_omega);

/// Expected update over uniform H for T^pi on a linear approximator.
GtdState gtd_sweep(const GtdState& state, const Eigen::MatrixXd& features, const DiscreteMdp& mdp,
                   const QTable& pi, double alpha_zeta, double alpha_omega);

struct GtdResult {
  GtdState state;
  std::size_t iterations = 0;
  double last_change = 0.0;
};
GtdResult gtd_solve(const Eigen::MatrixXd& features, const DiscreteMdp& mdp, const QTable& pi,
                    double alpha_zeta, double alpha_omega, double tol = 1e-13,
                    std::size_t max_iters = 2000000);

/// Least-squares TD fixed point: E[b (b - gamma b_next)^T] w = E[b r].
Eigen::VectorXd td_fixed_point(const Eigen::MatrixXd& features, const DiscreteMdp& mdp,
                               const QTable& pi);

struct IncrementalStep {
  double eps_k = 0.0;
  double eps_wk = 0.0;
  double gap = 0.0;  // |eps_wk - eps_k - eps_omega|
};
struct IncrementalTrace {
  double eps_omega = 0.0;  // under T*
  std::vector<IncrementalStep> steps;
};
IncrementalTrace incremental_limit(const QTable& q, const DiscreteMdp& mdp,
                                   const std::vector<double>& schedule, double c = 1.0,
                                   double p = 2.0);

struct MembershipCheck {
  OperatorKind kind;
  std::vector<double> temperatures;
  std::vector<double> max_gap;  // sup-norm distance to the T* backup
  bool member = false;
};
/// Drives the operator's temperature through the schedule and compares its
/// backup with T*. The soft operator keeps its entropy weight, so the last
/// gap stays bounded away from zero.
MembershipCheck check_membership(OperatorKind kind, const QTable& q, const DiscreteMdp& mdp,
                                 const std::vector<double>& temperatures, double tol = 1e-6);

}  // namespace virel
