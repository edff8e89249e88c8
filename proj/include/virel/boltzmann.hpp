#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "virel/approximator.hpp"
#include "virel/mdp.hpp"

namespace virel {

/// Below this temperature the Boltzmann policy is replaced by the greedy one.
inline constexpr double kTemperatureFloor = 1e-8;
/// Two Q-values closer than this are treated as tied.
inline constexpr double kTieTolerance = 1e-12;
inline constexpr std::size_t kDefaultGridPoints = 201;

/// softmax(q / eps) with max-subtraction. Throws for eps <= 0 or empty q.
Eigen::VectorXd boltzmann_probs(const Eigen::VectorXd& q_values, double eps);
Eigen::VectorXd boltzmann_probs(const QApproximator& q, std::size_t s, double eps);

/// Per-state Boltzmann policy over a Q table. For eps below kTemperatureFloor
/// the rows are one-hot on the greedy action (lowest index on ties).
QTable boltzmann_table(const QTable& q, double eps);
QTable greedy_table(const QTable& q);
std::size_t greedy_action(const Eigen::Ref<const Eigen::RowVectorXd>& q_row);

/// Argmax that refuses ties within kTieTolerance (throws TieError).
std::size_t unique_argmax(const Eigen::VectorXd& values, double tol = kTieTolerance);

/// Uniform midpoint grid over an action box.
struct ActionGrid {
  Eigen::VectorXd low;
  Eigen::VectorXd high;
  std::size_t points_per_dim = kDefaultGridPoints;

  std::size_t dim() const { return static_cast<std::size_t>(low.size()); }
  std::size_t size() const;
  /// dim x size() matrix of cell midpoints; the first dimension varies fastest.
  Eigen::MatrixXd points() const;
  double cell_volume() const;
};

/// Cell probabilities of the Boltzmann policy at state s, i.e. the midpoint
/// quadrature of exp(Q/eps) normalised over the grid.
Eigen::VectorXd boltzmann_grid_probs(const QApproximator& q, const Eigen::VectorXd& s, double eps,
                                     const ActionGrid& grid);

struct DiracTrace {
  std::size_t argmax = 0;
  std::vector<double> eps;
  /// Total-variation distance to the one-hot argmax at each temperature.
  std::vector<double> tv_distance;
  /// E_pi[index] at each temperature.
  std::vector<double> expected_index;
};

DiracTrace dirac_limit(const Eigen::VectorXd& q_values, const std::vector<double>& eps_sequence);

/// p(O = 1 | h) = exp((Q(h) - max_a' Q(s, a')) / eps), in [0, 1].
QTable optimality_likelihood(const QTable& q, double eps);
/// Uniform prior over H, Bayes-normalised over H, then conditioned per state.
QTable bayes_action_posterior(const QTable& q, double eps);

struct ElboTerms {
  double elbo = 0.0;         // E_d[E_pi[Q / eps] + H(pi(.|s))]
  double log_norm = 0.0;     // log sum_H exp(Q / eps)
  double kl_joint = 0.0;     // KL(d pi_theta || p_omega) over H
  double entropy_d = 0.0;    // H(d)
  double kl_policy = 0.0;    // E_d[KL(pi_theta(.|s) || pi_omega(.|s))]
};

/// Discrete ELBO and its decomposition. pi_theta rows and d must be
/// normalised within 1e-10.
ElboTerms elbo_discrete(const QTable& q, double eps, const QTable& pi_theta,
                        const Eigen::VectorXd& d);

/// State marginal of the joint Boltzmann distribution p_omega(h).
Eigen::VectorXd boltzmann_state_marginal(const QTable& q, double eps);

struct VariationalFit {
  QTable pi;
  std::size_t iterations = 0;
  std::vector<double> elbo_trace;
};

/// Maximises the ELBO over row-stochastic tables with per-state softmax
/// logits, using exponentiated-gradient (mirror) ascent from uniform.
VariationalFit fit_variational_table(const QTable& q, double eps, const Eigen::VectorXd& d,
                                     double step = 0.5, std::size_t max_iters = 500,
                                     double tol = 1e-15);

namespace testing {
/// Multiplies every normalised Boltzmann probability by `scale`. Only meant
/// for fault-injection tests; 1.0 disables it.
void set_normalizer_fault(double scale);
double normalizer_fault();
}  // namespace testing

}  // namespace virel
