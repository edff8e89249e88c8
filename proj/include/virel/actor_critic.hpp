#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "virel/approximator.hpp"
#include "virel/mdp.hpp"
#include "virel/params.hpp"

namespace virel {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;  // already multiplied by the reward scale
  Eigen::VectorXd next_state;
  bool done = false;
};

/// Fixed-capacity ring buffer with uniform sampling over filled slots.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const noexcept { return size_; }
  std::size_t capacity() const noexcept { return data_.size(); }
  const Transition& at(std::size_t i) const;
  /// n indices drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::vector<Transition> data_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
};

/// Column-stacked transitions.
struct Batch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::VectorXd rewards;
  Eigen::MatrixXd next_states;
  Eigen::VectorXd done;  // 1.0 where the episode terminated

  std::size_t size() const { return static_cast<std::size_t>(rewards.size()); }
};

Batch make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices);
Batch make_batch(const std::vector<Transition>& transitions);

enum class Variant { kVirel, kBeta, kSoft };
const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct TrainConfig {
  double gamma = 0.99;
  std::size_t batch_size = 128;
  std::size_t net_width = 300;
  double lr_q = 3e-4;
  double lr_v = 3e-4;
  double lr_pi = 3e-4;
  double tau = 0.005;
  /// Used when adaptive_lambda is false.
  double lambda_beta = 4e-3;
  bool adaptive_lambda = true;
  double reward_scale = 1.0;
  std::size_t n_eps_samples = 1024;
  double alpha = 0.2;
  std::size_t steps_per_eval = 1000;
  std::size_t max_path_length = 999;
  double c = 1.0;
  std::size_t total_steps = 20000;
  /// Uniform random actions and critic-only updates for this many steps.
  std::size_t warmup_steps = 0;
  std::size_t eval_episodes = 10;
  std::size_t buffer_capacity = 1000000;
  /// Entropy weight of the soft baseline.
  double soft_weight = 1.0;
  /// Exponential-moving-average rate for r_avg.
  double r_avg_rate = 1e-3;

  void validate() const;
};

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// J^V = mean 1/2 (V(s) - [Q(s, a) - w log pi(a|s)])^2, a reparametrised with
/// the given noise. entropy_weight is 0 for virel and beta.
LossGrad j_v_loss(const ValueApproximator& v, const Batch& batch, const GaussianPolicy& pi,
                  const QApproximator& q, const Eigen::MatrixXd& noise,
                  double entropy_weight = 0.0);

/// J^Q = mean 1/2 (r + gamma (1 - done) V_target(s') - Q(h))^2, target frozen.
LossGrad j_q_loss(const QApproximator& q, const Batch& batch, const ValueApproximator& v_target,
                  double gamma);

/// Reparametrised policy surrogate
///   mean[ w log pi(a_theta|s) - (Q(s, a_theta) - V_target(s)) ],
/// with Q and V_target frozen.
LossGrad j_pi_loss(const GaussianPolicy& pi, const Batch& batch, const QApproximator& q,
                   const ValueApproximator& v_target, const Eigen::MatrixXd& noise, double weight);
LossGrad j_pi_virel_loss(const GaussianPolicy& pi, const Batch& batch, const QApproximator& q,
                         const ValueApproximator& v_target, const Eigen::MatrixXd& noise,
                         double alpha);
LossGrad j_pi_beta_loss(const GaussianPolicy& pi, const Batch& batch, const QApproximator& q,
                        const ValueApproximator& v_target, const Eigen::MatrixXd& noise,
                        double eps_hat, double lambda);

struct EpsilonEstimate {
  double value = 0.0;
  std::size_t samples = 0;
  double r_avg = 0.0;
  bool initialised = false;

  /// (1 - gamma) / r_avg with r_avg floored at 1e-3.
  double lambda(double gamma) const;
};

/// Mean squared TD residual over n_eps transitions drawn uniformly, and an
/// EMA refresh of r_avg from their mean |reward|. When n_eps equals the
/// buffer size every transition is used once, in order.
EpsilonEstimate estimate_epsilon(const ReplayBuffer& buffer, std::size_t n_eps,
                                 const QApproximator& q, const ValueApproximator& v_target,
                                 double gamma, Rng& rng, const EpsilonEstimate& previous = {},
                                 double r_avg_rate = 1e-3);

/// Tabular E-step: the gradient of eps * L(omega, theta) in the softmax
/// logits, E_d[ E_pi[Q grad log pi] + eps grad H(pi) ]. At or below the
/// temperature floor the entropy term is dropped (plain policy gradient).
ParamVector e_step_gradient(const SoftmaxTablePolicy& pi, const QTable& q, double eps,
                            const Eigen::VectorXd& d);

/// Tabular M-step: eps E_{d pi}[grad Q] - E_{d pi}[Q] grad eps.
ParamVector m_step_gradient(const QApproximator& q, const QTable& pi, const Eigen::VectorXd& d,
                            double eps, const ParamVector& grad_eps);

/// tau * phi + (1 - tau) * phi_bar
ParamVector polyak_update(const ParamVector& target, const ParamVector& source, double tau);

struct TrainRow {
  std::size_t step = 0;
  double mean_return = 0.0;
  double eps_hat = 0.0;
  double entropy = 0.0;
  double loss_v = 0.0;
  double loss_q = 0.0;
  double loss_pi = 0.0;
};

struct TrainResult {
  std::vector<TrainRow> rows;
  ParamVector policy_params;
  ParamVector q_params;
  ParamVector v_params;
  double final_return = 0.0;
  double peak_eps = 0.0;
};

/// Algorithms 1 and 2 (and the soft comparator) on a toy environment.
/// Deterministic given the seed. Throws TrainingDiverged on a non-finite loss.
TrainResult train(const ContinuousEnv& env, const TrainConfig& config, Variant variant,
                  std::uint64_t seed);

/// Mean undiscounted return of the deterministic (mean-action) policy.
double evaluate_policy(const ContinuousEnv& env, const GaussianPolicy& pi, std::size_t episodes,
                       std::size_t max_path_length, std::uint64_t seed);

/// Mean undiscounted return with actions uniform over the action box.
double random_policy_return(const ContinuousEnv& env, std::size_t episodes,
                            std::size_t max_path_length, std::uint64_t seed);

}  // namespace virel
