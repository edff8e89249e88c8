#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "virel/mdp.hpp"
#include "virel/mlp.hpp"
#include "virel/params.hpp"

namespace virel {

enum class ApproxKind { kTabular, kLinear, kMlp };

namespace detail {

/// Scalar-valued approximator shared by the Q and V front ends. Tabular and
/// feature-table variants are addressed by an index; affine and MLP variants
/// take input vectors (one per column).
class ScalarApprox {
 public:
  static ScalarApprox table(std::size_t n);
  static ScalarApprox feature_table(Eigen::MatrixXd features);
  static ScalarApprox affine(std::size_t in_dim);
  static ScalarApprox mlp(std::size_t in_dim, std::size_t width, Rng& rng);

  ApproxKind kind() const noexcept { return kind_; }
  bool indexed() const noexcept { return indexed_; }
  std::size_t input_size() const noexcept { return input_size_; }

  double eval_index(std::size_t i) const;
  Eigen::VectorXd grad_index(std::size_t i) const;

  Eigen::VectorXd eval_inputs(const Eigen::MatrixXd& x) const;
  /// Returns sum_i w_i * grad f(x_i); optionally the input gradient w_i * df/dx_i per column.
  Eigen::VectorXd backward_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                                  Eigen::MatrixXd* d_input = nullptr) const;

  const Eigen::MatrixXd& features() const noexcept { return features_; }

  ParamVector params;

 private:
  ApproxKind kind_ = ApproxKind::kTabular;
  bool indexed_ = true;
  std::size_t input_size_ = 0;
  Eigen::MatrixXd features_;
  Mlp mlp_;
};

}  // namespace detail

/// Q-hat_omega(h). Discrete domains use (s, a) indices; continuous domains
/// use (state, action) vectors.
class QApproximator {
 public:
  static QApproximator tabular(std::size_t n_states, std::size_t n_actions);
  /// Linear in a fixed feature matrix with one row per flattened (s, a).
  static QApproximator linear(Eigen::MatrixXd features, std::size_t n_states, std::size_t n_actions);
  /// Affine in the concatenated [state; action] vector.
  static QApproximator linear(std::size_t state_dim, std::size_t action_dim);
  /// MLP on one-hot(s) ++ one-hot(a).
  static QApproximator mlp_discrete(std::size_t n_states, std::size_t n_actions, std::size_t width,
                                    Rng& rng);
  static QApproximator mlp(std::size_t state_dim, std::size_t action_dim, std::size_t width, Rng& rng);

  ApproxKind kind() const noexcept { return core_.kind(); }
  bool discrete() const noexcept { return discrete_; }
  std::size_t n_states() const noexcept { return dim_s_; }
  std::size_t n_actions() const noexcept { return dim_a_; }
  std::size_t state_dim() const noexcept { return dim_s_; }
  std::size_t action_dim() const noexcept { return dim_a_; }

  ParamVector& params() noexcept { return core_.params; }
  const ParamVector& params() const noexcept { return core_.params; }
  void set_params(const ParamVector& p);

  double eval(const StateAction& h) const;
  /// b_omega(h) = grad_omega Q-hat_omega(h).
  ParamVector grad(const StateAction& h) const;

  /// Discrete only: Q-hat over every (s, a).
  QTable table() const;
  /// Discrete only: |H| x n_params matrix whose row h is b_omega(h).
  Eigen::MatrixXd jacobian() const;
  /// Linear-with-features only.
  const Eigen::MatrixXd& features() const { return core_.features(); }

  /// Continuous only: batched evaluation, states and actions one per column.
  Eigen::VectorXd eval_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;

  struct Backward {
    Eigen::VectorXd param_grad;   // sum_i w_i grad_omega Q(s_i, a_i)
    Eigen::MatrixXd action_grad;  // column i: w_i dQ/da (s_i, a_i)
  };
  Backward backward_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                          const Eigen::VectorXd& weights) const;

 private:
  QApproximator(detail::ScalarApprox core, bool discrete, std::size_t dim_s, std::size_t dim_a)
      : core_(std::move(core)), discrete_(discrete), dim_s_(dim_s), dim_a_(dim_a) {}

  Eigen::VectorXd encode(const StateAction& h) const;
  std::size_t flat_index(const StateAction& h) const;

  detail::ScalarApprox core_;
  bool discrete_;
  std::size_t dim_s_;
  std::size_t dim_a_;
};

/// V_phi(s), used as the baseline and its Polyak target.
class ValueApproximator {
 public:
  static ValueApproximator tabular(std::size_t n_states);
  static ValueApproximator linear(std::size_t state_dim);
  static ValueApproximator mlp(std::size_t state_dim, std::size_t width, Rng& rng);

  ApproxKind kind() const noexcept { return core_.kind(); }
  ParamVector& params() noexcept { return core_.params; }
  const ParamVector& params() const noexcept { return core_.params; }
  void set_params(const ParamVector& p);

  double eval(std::size_t s) const;
  double eval(const Eigen::VectorXd& s) const;
  ParamVector grad(std::size_t s) const;
  ParamVector grad(const Eigen::VectorXd& s) const;

  Eigen::VectorXd eval_batch(const Eigen::MatrixXd& states) const;
  Eigen::VectorXd backward_batch(const Eigen::MatrixXd& states, const Eigen::VectorXd& weights) const;

 private:
  explicit ValueApproximator(detail::ScalarApprox core) : core_(std::move(core)) {}
  detail::ScalarApprox core_;
};

/// Diagonal Gaussian pi_theta(a|s) with separate mean and log-std networks.
/// log-std is clamped to [kLogStdMin, kLogStdMax], so variance and entropy
/// stay finite.
class GaussianPolicy {
 public:
  static constexpr double kLogStdMin = -8.0;
  static constexpr double kLogStdMax = 2.0;

  GaussianPolicy(std::size_t state_dim, std::size_t action_dim, std::size_t width, Rng& rng);

  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t action_dim() const noexcept { return action_dim_; }
  ParamVector& params() noexcept { return params_; }
  const ParamVector& params() const noexcept { return params_; }
  void set_params(const ParamVector& p);

  Eigen::VectorXd mean(const Eigen::VectorXd& s) const;
  Eigen::VectorXd log_std(const Eigen::VectorXd& s) const;
  /// a = mu(s) + exp(log_std(s)) * noise
  Eigen::VectorXd sample(const Eigen::VectorXd& s, const Eigen::VectorXd& noise) const;
  double log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  double entropy(const Eigen::VectorXd& s) const;

  /// Reparametrised batch: one state and one noise vector per column.
  struct Batch {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd raw_log_std;
    Eigen::MatrixXd log_std;
    Eigen::MatrixXd noise;
    Eigen::MatrixXd actions;
    Mlp::Tape mean_tape;
    Mlp::Tape log_std_tape;
  };
  Batch forward(const Eigen::MatrixXd& states, const Eigen::MatrixXd& noise) const;
  /// Chain rule back from gradients on the mean and on the clamped log-std.
  Eigen::VectorXd backward(const Batch& batch, const Eigen::MatrixXd& d_mean,
                           const Eigen::MatrixXd& d_log_std) const;

  /// Log-density of the reparametrised sample at its own draw:
  /// -sum(log_std) - |noise|^2 / 2 - d/2 log(2 pi).
  static Eigen::VectorXd reparam_log_prob(const Batch& batch);

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  Mlp mean_net_;
  Mlp log_std_net_;
  ParamVector params_;
};

double gaussian_entropy(const Eigen::VectorXd& log_std);

/// Tabular softmax variational policy over a finite action set.
class SoftmaxTablePolicy {
 public:
  SoftmaxTablePolicy(std::size_t n_states, std::size_t n_actions);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  ParamVector& params() noexcept { return params_; }
  const ParamVector& params() const noexcept { return params_; }

  QTable logits() const;
  QTable probs() const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  ParamVector params_;
};

}  // namespace virel
