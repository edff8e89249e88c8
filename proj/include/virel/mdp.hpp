#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <variant>

#include <Eigen/Dense>
#include <json.hpp>

namespace virel {

using Rng = std::mt19937_64;

/// Q-values and rewards over H, one row per state. Row-major so that the
/// flattened index of (s, a) is s * n_actions + a.
using QTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Tabular MDP <S, A, r, p, p0, gamma>. Immutable after construction.
///
/// Transitions are stored as a (|S||A|) x |S| matrix whose row s * |A| + a is
/// p(. | s, a), which lets policy backups be written as matrix products.
class DiscreteMdp {
 public:
  DiscreteMdp(std::size_t n_states, std::size_t n_actions, Eigen::MatrixXd transition,
              QTable reward, Eigen::VectorXd initial_dist, double gamma);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t n_pairs() const noexcept { return n_states_ * n_actions_; }
  double gamma() const noexcept { return gamma_; }

  std::size_t pair_index(std::size_t s, std::size_t a) const;
  double p(std::size_t s, std::size_t a, std::size_t next) const;
  double r(std::size_t s, std::size_t a) const;

  const Eigen::MatrixXd& transition() const noexcept { return transition_; }
  const QTable& reward() const noexcept { return reward_; }
  const Eigen::VectorXd& initial_dist() const noexcept { return initial_; }

  /// Same dynamics under a different discount.
  DiscreteMdp with_gamma(double gamma) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Eigen::MatrixXd transition_;
  QTable reward_;
  Eigen::VectorXd initial_;
  double gamma_;
};

nlohmann::json to_json(const DiscreteMdp& mdp);
DiscreteMdp mdp_from_json(const nlohmann::json& doc);

/// A state-action pair h. Discrete problems use indices, continuous ones vectors.
struct StateAction {
  std::variant<std::size_t, Eigen::VectorXd> state;
  std::variant<std::size_t, Eigen::VectorXd> action;

  static StateAction discrete(std::size_t s, std::size_t a) { return {s, a}; }
  static StateAction continuous(Eigen::VectorXd s, Eigen::VectorXd a) {
    return {std::move(s), std::move(a)};
  }
  bool is_discrete() const {
    return std::holds_alternative<std::size_t>(state) &&
           std::holds_alternative<std::size_t>(action);
  }
};

struct CounterexampleParams {
  std::size_t k1 = 1;
  std::size_t k2 = 5;
  double gamma = 0.99;
  double c = 1.0;
};

/// Named indices into the counterexample MDP.
struct CounterexampleLayout {
  std::size_t k1;
  std::size_t k2;

  static constexpr std::size_t s0 = 0;
  static constexpr std::size_t s1 = 1;
  static constexpr std::size_t s2 = 2;
  static constexpr std::size_t a1 = 0;
  static constexpr std::size_t a2 = 1;

  std::size_t n_states() const { return 6 + k1 + k2; }
  std::size_t n_actions() const { return 2 + k1; }
  /// s_1^i, i in [1, k1]
  std::size_t branch_state(std::size_t i) const { return 4 + i; }
  /// a_1^i, i in [1, k1]
  std::size_t branch_action(std::size_t i) const { return 1 + i; }
  /// s_j for j >= 5
  std::size_t chain_state(std::size_t j) const { return 5 + k1 + (j - 5); }
  std::size_t tail_state() const { return chain_state(5 + k2); }
};

DiscreteMdp build_counterexample(const CounterexampleParams& params);

DiscreteMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                       double gamma);

struct SampledTransition {
  std::size_t next_state;
  double reward;
};

SampledTransition sample_transition(const DiscreteMdp& mdp, std::size_t s, std::size_t a,
                                    Rng& rng);

struct StepResult {
  Eigen::VectorXd next_state;
  double reward;
  bool done;
};

/// Toy continuous-control environments with closed-form optima.
class ContinuousEnv {
 public:
  enum class Kind { kPointMass, kBandit };

  /// 2-D state (position, velocity), 1-D force in [-1, 1],
  /// reward -(position^2 + 0.01 action^2).
  static ContinuousEnv point_mass(std::size_t horizon = 100);
  /// Single state, 1-D action in [-1, 1], reward exp(-8 (a - 0.4)^2).
  static ContinuousEnv continuous_bandit();

  static constexpr double kBanditOptimum = 0.4;
  static constexpr double kPointMassDt = 0.1;
  static constexpr double kPointMassNoise = 0.01;

  Kind kind() const noexcept { return kind_; }
  std::string name() const;
  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t action_dim() const noexcept { return action_low_.size(); }
  std::size_t horizon() const noexcept { return horizon_; }
  const Eigen::VectorXd& action_low() const noexcept { return action_low_; }
  const Eigen::VectorXd& action_high() const noexcept { return action_high_; }

  Eigen::VectorXd clip(const Eigen::VectorXd& action) const;
  Eigen::VectorXd reset(Rng& rng) const;
  double reward(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;
  /// Clips the action, then advances one step.
  StepResult step(const Eigen::VectorXd& state, const Eigen::VectorXd& action, Rng& rng) const;

 private:
  ContinuousEnv(Kind kind, std::size_t state_dim, Eigen::VectorXd low, Eigen::VectorXd high,
                std::size_t horizon);

  Kind kind_;
  std::size_t state_dim_;
  Eigen::VectorXd action_low_;
  Eigen::VectorXd action_high_;
  std::size_t horizon_;
};

ContinuousEnv make_env(const std::string& name, std::size_t horizon = 0);

}  // namespace virel
