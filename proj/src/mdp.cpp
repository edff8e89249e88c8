#include "virel/mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace virel {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& row, const char* what) {
  if ((row.array() < 0.0).any() || !row.allFinite()) {
    throw std::invalid_argument(std::string(what) + " has negative or non-finite entries");
  }
  if (std::abs(row.sum() - 1.0) > kStochasticTol) {
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
  }
}

}  // namespace

DiscreteMdp::DiscreteMdp(std::size_t n_states, std::size_t n_actions, Eigen::MatrixXd transition,
                         QTable reward, Eigen::VectorXd initial_dist, double gamma)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      initial_(std::move(initial_dist)),
      gamma_(gamma) {
  if (n_states_ == 0 || n_actions_ == 0) {
    throw std::invalid_argument("MDP needs at least one state and one action");
  }
  if (static_cast<std::size_t>(transition_.rows()) != n_pairs() ||
      static_cast<std::size_t>(transition_.cols()) != n_states_) {
    throw std::invalid_argument("transition must be (|S||A|) x |S|");
  }
  if (static_cast<std::size_t>(reward_.rows()) != n_states_ ||
      static_cast<std::size_t>(reward_.cols()) != n_actions_) {
    throw std::invalid_argument("reward must be |S| x |A|");
  }
  if (static_cast<std::size_t>(initial_.size()) != n_states_) {
    throw std::invalid_argument("initial distribution must have |S| entries");
  }
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1)");
  }
  if (!reward_.allFinite()) {
    throw std::invalid_argument("rewards must be finite");
  }
  for (Eigen::Index h = 0; h < transition_.rows(); ++h) {
    check_distribution(transition_.row(h).transpose(), "transition row");
  }
  check_distribution(initial_, "initial distribution");
}

std::size_t DiscreteMdp::pair_index(std::size_t s, std::size_t a) const {
  if (s >= n_states_ || a >= n_actions_) {
    throw std::out_of_range("state-action index out of range");
  }
  return s * n_actions_ + a;
}

double DiscreteMdp::p(std::size_t s, std::size_t a, std::size_t next) const {
  if (next >= n_states_) throw std::out_of_range("next state out of range");
  return transition_(static_cast<Eigen::Index>(pair_index(s, a)), static_cast<Eigen::Index>(next));
}

double DiscreteMdp::r(std::size_t s, std::size_t a) const {
  pair_index(s, a);
  return reward_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
}

DiscreteMdp DiscreteMdp::with_gamma(double gamma) const {
  return DiscreteMdp(n_states_, n_actions_, transition_, reward_, initial_, gamma);
}

nlohmann::json to_json(const DiscreteMdp& mdp) {
  nlohmann::json doc;
  doc["n_states"] = mdp.n_states();
  doc["n_actions"] = mdp.n_actions();
  doc["gamma"] = mdp.gamma();
  auto transition = nlohmann::json::array();
  auto reward = nlohmann::json::array();
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    auto per_action = nlohmann::json::array();
    auto reward_row = nlohmann::json::array();
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      auto row = nlohmann::json::array();
      for (std::size_t n = 0; n < mdp.n_states(); ++n) row.push_back(mdp.p(s, a, n));
      per_action.push_back(std::move(row));
      reward_row.push_back(mdp.r(s, a));
    }
    transition.push_back(std::move(per_action));
    reward.push_back(std::move(reward_row));
  }
  doc["transition"] = std::move(transition);
  doc["reward"] = std::move(reward);
  doc["initial_dist"] = std::vector<double>(mdp.initial_dist().data(),
                                            mdp.initial_dist().data() + mdp.n_states());
  return doc;
}

DiscreteMdp mdp_from_json(const nlohmann::json& doc) {
  static const char* kKeys[] = {"n_states", "n_actions", "gamma", "transition", "reward",
                                "initial_dist"};
  for (const char* key : kKeys) {
    if (!doc.contains(key)) throw std::invalid_argument(std::string("MDP JSON lacks '") + key + "'");
  }
  const auto n_states = doc.at("n_states").get<std::size_t>();
  const auto n_actions = doc.at("n_actions").get<std::size_t>();
  const auto& tr = doc.at("transition");
  const auto& rw = doc.at("reward");
  if (tr.size() != n_states || rw.size() != n_states) {
    throw std::invalid_argument("MDP JSON arrays do not match n_states");
  }
  Eigen::MatrixXd transition(n_states * n_actions, n_states);
  QTable reward(n_states, n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    if (tr[s].size() != n_actions || rw[s].size() != n_actions) {
      throw std::invalid_argument("MDP JSON arrays do not match n_actions");
    }
    for (std::size_t a = 0; a < n_actions; ++a) {
      if (tr[s][a].size() != n_states) throw std::invalid_argument("transition row has wrong length");
      for (std::size_t n = 0; n < n_states; ++n) {
        transition(static_cast<Eigen::Index>(s * n_actions + a), static_cast<Eigen::Index>(n)) =
            tr[s][a][n].get<double>();
      }
      reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = rw[s][a].get<double>();
    }
  }
  const auto init = doc.at("initial_dist").get<std::vector<double>>();
  if (init.size() != n_states) throw std::invalid_argument("initial_dist has wrong length");
  Eigen::VectorXd initial = Eigen::Map<const Eigen::VectorXd>(init.data(), n_states);
  return DiscreteMdp(n_states, n_actions, std::move(transition), std::move(reward),
                     std::move(initial), doc.at("gamma").get<double>());
}

DiscreteMdp build_counterexample(const CounterexampleParams& params) {
  if (params.k1 == 0 || params.k2 == 0) {
    throw std::invalid_argument("counterexample needs k1 >= 1 and k2 >= 1");
  }
  const CounterexampleLayout lay{params.k1, params.k2};
  const auto n_s = lay.n_states();
  const auto n_a = lay.n_actions();
  Eigen::MatrixXd transition = Eigen::MatrixXd::Zero(n_s * n_a, n_s);
  QTable reward = QTable::Zero(n_s, n_a);

  auto set_all_actions = [&](std::size_t s, std::size_t next) {
    for (std::size_t a = 0; a < n_a; ++a) transition(s * n_a + a, next) = 1.0;
  };

  // s0: a1 -> s1, a2 -> s2 (the only rewarded pair); branch actions alias a1.
  for (std::size_t a = 0; a < n_a; ++a) {
    transition(lay.s0 * n_a + a, a == lay.a2 ? lay.s2 : lay.s1) = 1.0;
  }
  reward(lay.s0, lay.a2) = 1.0;

  // s1: a1^i -> s1^i; a1 and a2 alias a1^1.
  for (std::size_t a = 0; a < n_a; ++a) {
    const std::size_t i = a >= 2 ? a - 1 : 1;
    transition(lay.s1 * n_a + a, lay.branch_state(i)) = 1.0;
  }

  set_all_actions(lay.s2, 3);
  set_all_actions(3, 4);
  set_all_actions(4, lay.chain_state(5));
  for (std::size_t i = 1; i <= params.k1; ++i) set_all_actions(lay.branch_state(i), lay.chain_state(5));
  for (std::size_t j = 5; j < 5 + params.k2; ++j) set_all_actions(lay.chain_state(j), lay.chain_state(j + 1));
  set_all_actions(lay.tail_state(), lay.tail_state());

  Eigen::VectorXd initial = Eigen::VectorXd::Zero(n_s);
  initial(lay.s0) = 1.0;
  return DiscreteMdp(n_s, n_a, std::move(transition), std::move(reward), std::move(initial),
                     params.gamma);
}

DiscreteMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                       double gamma) {
  if (n_states == 0 || n_actions == 0) {
    throw std::invalid_argument("random_mdp needs n_states, n_actions >= 1");
  }
  Rng rng(seed);
  std::exponential_distribution<double> gamma1(1.0);
  std::uniform_real_distribution<double> reward_dist(0.1, 1.0);

  Eigen::MatrixXd transition(n_states * n_actions, n_states);
  for (Eigen::Index h = 0; h < transition.rows(); ++h) {
    for (Eigen::Index n = 0; n < transition.cols(); ++n) transition(h, n) = gamma1(rng);
    transition.row(h) /= transition.row(h).sum();
  }
  QTable reward(n_states, n_actions);
  for (Eigen::Index s = 0; s < reward.rows(); ++s) {
    for (Eigen::Index a = 0; a < reward.cols(); ++a) reward(s, a) = reward_dist(rng);
  }
  Eigen::VectorXd initial = Eigen::VectorXd::Constant(n_states, 1.0 / static_cast<double>(n_states));
  return DiscreteMdp(n_states, n_actions, std::move(transition), std::move(reward),
                     std::move(initial), gamma);
}

SampledTransition sample_transition(const DiscreteMdp& mdp, std::size_t s, std::size_t a,
                                    Rng& rng) {
  const auto h = static_cast<Eigen::Index>(mdp.pair_index(s, a));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cumulative = 0.0;
  std::size_t next = mdp.n_states() - 1;
  for (std::size_t n = 0; n < mdp.n_states(); ++n) {
    const double pn = mdp.transition()(h, static_cast<Eigen::Index>(n));
    if (pn <= 0.0) continue;
    cumulative += pn;
    next = n;
    if (u < cumulative) break;
  }
  return {next, mdp.r(s, a)};
}

ContinuousEnv::ContinuousEnv(Kind kind, std::size_t state_dim, Eigen::VectorXd low,
                             Eigen::VectorXd high, std::size_t horizon)
    : kind_(kind),
      state_dim_(state_dim),
      action_low_(std::move(low)),
      action_high_(std::move(high)),
      horizon_(horizon) {
  if (horizon_ == 0) throw std::invalid_argument("horizon must be >= 1");
}

ContinuousEnv ContinuousEnv::point_mass(std::size_t horizon) {
  return ContinuousEnv(Kind::kPointMass, 2, Eigen::VectorXd::Constant(1, -1.0),
                       Eigen::VectorXd::Constant(1, 1.0), horizon);
}

ContinuousEnv ContinuousEnv::continuous_bandit() {
  return ContinuousEnv(Kind::kBandit, 1, Eigen::VectorXd::Constant(1, -1.0),
                       Eigen::VectorXd::Constant(1, 1.0), 1);
}

std::string ContinuousEnv::name() const {
  return kind_ == Kind::kBandit ? "bandit" : "point_mass";
}

Eigen::VectorXd ContinuousEnv::clip(const Eigen::VectorXd& action) const {
  if (action.size() != action_low_.size()) throw std::invalid_argument("action dimension mismatch");
  return action.cwiseMax(action_low_).cwiseMin(action_high_);
}

Eigen::VectorXd ContinuousEnv::reset(Rng& rng) const {
  if (kind_ == Kind::kBandit) return Eigen::VectorXd::Zero(1);
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  Eigen::VectorXd s(2);
  s << pos(rng), 0.0;
  return s;
}

double ContinuousEnv::reward(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const {
  const Eigen::VectorXd a = clip(action);
  if (kind_ == Kind::kBandit) {
    const double d = a(0) - kBanditOptimum;
    return std::exp(-8.0 * d * d);
  }
  return -(state(0) * state(0) + 0.01 * a.squaredNorm());
}

StepResult ContinuousEnv::step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                               Rng& rng) const {
  if (static_cast<std::size_t>(state.size()) != state_dim_) {
    throw std::invalid_argument("state dimension mismatch");
  }
  const Eigen::VectorXd a = clip(action);
  const double r = reward(state, a);
  if (kind_ == Kind::kBandit) return {state, r, true};
  std::normal_distribution<double> noise(0.0, kPointMassNoise);
  Eigen::VectorXd next(2);
  next(1) = state(1) + kPointMassDt * a(0) + noise(rng);
  next(0) = state(0) + kPointMassDt * next(1);
  return {next, r, false};
}

ContinuousEnv make_env(const std::string& name, std::size_t horizon) {
  if (name == "bandit") return ContinuousEnv::continuous_bandit();
  if (name == "point_mass") return ContinuousEnv::point_mass(horizon == 0 ? 100 : horizon);
  throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace virel
