#include "virel/actor_critic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "virel/boltzmann.hpp"
#include "virel/errors.hpp"

namespace virel {

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  data_.resize(capacity);
}

void ReplayBuffer::add(Transition t) {
  data_[next_] = std::move(t);
  next_ = (next_ + 1) % data_.size();
  size_ = std::min(size_ + 1, data_.size());
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index out of range");
  return data_[i];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw std::invalid_argument("cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

namespace {

template <typename Get>
Batch stack(std::size_t n, Get get) {
  if (n == 0) throw std::invalid_argument("empty batch");
  const Transition& first = get(0);
  const auto ds = first.state.size();
  const auto da = first.action.size();
  const auto N = static_cast<Eigen::Index>(n);
  Batch b;
  b.states.resize(ds, N);
  b.actions.resize(da, N);
  b.rewards.resize(N);
  b.next_states.resize(ds, N);
  b.done.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Transition& t = get(static_cast<std::size_t>(i));
    if (t.state.size() != ds || t.action.size() != da || t.next_state.size() != ds) {
      throw std::invalid_argument("inconsistent transition dimensions");
    }
    b.states.col(i) = t.state;
    b.actions.col(i) = t.action;
    b.rewards(i) = t.reward;
    b.next_states.col(i) = t.next_state;
    b.done(i) = t.done ? 1.0 : 0.0;
  }
  return b;
}

void require_finite(double x, const char* what, std::size_t step = 0) {
  if (!std::isfinite(x)) {
    std::ostringstream msg;
    msg << "non-finite " << what << " at step " << step;
    throw TrainingDiverged(msg.str());
  }
}

}  // namespace

Batch make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
  return stack(indices.size(), [&](std::size_t i) -> const Transition& { return buffer.at(indices[i]); });
}

Batch make_batch(const std::vector<Transition>& transitions) {
  return stack(transitions.size(), [&](std::size_t i) -> const Transition& { return transitions[i]; });
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kVirel: return "virel";
    case Variant::kBeta: return "beta";
    case Variant::kSoft: return "soft";
  }
  return "?";
}

Variant variant_from_string(const std::string& name) {
  if (name == "virel") return Variant::kVirel;
  if (name == "beta") return Variant::kBeta;
  if (name == "soft") return Variant::kSoft;
  throw std::invalid_argument("unknown variant: " + name);
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (net_width == 0) throw std::invalid_argument("net_width must be positive");
  if (!(lr_q > 0.0 && lr_v > 0.0 && lr_pi > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(lambda_beta >= 0.0)) throw std::invalid_argument("lambda_beta must be non-negative");
  if (!(reward_scale > 0.0)) throw std::invalid_argument("reward_scale must be positive");
  if (n_eps_samples == 0) throw std::invalid_argument("n_eps_samples must be positive");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (steps_per_eval == 0) throw std::invalid_argument("steps_per_eval must be positive");
  if (max_path_length == 0) throw std::invalid_argument("max_path_length must be positive");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  if (total_steps == 0) throw std::invalid_argument("total_steps must be positive");
  if (eval_episodes == 0) throw std::invalid_argument("eval_episodes must be positive");
  if (buffer_capacity < batch_size) throw std::invalid_argument("buffer_capacity below batch_size");
  if (!(soft_weight >= 0.0)) throw std::invalid_argument("soft_weight must be non-negative");
  if (!(r_avg_rate > 0.0 && r_avg_rate <= 1.0)) throw std::invalid_argument("r_avg_rate must lie in (0, 1]");
}

LossGrad j_v_loss(const ValueApproximator& v, const Batch& batch, const GaussianPolicy& pi,
                  const QApproximator& q, const Eigen::MatrixXd& noise, double entropy_weight) {
  const auto n = static_cast<double>(batch.size());
  const GaussianPolicy::Batch pb = pi.forward(batch.states, noise);
  Eigen::VectorXd target = q.eval_batch(batch.states, pb.actions);
  if (entropy_weight != 0.0) target -= entropy_weight * GaussianPolicy::reparam_log_prob(pb);
  const Eigen::VectorXd diff = v.eval_batch(batch.states) - target;
  LossGrad out;
  out.loss = 0.5 * diff.squaredNorm() / n;
  out.grad = v.params().zeros_like();
  out.grad.values = v.backward_batch(batch.states, diff / n);
  return out;
}

LossGrad j_q_loss(const QApproximator& q, const Batch& batch, const ValueApproximator& v_target,
                  double gamma) {
  const auto n = static_cast<double>(batch.size());
  const Eigen::VectorXd boot = v_target.eval_batch(batch.next_states);
  const Eigen::VectorXd target =
      batch.rewards.array() + gamma * (1.0 - batch.done.array()) * boot.array();
  const Eigen::VectorXd diff = q.eval_batch(batch.states, batch.actions) - target;
  LossGrad out;
  out.loss = 0.5 * diff.squaredNorm() / n;
  out.grad = q.params().zeros_like();
  out.grad.values = q.backward_batch(batch.states, batch.actions, diff / n).param_grad;
  return out;
}

LossGrad j_pi_loss(const GaussianPolicy& pi, const Batch& batch, const QApproximator& q,
                   const ValueApproximator& v_target, const Eigen::MatrixXd& noise, double weight) {
  const auto N = static_cast<Eigen::Index>(batch.size());
  const double n = static_cast<double>(N);
  const GaussianPolicy::Batch pb = pi.forward(batch.states, noise);
  const Eigen::VectorXd qv = q.eval_batch(batch.states, pb.actions);
  const Eigen::VectorXd vb = v_target.eval_batch(batch.states);
  const Eigen::VectorXd logp = GaussianPolicy::reparam_log_prob(pb);

  LossGrad out;
  out.loss = (weight * logp - (qv - vb)).sum() / n;

  // d/da of -Q(s, a)/n
  const QApproximator::Backward qb =
      q.backward_batch(batch.states, pb.actions, Eigen::VectorXd::Constant(N, -1.0 / n));
  const Eigen::MatrixXd& d_action = qb.action_grad;
  // a = mu + exp(log_std) * noise; log pi at its own draw depends on log_std only.
  const Eigen::MatrixXd d_log_std =
      (d_action.array() * pb.log_std.array().exp() * pb.noise.array()).matrix() -
      Eigen::MatrixXd::Constant(pb.log_std.rows(), N, weight / n);
  out.grad = pi.params().zeros_like();
  out.grad.values = pi.backward(pb, d_action, d_log_std);
  return out;
}

LossGrad j_pi_virel_loss(const GaussianPolicy& pi, const Batch& batch, const QApproximator& q,
                         const ValueApproximator& v_target, const Eigen::MatrixXd& noise,
                         double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  return j_pi_loss(pi, batch, q, v_target, noise, alpha);
}

LossGrad j_pi_beta_loss(const GaussianPolicy& pi, const Batch& batch, const QApproximator& q,
                        const ValueApproximator& v_target, const Eigen::MatrixXd& noise,
                        double eps_hat, double lambda) {
  if (!(eps_hat >= 0.0)) throw std::invalid_argument("eps_hat must be non-negative");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  return j_pi_loss(pi, batch, q, v_target, noise, lambda * eps_hat);
}

double EpsilonEstimate::lambda(double gamma) const {
  return (1.0 - gamma) / std::max(r_avg, 1e-3);
}

EpsilonEstimate estimate_epsilon(const ReplayBuffer& buffer, std::size_t n_eps,
                                 const QApproximator& q, const ValueApproximator& v_target,
                                 double gamma, Rng& rng, const EpsilonEstimate& previous,
                                 double r_avg_rate) {
  if (n_eps == 0) throw std::invalid_argument("n_eps must be positive");
  if (buffer.size() < n_eps) {
    throw std::invalid_argument("replay buffer holds fewer transitions than n_eps");
  }
  std::vector<std::size_t> idx;
  if (n_eps == buffer.size()) {
    idx.resize(n_eps);
    for (std::size_t i = 0; i < n_eps; ++i) idx[i] = i;
  } else {
    idx = buffer.sample_indices(n_eps, rng);
  }
  const Batch b = make_batch(buffer, idx);
  const Eigen::VectorXd boot = v_target.eval_batch(b.next_states);
  const Eigen::VectorXd target = b.rewards.array() + gamma * (1.0 - b.done.array()) * boot.array();
  const Eigen::VectorXd diff = target - q.eval_batch(b.states, b.actions);

  EpsilonEstimate est;
  est.value = diff.squaredNorm() / static_cast<double>(n_eps);
  est.samples = n_eps;
  const double mean_abs_r = b.rewards.cwiseAbs().mean();
  if (previous.initialised) {
    est.r_avg = (1.0 - r_avg_rate) * previous.r_avg + r_avg_rate * mean_abs_r;
  } else {
    est.r_avg = std::abs(buffer.at(0).reward);
  }
  est.initialised = true;
  return est;
}

ParamVector e_step_gradient(const SoftmaxTablePolicy& pi, const QTable& q, double eps,
                            const Eigen::VectorXd& d) {
  const auto S = static_cast<Eigen::Index>(pi.n_states());
  const auto A = static_cast<Eigen::Index>(pi.n_actions());
  if (q.rows() != S || q.cols() != A) throw std::invalid_argument("Q table shape mismatch");
  if (d.size() != S) throw std::invalid_argument("state distribution size mismatch");
  if (!std::isfinite(eps) || eps < 0.0) throw std::invalid_argument("eps must be non-negative");
  const double w = eps <= kTemperatureFloor ? 0.0 : eps;

  const QTable p = pi.probs();
  const QTable z = pi.logits();
  ParamVector grad = pi.params().zeros_like();
  for (Eigen::Index s = 0; s < S; ++s) {
    const double zmax = z.row(s).maxCoeff();
    const double lse = zmax + std::log((z.row(s).array() - zmax).exp().sum());
    const Eigen::RowVectorXd logp = z.row(s).array() - lse;
    const double mean_q = p.row(s).dot(q.row(s));
    const double mean_logp = p.row(s).dot(logp);
    for (Eigen::Index a = 0; a < A; ++a) {
      const double g = p(s, a) * ((q(s, a) - mean_q) - w * (logp(a) - mean_logp));
      grad.values(s * A + a) = d(s) * g;
    }
  }
  return grad;
}

ParamVector m_step_gradient(const QApproximator& q, const QTable& pi, const Eigen::VectorXd& d,
                            double eps, const ParamVector& grad_eps) {
  if (!q.discrete()) throw std::invalid_argument("m_step_gradient needs a discrete approximator");
  const auto S = static_cast<Eigen::Index>(q.n_states());
  const auto A = static_cast<Eigen::Index>(q.n_actions());
  if (pi.rows() != S || pi.cols() != A) throw std::invalid_argument("policy shape mismatch");
  if (d.size() != S) throw std::invalid_argument("state distribution size mismatch");
  require_same_layout(q.params(), grad_eps);

  Eigen::VectorXd w(S * A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) w(s * A + a) = d(s) * pi(s, a);
  }
  const QTable qt = q.table();
  const Eigen::VectorXd qflat = Eigen::Map<const Eigen::VectorXd>(qt.data(), S * A);
  ParamVector out = q.params().zeros_like();
  out.values = eps * (q.jacobian().transpose() * w) - w.dot(qflat) * grad_eps.values;
  return out;
}

ParamVector polyak_update(const ParamVector& target, const ParamVector& source, double tau) {
  require_same_layout(target, source);
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  ParamVector out = target;
  out.values = tau * source.values + (1.0 - tau) * target.values;
  return out;
}

double evaluate_policy(const ContinuousEnv& env, const GaussianPolicy& pi, std::size_t episodes,
                       std::size_t max_path_length, std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("episodes must be positive");
  Rng rng(seed);
  const std::size_t len = std::min(max_path_length, env.horizon());
  double total = 0.0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    Eigen::VectorXd s = env.reset(rng);
    for (std::size_t t = 0; t < len; ++t) {
      const StepResult r = env.step(s, pi.mean(s), rng);
      total += r.reward;
      s = r.next_state;
      if (r.done) break;
    }
  }
  return total / static_cast<double>(episodes);
}

double random_policy_return(const ContinuousEnv& env, std::size_t episodes,
                            std::size_t max_path_length, std::uint64_t seed) {
  if (episodes == 0) throw std::invalid_argument("episodes must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t len = std::min(max_path_length, env.horizon());
  double total = 0.0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    Eigen::VectorXd s = env.reset(rng);
    for (std::size_t t = 0; t < len; ++t) {
      Eigen::VectorXd a(env.action_dim());
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a(i) = env.action_low()(i) + unif(rng) * (env.action_high()(i) - env.action_low()(i));
      }
      const StepResult r = env.step(s, a, rng);
      total += r.reward;
      s = r.next_state;
      if (r.done) break;
    }
  }
  return total / static_cast<double>(episodes);
}

TrainResult train(const ContinuousEnv& env, const TrainConfig& cfg, Variant variant,
                  std::uint64_t seed) {
  cfg.validate();
  std::seed_seq seq{seed, std::uint64_t{0x5eed}};
  std::vector<std::uint64_t> streams(5);
  seq.generate(streams.begin(), streams.end());
  Rng init_rng(streams[0]);
  Rng env_rng(streams[1]);
  Rng noise_rng(streams[2]);
  Rng sample_rng(streams[3]);
  const std::uint64_t eval_seed = streams[4];

  const std::size_t ds = env.state_dim();
  const std::size_t da = env.action_dim();
  ValueApproximator v = ValueApproximator::mlp(ds, cfg.net_width, init_rng);
  ValueApproximator v_target = v;
  QApproximator q = QApproximator::mlp(ds, da, cfg.net_width, init_rng);
  GaussianPolicy pi(ds, da, cfg.net_width, init_rng);
  AdamOptimizer opt_v(cfg.lr_v), opt_q(cfg.lr_q), opt_pi(cfg.lr_pi);

  ReplayBuffer buffer(std::min(cfg.buffer_capacity, std::max(cfg.total_steps, cfg.batch_size)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_noise = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(noise_rng);
    }
    return m;
  };

  const double w_virel = variant == Variant::kSoft ? cfg.soft_weight : cfg.alpha;
  const double v_entropy = variant == Variant::kSoft ? cfg.soft_weight : 0.0;
  const std::size_t path_len = std::min(cfg.max_path_length, env.horizon());

  TrainResult result;
  EpsilonEstimate eps;
  TrainRow last;
  Eigen::VectorXd s = env.reset(env_rng);
  std::size_t t_ep = 0;

  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    Eigen::VectorXd a(da);
    if (step <= cfg.warmup_steps) {
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a(i) = env.action_low()(i) + unif(noise_rng) * (env.action_high()(i) - env.action_low()(i));
      }
    } else {
      a = pi.sample(s, draw_noise(static_cast<Eigen::Index>(da), 1).col(0));
    }
    const StepResult sr = env.step(s, a, env_rng);
    buffer.add({s, a, sr.reward * cfg.reward_scale, sr.next_state, sr.done});
    s = sr.next_state;
    ++t_ep;
    if (sr.done || t_ep >= path_len) {
      s = env.reset(env_rng);
      t_ep = 0;
    }

    if (buffer.size() >= cfg.batch_size) {
      double weight = w_virel;
      if (variant == Variant::kBeta) {
        eps = estimate_epsilon(buffer, std::min(cfg.n_eps_samples, buffer.size()), q, v_target,
                               cfg.gamma, sample_rng, eps, cfg.r_avg_rate);
        require_finite(eps.value, "epsilon estimate", step);
        const double lambda = cfg.adaptive_lambda ? eps.lambda(cfg.gamma) : cfg.lambda_beta;
        weight = lambda * eps.value;
        result.peak_eps = std::max(result.peak_eps, eps.value);
      }
      const Batch batch = make_batch(buffer, buffer.sample_indices(cfg.batch_size, sample_rng));
      const auto n = static_cast<Eigen::Index>(cfg.batch_size);

      // M-step: V then Q.
      const LossGrad lv = j_v_loss(v, batch, pi, q, draw_noise(static_cast<Eigen::Index>(da), n), v_entropy);
      require_finite(lv.loss, "value loss", step);
      opt_v.step(v.params(), lv.grad);
      const LossGrad lq = j_q_loss(q, batch, v_target, cfg.gamma);
      require_finite(lq.loss, "Q loss", step);
      opt_q.step(q.params(), lq.grad);
      // E-step.
      const Eigen::MatrixXd pi_noise = draw_noise(static_cast<Eigen::Index>(da), n);
      const LossGrad lp = j_pi_loss(pi, batch, q, v_target, pi_noise, weight);
      require_finite(lp.loss, "policy loss", step);
      if (step > cfg.warmup_steps) opt_pi.step(pi.params(), lp.grad);
      v_target.params() = polyak_update(v_target.params(), v.params(), cfg.tau);

      last.eps_hat = eps.value;
      last.loss_v = lv.loss;
      last.loss_q = lq.loss;
      last.loss_pi = lp.loss;
      const GaussianPolicy::Batch pb = pi.forward(batch.states, pi_noise);
      double ent = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) ent += gaussian_entropy(pb.log_std.col(j));
      last.entropy = ent / static_cast<double>(n);
    }

    if (step % cfg.steps_per_eval == 0 || step == cfg.total_steps) {
      last.step = step;
      last.mean_return = evaluate_policy(env, pi, cfg.eval_episodes, cfg.max_path_length, eval_seed);
      require_finite(last.mean_return, "evaluation return", step);
      result.rows.push_back(last);
    }
  }

  result.policy_params = pi.params();
  result.q_params = q.params();
  result.v_params = v.params();
  result.final_return = result.rows.back().mean_return;
  return result;
}

}  // namespace virel
