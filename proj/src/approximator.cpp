#include "virel/approximator.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace virel {

namespace detail {

ScalarApprox ScalarApprox::table(std::size_t n) {
  if (n == 0) throw std::invalid_argument("table must have at least one entry");
  ScalarApprox f;
  f.kind_ = ApproxKind::kTabular;
  f.indexed_ = true;
  f.input_size_ = n;
  ParamLayout layout;
  layout.add("table", n);
  f.params = ParamVector(layout);
  return f;
}

ScalarApprox ScalarApprox::feature_table(Eigen::MatrixXd features) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw std::invalid_argument("feature matrix must be non-empty");
  }
  ScalarApprox f;
  f.kind_ = ApproxKind::kLinear;
  f.indexed_ = true;
  f.input_size_ = static_cast<std::size_t>(features.rows());
  ParamLayout layout;
  layout.add("weights", static_cast<std::size_t>(features.cols()));
  f.params = ParamVector(layout);
  f.features_ = std::move(features);
  return f;
}

ScalarApprox ScalarApprox::affine(std::size_t in_dim) {
  if (in_dim == 0) throw std::invalid_argument("affine input dimension must be positive");
  ScalarApprox f;
  f.kind_ = ApproxKind::kLinear;
  f.indexed_ = false;
  f.input_size_ = in_dim;
  ParamLayout layout;
  layout.add("weights", in_dim);
  layout.add("bias", 1);
  f.params = ParamVector(layout);
  return f;
}

ScalarApprox ScalarApprox::mlp(std::size_t in_dim, std::size_t width, Rng& rng) {
  ScalarApprox f;
  f.kind_ = ApproxKind::kMlp;
  f.indexed_ = false;
  f.input_size_ = in_dim;
  f.mlp_ = Mlp(in_dim, width, 1);
  ParamLayout layout;
  f.mlp_.append_layout(layout, "mlp");
  f.params = ParamVector(layout);
  f.mlp_.init(f.params.values, rng);
  return f;
}

double ScalarApprox::eval_index(std::size_t i) const {
  if (!indexed_) throw std::logic_error("approximator takes vector inputs");
  if (i >= input_size_) throw std::out_of_range("approximator index out of range");
  const auto row = static_cast<Eigen::Index>(i);
  if (kind_ == ApproxKind::kTabular) return params.values(row);
  return features_.row(row).dot(params.values);
}

Eigen::VectorXd ScalarApprox::grad_index(std::size_t i) const {
  if (!indexed_) throw std::logic_error("approximator takes vector inputs");
  if (i >= input_size_) throw std::out_of_range("approximator index out of range");
  const auto row = static_cast<Eigen::Index>(i);
  if (kind_ == ApproxKind::kTabular) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(params.values.size());
    g(row) = 1.0;
    return g;
  }
  return features_.row(row).transpose();
}

Eigen::VectorXd ScalarApprox::eval_inputs(const Eigen::MatrixXd& x) const {
  if (indexed_) throw std::logic_error("approximator takes index inputs");
  if (static_cast<std::size_t>(x.rows()) != input_size_) {
    throw std::invalid_argument("approximator input dimension mismatch");
  }
  if (kind_ == ApproxKind::kLinear) {
    const auto n = static_cast<Eigen::Index>(input_size_);
    Eigen::VectorXd y = x.transpose() * params.values.head(n);
    y.array() += params.values(n);
    return y;
  }
  return mlp_.forward(params.values, x).row(0).transpose();
}

Eigen::VectorXd ScalarApprox::backward_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                                              Eigen::MatrixXd* d_input) const {
  if (indexed_) throw std::logic_error("approximator takes index inputs");
  if (w.size() != x.cols()) throw std::invalid_argument("one weight per input column required");
  if (static_cast<std::size_t>(x.rows()) != input_size_) {
    throw std::invalid_argument("approximator input dimension mismatch");
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.values.size());
  if (kind_ == ApproxKind::kLinear) {
    const auto n = static_cast<Eigen::Index>(input_size_);
    grad.head(n) = x * w;
    grad(n) = w.sum();
    if (d_input) *d_input = params.values.head(n) * w.transpose();
    return grad;
  }
  Mlp::Tape tape;
  mlp_.forward(params.values, x, &tape);
  mlp_.backward(params.values, tape, w.transpose(), grad, d_input);
  return grad;
}

}  // namespace detail

namespace {

void check_finite(const ParamVector& p) {
  if (!p.values.allFinite()) throw std::invalid_argument("parameters must be finite");
}

Eigen::MatrixXd as_column(const Eigen::VectorXd& v) { return v; }

}  // namespace

// ---------------------------------------------------------------------------
// QApproximator

QApproximator QApproximator::tabular(std::size_t n_states, std::size_t n_actions) {
  return QApproximator(detail::ScalarApprox::table(n_states * n_actions), true, n_states, n_actions);
}

QApproximator QApproximator::linear(Eigen::MatrixXd features, std::size_t n_states,
                                    std::size_t n_actions) {
  if (static_cast<std::size_t>(features.rows()) != n_states * n_actions) {
    throw std::invalid_argument("feature matrix needs one row per state-action pair");
  }
  return QApproximator(detail::ScalarApprox::feature_table(std::move(features)), true, n_states,
                       n_actions);
}

QApproximator QApproximator::linear(std::size_t state_dim, std::size_t action_dim) {
  return QApproximator(detail::ScalarApprox::affine(state_dim + action_dim), false, state_dim,
                       action_dim);
}

QApproximator QApproximator::mlp_discrete(std::size_t n_states, std::size_t n_actions,
                                          std::size_t width, Rng& rng) {
  return QApproximator(detail::ScalarApprox::mlp(n_states + n_actions, width, rng), true, n_states,
                       n_actions);
}

QApproximator QApproximator::mlp(std::size_t state_dim, std::size_t action_dim, std::size_t width,
                                 Rng& rng) {
  return QApproximator(detail::ScalarApprox::mlp(state_dim + action_dim, width, rng), false,
                       state_dim, action_dim);
}

void QApproximator::set_params(const ParamVector& p) {
  require_same_layout(core_.params, p);
  check_finite(p);
  core_.params = p;
}

std::size_t QApproximator::flat_index(const StateAction& h) const {
  if (!discrete_ || !h.is_discrete()) throw std::invalid_argument("expected a discrete (s, a) pair");
  const auto s = std::get<std::size_t>(h.state);
  const auto a = std::get<std::size_t>(h.action);
  if (s >= dim_s_ || a >= dim_a_) throw std::out_of_range("state-action index out of range");
  return s * dim_a_ + a;
}

Eigen::VectorXd QApproximator::encode(const StateAction& h) const {
  if (discrete_) {
    const auto idx = flat_index(h);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_s_ + dim_a_));
    x(static_cast<Eigen::Index>(idx / dim_a_)) = 1.0;
    x(static_cast<Eigen::Index>(dim_s_ + idx % dim_a_)) = 1.0;
    return x;
  }
  if (h.is_discrete() || !std::holds_alternative<Eigen::VectorXd>(h.state) ||
      !std::holds_alternative<Eigen::VectorXd>(h.action)) {
    throw std::invalid_argument("expected a continuous (state, action) pair");
  }
  const auto& s = std::get<Eigen::VectorXd>(h.state);
  const auto& a = std::get<Eigen::VectorXd>(h.action);
  if (static_cast<std::size_t>(s.size()) != dim_s_ || static_cast<std::size_t>(a.size()) != dim_a_) {
    throw std::invalid_argument("state-action dimension mismatch");
  }
  Eigen::VectorXd x(s.size() + a.size());
  x << s, a;
  return x;
}

double QApproximator::eval(const StateAction& h) const {
  if (core_.indexed()) return core_.eval_index(flat_index(h));
  return core_.eval_inputs(as_column(encode(h)))(0);
}

ParamVector QApproximator::grad(const StateAction& h) const {
  if (core_.indexed()) return ParamVector(core_.params.layout, core_.grad_index(flat_index(h)));
  return ParamVector(core_.params.layout,
                     core_.backward_inputs(as_column(encode(h)), Eigen::VectorXd::Ones(1)));
}

QTable QApproximator::table() const {
  if (!discrete_) throw std::logic_error("table() requires a discrete approximator");
  QTable q(dim_s_, dim_a_);
  if (core_.kind() == ApproxKind::kTabular) {
    q = Eigen::Map<const QTable>(core_.params.values.data(), static_cast<Eigen::Index>(dim_s_),
                                 static_cast<Eigen::Index>(dim_a_));
    return q;
  }
  if (core_.indexed()) {
    const Eigen::VectorXd flat = core_.features() * core_.params.values;
    return Eigen::Map<const QTable>(flat.data(), static_cast<Eigen::Index>(dim_s_),
                                    static_cast<Eigen::Index>(dim_a_));
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_s_ + dim_a_),
                                            static_cast<Eigen::Index>(dim_s_ * dim_a_));
  for (std::size_t s = 0; s < dim_s_; ++s) {
    for (std::size_t a = 0; a < dim_a_; ++a) {
      const auto col = static_cast<Eigen::Index>(s * dim_a_ + a);
      x(static_cast<Eigen::Index>(s), col) = 1.0;
      x(static_cast<Eigen::Index>(dim_s_ + a), col) = 1.0;
    }
  }
  const Eigen::VectorXd flat = core_.eval_inputs(x);
  return Eigen::Map<const QTable>(flat.data(), static_cast<Eigen::Index>(dim_s_),
                                  static_cast<Eigen::Index>(dim_a_));
}

Eigen::MatrixXd QApproximator::jacobian() const {
  if (!discrete_) throw std::logic_error("jacobian() requires a discrete approximator");
  const auto n_pairs = static_cast<Eigen::Index>(dim_s_ * dim_a_);
  if (core_.kind() == ApproxKind::kTabular) return Eigen::MatrixXd::Identity(n_pairs, n_pairs);
  if (core_.indexed()) return core_.features();
  Eigen::MatrixXd jac(n_pairs, core_.params.values.size());
  for (std::size_t s = 0; s < dim_s_; ++s) {
    for (std::size_t a = 0; a < dim_a_; ++a) {
      jac.row(static_cast<Eigen::Index>(s * dim_a_ + a)) =
          grad(StateAction::discrete(s, a)).values.transpose();
    }
  }
  return jac;
}

Eigen::VectorXd QApproximator::eval_batch(const Eigen::MatrixXd& states,
                                          const Eigen::MatrixXd& actions) const {
  if (discrete_) throw std::logic_error("eval_batch() requires a continuous approximator");
  if (states.cols() != actions.cols()) throw std::invalid_argument("batch size mismatch");
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x << states, actions;
  return core_.eval_inputs(x);
}

QApproximator::Backward QApproximator::backward_batch(const Eigen::MatrixXd& states,
                                                      const Eigen::MatrixXd& actions,
                                                      const Eigen::VectorXd& weights) const {
  if (discrete_) throw std::logic_error("backward_batch() requires a continuous approximator");
  if (states.cols() != actions.cols()) throw std::invalid_argument("batch size mismatch");
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x << states, actions;
  Eigen::MatrixXd d_input;
  Backward out;
  out.param_grad = core_.backward_inputs(x, weights, &d_input);
  out.action_grad = d_input.bottomRows(actions.rows());
  return out;
}

// ---------------------------------------------------------------------------
// ValueApproximator

ValueApproximator ValueApproximator::tabular(std::size_t n_states) {
  return ValueApproximator(detail::ScalarApprox::table(n_states));
}

ValueApproximator ValueApproximator::linear(std::size_t state_dim) {
  return ValueApproximator(detail::ScalarApprox::affine(state_dim));
}

ValueApproximator ValueApproximator::mlp(std::size_t state_dim, std::size_t width, Rng& rng) {
  return ValueApproximator(detail::ScalarApprox::mlp(state_dim, width, rng));
}

void ValueApproximator::set_params(const ParamVector& p) {
  require_same_layout(core_.params, p);
  check_finite(p);
  core_.params = p;
}

double ValueApproximator::eval(std::size_t s) const { return core_.eval_index(s); }

double ValueApproximator::eval(const Eigen::VectorXd& s) const {
  return core_.eval_inputs(as_column(s))(0);
}

ParamVector ValueApproximator::grad(std::size_t s) const {
  return ParamVector(core_.params.layout, core_.grad_index(s));
}

ParamVector ValueApproximator::grad(const Eigen::VectorXd& s) const {
  return ParamVector(core_.params.layout,
                     core_.backward_inputs(as_column(s), Eigen::VectorXd::Ones(1)));
}

Eigen::VectorXd ValueApproximator::eval_batch(const Eigen::MatrixXd& states) const {
  return core_.eval_inputs(states);
}

Eigen::VectorXd ValueApproximator::backward_batch(const Eigen::MatrixXd& states,
                                                  const Eigen::VectorXd& weights) const {
  return core_.backward_inputs(states, weights);
}

// ---------------------------------------------------------------------------
// GaussianPolicy

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
}  // namespace

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return (log_std.array() + kHalfLog2PiE).sum();
}

GaussianPolicy::GaussianPolicy(std::size_t state_dim, std::size_t action_dim, std::size_t width,
                               Rng& rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      mean_net_(state_dim, width, action_dim),
      log_std_net_(state_dim, width, action_dim) {
  ParamLayout layout;
  mean_net_.append_layout(layout, "mean");
  log_std_net_.append_layout(layout, "log_std");
  params_ = ParamVector(layout);
  mean_net_.init(params_.values, rng);
  log_std_net_.init(params_.values, rng);
}

void GaussianPolicy::set_params(const ParamVector& p) {
  require_same_layout(params_, p);
  check_finite(p);
  params_ = p;
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& s) const {
  return mean_net_.forward(params_.values, as_column(s)).col(0);
}

Eigen::VectorXd GaussianPolicy::log_std(const Eigen::VectorXd& s) const {
  return log_std_net_.forward(params_.values, as_column(s)).col(0).cwiseMax(kLogStdMin).cwiseMin(
      kLogStdMax);
}

Eigen::VectorXd GaussianPolicy::sample(const Eigen::VectorXd& s, const Eigen::VectorXd& noise) const {
  if (static_cast<std::size_t>(noise.size()) != action_dim_) {
    throw std::invalid_argument("noise dimension must equal the action dimension");
  }
  return mean(s) + (log_std(s).array().exp() * noise.array()).matrix();
}

double GaussianPolicy::log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  if (static_cast<std::size_t>(a.size()) != action_dim_) {
    throw std::invalid_argument("action dimension mismatch");
  }
  const Eigen::VectorXd ls = log_std(s);
  const Eigen::ArrayXd z = (a - mean(s)).array() / ls.array().exp();
  return (-0.5 * z.square() - ls.array() - kHalfLog2Pi).sum();
}

double GaussianPolicy::entropy(const Eigen::VectorXd& s) const { return gaussian_entropy(log_std(s)); }

GaussianPolicy::Batch GaussianPolicy::forward(const Eigen::MatrixXd& states,
                                              const Eigen::MatrixXd& noise) const {
  if (static_cast<std::size_t>(noise.rows()) != action_dim_ || noise.cols() != states.cols()) {
    throw std::invalid_argument("noise must be action_dim x batch");
  }
  Batch b;
  b.mean = mean_net_.forward(params_.values, states, &b.mean_tape);
  b.raw_log_std = log_std_net_.forward(params_.values, states, &b.log_std_tape);
  b.log_std = b.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  b.noise = noise;
  b.actions = b.mean + (b.log_std.array().exp() * noise.array()).matrix();
  return b;
}

Eigen::VectorXd GaussianPolicy::backward(const Batch& batch, const Eigen::MatrixXd& d_mean,
                                         const Eigen::MatrixXd& d_log_std) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.values.size());
  mean_net_.backward(params_.values, batch.mean_tape, d_mean, grad);
  const Eigen::MatrixXd mask =
      ((batch.raw_log_std.array() >= kLogStdMin) && (batch.raw_log_std.array() <= kLogStdMax))
          .cast<double>();
  log_std_net_.backward(params_.values, batch.log_std_tape, d_log_std.cwiseProduct(mask), grad);
  return grad;
}

Eigen::VectorXd GaussianPolicy::reparam_log_prob(const Batch& batch) {
  const auto d = static_cast<double>(batch.noise.rows());
  return (-batch.log_std.colwise().sum() - 0.5 * batch.noise.colwise().squaredNorm()).transpose()
             .array() -
         d * kHalfLog2Pi;
}

// ---------------------------------------------------------------------------
// SoftmaxTablePolicy

SoftmaxTablePolicy::SoftmaxTablePolicy(std::size_t n_states, std::size_t n_actions)
    : n_states_(n_states), n_actions_(n_actions) {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("empty policy table");
  ParamLayout layout;
  layout.add("logits", n_states * n_actions);
  params_ = ParamVector(layout);
}

QTable SoftmaxTablePolicy::logits() const {
  return Eigen::Map<const QTable>(params_.values.data(), static_cast<Eigen::Index>(n_states_),
                                  static_cast<Eigen::Index>(n_actions_));
}

QTable SoftmaxTablePolicy::probs() const {
  QTable p = logits();
  for (Eigen::Index s = 0; s < p.rows(); ++s) {
    p.row(s).array() -= p.row(s).maxCoeff();
    p.row(s) = p.row(s).array().exp();
    p.row(s) /= p.row(s).sum();
  }
  return p;
}

}  // namespace virel
